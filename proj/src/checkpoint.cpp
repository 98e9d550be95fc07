#include "cssr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace cssr {

namespace {

constexpr char kMagic[] = "CSSR1";

// The payload is raw IEEE-754 f32, little-endian. The targets this builds on
// are little-endian; the static check below documents the assumption instead
// of paying for a byte swap nobody exercises.
static_assert(sizeof(float) == 4, "checkpoint payload assumes 4-byte IEEE floats");

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor<float>*>>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << kMagic << "\n";
  for (const auto& [name, t] : tensors) {
    if (name.empty() || name.find(' ') != std::string::npos ||
        name.find('\n') != std::string::npos)
      throw ConfigError("checkpoint: tensor name '" + name + "' must be non-empty, no spaces");
    const Shape s = t->shape;
    out << name << " " << s.numel() << " " << s.n << " " << s.c << " " << s.h << " " << s.w
        << "\n";
  }
  out << "\n";
  for (const auto& [name, t] : tensors)
    out.write(reinterpret_cast<const char*>(t->data.data()),
              static_cast<std::streamsize>(t->data.size() * sizeof(float)));
  if (!out) throw IoError(path + ": write failed");
}

std::map<std::string, Tensor<float>> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    throw IoError(path + ": not a checkpoint (bad magic '" + line + "')");

  std::vector<std::pair<std::string, Shape>> manifest;
  while (std::getline(in, line)) {
    if (line.empty()) break;  // manifest/payload separator
    std::istringstream row(line);
    std::string name;
    long long count;
    Shape s;
    if (!(row >> name >> count >> s.n >> s.c >> s.h >> s.w))
      throw IoError(path + ": malformed manifest line '" + line + "'");
    if (count != s.numel())
      throw IoError(path + ": manifest count " + std::to_string(count) +
                    " does not match shape " + s.str() + " for '" + name + "'");
    manifest.emplace_back(name, s);
  }
  if (manifest.empty()) throw IoError(path + ": checkpoint holds no tensors");

  std::map<std::string, Tensor<float>> out;
  for (const auto& [name, s] : manifest) {
    Tensor<float> t(s);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(t.data.size() * sizeof(float)))
      throw IoError(path + ": truncated payload while reading '" + name + "'");
    if (!out.emplace(name, std::move(t)).second)
      throw IoError(path + ": duplicate tensor '" + name + "'");
  }
  char extra;
  if (in.read(&extra, 1) && in.gcount() == 1)
    throw IoError(path + ": trailing bytes after payload");
  return out;
}

}  // namespace cssr
