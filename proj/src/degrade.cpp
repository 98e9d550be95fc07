#include "cssr/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cssr/rng.hpp"

namespace fs = std::filesystem;

namespace cssr {

void DegradationParams::validate() const {
  if (screen_blur_sigma < 0 || camera_blur_sigma < 0)
    throw ConfigError("degradation: blur sigma must be >= 0");
  if (screen_noise_sigma < 0 || camera_noise_sigma < 0)
    throw ConfigError("degradation: noise sigma must be >= 0");
  if (screen_scale < 1 || camera_scale < 1)
    throw ConfigError("degradation: scales must be >= 1");
  if (gamma <= 0) throw ConfigError("degradation: gamma must be > 0");
  for (double g : color_gain)
    if (g <= 0) throw ConfigError("degradation: color gain must be > 0");
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
  if (sigma < 0) throw ConfigError("gaussian_kernel: sigma must be >= 0");
  if (radius < 0) throw ConfigError("gaussian_kernel: radius must be >= 0");
  const int size = 2 * radius + 1;
  std::vector<double> k(static_cast<size_t>(size) * size, 0.0);
  if (sigma == 0.0) {
    k[static_cast<size_t>(radius) * size + radius] = 1.0;
    return k;
  }
  double sum = 0.0;
  for (int y = -radius; y <= radius; ++y)
    for (int x = -radius; x <= radius; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k[static_cast<size_t>(y + radius) * size + (x + radius)] = v;
      sum += v;
    }
  for (double& v : k) v /= sum;
  return k;
}

namespace {

// Clamp-to-edge 2D convolution of each channel plane with a square kernel.
Tensor<double> blur(const Tensor<double>& x, double sigma) {
  if (sigma == 0.0) return x;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const std::vector<double> k = gaussian_kernel(sigma, radius);
  const int size = 2 * radius + 1;
  const Shape s = x.shape;
  Tensor<double> out(s);
  for (int b = 0; b < s.n; ++b)
    for (int c = 0; c < s.c; ++c) {
      const double* in_plane = x.plane(b, c);
      double* out_plane = out.plane(b, c);
      for (int y = 0; y < s.h; ++y)
        for (int xx = 0; xx < s.w; ++xx) {
          double acc = 0.0;
          for (int ky = 0; ky < size; ++ky) {
            int sy = std::clamp(y + ky - radius, 0, s.h - 1);
            for (int kx = 0; kx < size; ++kx) {
              int sx = std::clamp(xx + kx - radius, 0, s.w - 1);
              acc += k[static_cast<size_t>(ky) * size + kx] *
                     in_plane[static_cast<long long>(sy) * s.w + sx];
            }
          }
          out_plane[static_cast<long long>(y) * s.w + xx] = acc;
        }
    }
  return out;
}

Tensor<double> box_downscale(const Tensor<double>& x, int factor) {
  if (factor == 1) return x;
  const Shape s = x.shape;
  if (s.h % factor != 0 || s.w % factor != 0)
    shape_fail("box downscale input", s, "h,w divisible by " + std::to_string(factor));
  Tensor<double> out(Shape{s.n, s.c, s.h / factor, s.w / factor});
  const double inv = 1.0 / (factor * factor);
  for (int b = 0; b < s.n; ++b)
    for (int c = 0; c < s.c; ++c) {
      const double* in_plane = x.plane(b, c);
      double* out_plane = out.plane(b, c);
      for (int oy = 0; oy < s.h / factor; ++oy)
        for (int ox = 0; ox < s.w / factor; ++ox) {
          double acc = 0.0;
          for (int dy = 0; dy < factor; ++dy)
            for (int dx = 0; dx < factor; ++dx)
              acc += in_plane[static_cast<long long>(oy * factor + dy) * s.w + ox * factor + dx];
          out_plane[static_cast<long long>(oy) * (s.w / factor) + ox] = acc * inv;
        }
    }
  return out;
}

void add_noise(Tensor<double>& x, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  for (double& v : x.data) v += sigma * rng.normal();
}

}  // namespace

Tensor<double> degrade_tensor(const Tensor<double>& hr, const DegradationParams& p) {
  p.validate();
  const Shape s = hr.shape;
  const int total = p.total_scale();
  if (s.c != 3) shape_fail("degrade input", s, "bx3xhxw");
  if (s.h % total != 0 || s.w % total != 0 || s.h < total || s.w < total)
    shape_fail("degrade input spatial dims must divide by the total scale", s,
               "h,w divisible by " + std::to_string(total));

  Rng rng(p.seed);
  Tensor<double> img = blur(hr, p.screen_blur_sigma);
  // Color transfer: per-channel gain * x^gamma + bias, clamped.
  for (int b = 0; b < s.n; ++b)
    for (int c = 0; c < 3; ++c) {
      double* plane = img.plane(b, c);
      const long long count = static_cast<long long>(s.h) * s.w;
      for (long long i = 0; i < count; ++i) {
        double v = p.color_gain[c] * std::pow(std::max(plane[i], 0.0), p.gamma) +
                   p.color_bias[c];
        plane[i] = std::clamp(v, 0.0, 1.0);
      }
    }
  img = box_downscale(img, p.screen_scale);
  add_noise(img, p.screen_noise_sigma, rng);
  img = blur(img, p.camera_blur_sigma);
  img = box_downscale(img, p.camera_scale);
  add_noise(img, p.camera_noise_sigma, rng);
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

ImageBuffer degrade(const ImageBuffer& hr, const DegradationParams& p) {
  return tensor_to_image(degrade_tensor(image_to_tensor<double>(hr), p));
}

std::vector<DatasetPair> make_dataset(const std::string& hr_dir, const DegradationParams& p,
                                      int n_pairs, const std::string& out_dir) {
  p.validate();
  if (n_pairs < 1) throw ConfigError("make_dataset: need at least one pair");
  if (!fs::is_directory(hr_dir)) throw IoError(hr_dir + ": not a directory");

  std::vector<std::string> candidates;
  for (const auto& entry : fs::directory_iterator(hr_dir))
    if (entry.is_regular_file()) candidates.push_back(entry.path().string());
  std::sort(candidates.begin(), candidates.end());

  std::vector<ImageBuffer> sources;
  std::vector<std::string> failures;
  for (const std::string& path : candidates) {
    if (static_cast<int>(sources.size()) == n_pairs) break;
    try {
      sources.push_back(read_image(path));
    } catch (const IoError& e) {
      failures.push_back(e.what());
    }
  }
  if (static_cast<int>(sources.size()) < n_pairs) {
    std::string msg = hr_dir + ": found only " + std::to_string(sources.size()) + " of " +
                      std::to_string(n_pairs) + " readable images";
    for (const std::string& f : failures) msg += "\n  " + f;
    throw IoError(msg);
  }

  fs::create_directories(out_dir);
  std::vector<DatasetPair> pairs;
  std::string manifest_path = (fs::path(out_dir) / "manifest.txt").string();
  std::ofstream manifest(manifest_path);
  if (!manifest) throw IoError(manifest_path + ": cannot open for writing");
  for (int i = 0; i < n_pairs; ++i) {
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "%04d.ppm", i);
    DatasetPair pair{(fs::path(out_dir) / ("hr_" + std::string(suffix))).string(),
                     (fs::path(out_dir) / ("lr_" + std::string(suffix))).string()};
    DegradationParams pp = p;
    pp.seed = p.seed + static_cast<uint64_t>(i);
    write_image(pair.hr_path, sources[i]);
    write_image(pair.lr_path, degrade(sources[i], pp));
    // Manifest rows hold paths relative to the manifest itself so the
    // dataset directory can be moved wholesale.
    manifest << "hr_" << suffix << "\t" << "lr_" << suffix << "\n";
    pairs.push_back(std::move(pair));
  }
  if (!manifest) throw IoError(manifest_path + ": write failed");
  return pairs;
}

std::vector<DatasetPair> read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError(manifest_path + ": cannot open");
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<DatasetPair> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw IoError(manifest_path + ":" + std::to_string(line_no) +
                    ": expected 'hr<TAB>lr'");
    auto resolve = [&](std::string p) {
      return fs::path(p).is_absolute() ? p : (base / p).string();
    };
    pairs.push_back({resolve(line.substr(0, tab)), resolve(line.substr(tab + 1))});
  }
  if (pairs.empty()) throw IoError(manifest_path + ": empty manifest");
  return pairs;
}

}  // namespace cssr
