#include "cssr/image.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>

#ifdef CSSR_WITH_PNG
#include <png.h>
#endif

namespace cssr {

namespace {

// Reads the next PPM header token, skipping whitespace and '#' comments.
std::string ppm_token(std::istream& in, const std::string& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw IoError(path + ": truncated PPM header");
  return tok;
}

int ppm_int(std::istream& in, const std::string& path, const char* field) {
  const std::string tok = ppm_token(in, path);
  try {
    size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size() || v < 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ": bad PPM " + field + " '" + tok + "'");
  }
}

ImageBuffer read_ppm(std::istream& in, const std::string& path) {
  const int w = ppm_int(in, path, "width");
  const int h = ppm_int(in, path, "height");
  const int maxval = ppm_int(in, path, "maxval");
  if (w < 1 || h < 1) throw IoError(path + ": empty PPM image");
  if (maxval > 255)
    throw IoError(path + ": PPM maxval " + std::to_string(maxval) +
                  " not supported (only 8-bit images, maxval <= 255)");
  if (maxval < 1) throw IoError(path + ": bad PPM maxval 0");
  // Header ends with exactly one whitespace byte (already consumed by the
  // maxval token's terminator), so the pixel payload starts here.
  ImageBuffer img(w, h);
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw IoError(path + ": truncated PPM pixel data (wanted " +
                  std::to_string(img.data.size()) + " bytes, got " +
                  std::to_string(in.gcount()) + ")");
  if (maxval != 255)
    for (auto& v : img.data)
      v = static_cast<uint8_t>((static_cast<int>(v) * 255 + maxval / 2) / maxval);
  return img;
}

void write_ppm(const std::string& path, const ImageBuffer& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError(path + ": write failed");
}

#ifdef CSSR_WITH_PNG
ImageBuffer read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError(path + ": cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError(path + ": libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError(path + ": invalid PNG data");
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  // Normalize everything to 8-bit RGB: palette/gray expanded, 16-bit
  // narrowed, alpha dropped.
  png_set_expand(png);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (png_get_color_type(png, info) & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (!(png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR)) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  ImageBuffer img(static_cast<int>(png_get_image_width(png, info)),
                  static_cast<int>(png_get_image_height(png, info)));
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = img.data.data() + static_cast<size_t>(y) * img.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

void write_png(const std::string& path, const ImageBuffer& img) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError(path + ": cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError(path + ": libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError(path + ": PNG write failed");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.data.data() + static_cast<size_t>(y) * img.width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}
#endif  // CSSR_WITH_PNG

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(),
                                                suffix) == 0;
}

}  // namespace

ImageBuffer read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() == 2 && magic[0] == 'P' && magic[1] == '6') return read_ppm(in, path);
  if (in.gcount() == 2 && magic[0] == '\x89' && magic[1] == 'P') {
#ifdef CSSR_WITH_PNG
    in.close();
    return read_png(path);
#else
    throw IoError(path + ": PNG input but PNG support is not compiled in (use PPM)");
#endif
  }
  throw IoError(path + ": unsupported image format (expected binary PPM 'P6'"
#ifdef CSSR_WITH_PNG
                " or PNG"
#endif
                ")");
}

void write_image(const std::string& path, const ImageBuffer& img) {
  if (img.width < 1 || img.height < 1) throw IoError(path + ": refusing to write empty image");
  if (has_suffix(path, ".png")) {
#ifdef CSSR_WITH_PNG
    write_png(path, img);
    return;
#else
    throw IoError(path + ": PNG output but PNG support is not compiled in (use .ppm)");
#endif
  }
  write_ppm(path, img);
}

template <typename S>
Tensor<S> image_to_tensor(const ImageBuffer& img) {
  Tensor<S> t(Shape{1, 3, img.height, img.width});
  for (int c = 0; c < 3; ++c) {
    S* plane = t.plane(0, c);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        plane[static_cast<long long>(y) * img.width + x] =
            static_cast<S>(img.at(x, y, c)) / S(255);
  }
  return t;
}

template <typename S>
ImageBuffer tensor_to_image(const Tensor<S>& t, int batch_index) {
  const Shape s = t.shape;
  if (s.c != 3 || batch_index < 0 || batch_index >= s.n)
    shape_fail("tensor_to_image", s, "bx3xhxw with valid batch index");
  ImageBuffer img(s.w, s.h);
  for (int c = 0; c < 3; ++c) {
    const S* plane = t.plane(batch_index, c);
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x)
        img.at(x, y, c) = quantize_unit(static_cast<double>(plane[static_cast<long long>(y) * s.w + x]));
  }
  return img;
}

template Tensor<float> image_to_tensor<float>(const ImageBuffer&);
template Tensor<double> image_to_tensor<double>(const ImageBuffer&);
template ImageBuffer tensor_to_image<float>(const Tensor<float>&, int);
template ImageBuffer tensor_to_image<double>(const Tensor<double>&, int);

}  // namespace cssr
