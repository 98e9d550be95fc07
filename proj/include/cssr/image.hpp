#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cssr/tensor.hpp"

namespace cssr {

// 8-bit RGB image, interleaved row-major.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0) {}

  uint8_t& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  uint8_t at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

// Reads a binary PPM (P6, maxval <= 255); with PNG support compiled in, also
// 8-bit RGB/RGBA PNG (alpha dropped). Dispatches on the file's magic bytes.
ImageBuffer read_image(const std::string& path);

// Writes by extension: .ppm always available, .png when compiled in.
void write_image(const std::string& path, const ImageBuffer& img);

// Planar (1,3,h,w) tensor in [0,1].
template <typename S>
Tensor<S> image_to_tensor(const ImageBuffer& img);

// Clamps to [0,1] and quantizes with half-up rounding.
template <typename S>
ImageBuffer tensor_to_image(const Tensor<S>& t, int batch_index = 0);

// Half-up rounding of v*255 into [0,255]; the single quantization rule used
// everywhere a real value becomes an 8-bit sample.
inline uint8_t quantize_unit(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 1.0) return 255;
  return static_cast<uint8_t>(v * 255.0 + 0.5);
}

extern template Tensor<float> image_to_tensor<float>(const ImageBuffer&);
extern template Tensor<double> image_to_tensor<double>(const ImageBuffer&);
extern template ImageBuffer tensor_to_image<float>(const Tensor<float>&, int);
extern template ImageBuffer tensor_to_image<double>(const Tensor<double>&, int);

}  // namespace cssr
