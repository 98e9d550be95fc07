#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cssr/image.hpp"
#include "cssr/tensor.hpp"

namespace cssr {

// Parameters of the two-stage display/recapture degradation chain:
//   blur(k1) -> color transfer f -> box downscale s1 -> + noise n1
//   -> blur(k2) -> box downscale s2 -> + noise n2 -> clamp -> quantize.
// The color transfer is per-channel gain * x^gamma + bias, clamped to [0,1].
struct DegradationParams {
  double screen_blur_sigma = 0.0;
  int screen_scale = 1;
  double screen_noise_sigma = 0.0;
  std::array<double, 3> color_gain = {1.0, 1.0, 1.0};
  std::array<double, 3> color_bias = {0.0, 0.0, 0.0};
  double gamma = 1.0;
  double camera_blur_sigma = 0.0;
  int camera_scale = 4;
  double camera_noise_sigma = 0.0;
  uint64_t seed = 0;

  int total_scale() const { return screen_scale * camera_scale; }
  void validate() const;
};

// Normalized 2D isotropic Gaussian of size (2*radius+1)^2; sigma = 0 yields
// the delta kernel.
std::vector<double> gaussian_kernel(double sigma, int radius);

// Applies the full chain to an HR image. Spatial dims must be divisible by
// total_scale(). Deterministic in (params, seed).
ImageBuffer degrade(const ImageBuffer& hr, const DegradationParams& p);

// Floating-point core of degrade(): consumes/produces (1,3,h,w) in [0,1],
// clamped but not yet quantized. Exposed for tests that need pre-quantization
// values.
Tensor<double> degrade_tensor(const Tensor<double>& hr, const DegradationParams& p);

// Degrades the first n_pairs readable images in hr_dir (sorted by filename),
// writing hr_NNNN.ppm / lr_NNNN.ppm pairs plus a "hr<TAB>lr" manifest into
// out_dir. Per-image seed is p.seed + index.
struct DatasetPair {
  std::string hr_path;
  std::string lr_path;
};
std::vector<DatasetPair> make_dataset(const std::string& hr_dir, const DegradationParams& p,
                                      int n_pairs, const std::string& out_dir);

// Parses a manifest of "hr<TAB>lr" lines; relative paths resolve against the
// manifest's directory.
std::vector<DatasetPair> read_manifest(const std::string& manifest_path);

}  // namespace cssr
