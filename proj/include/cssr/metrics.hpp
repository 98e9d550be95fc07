#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cssr/image.hpp"

namespace cssr {

// Full-range BT.601 luma, 0.299 R + 0.587 G + 0.114 B, kept real-valued.
std::vector<double> rgb_to_y(const ImageBuffer& img);

// Peak signal-to-noise ratio between two equal-length sample planes in
// [0, peak]. An exact match reports the 100 dB cap instead of infinity.
double psnr(const std::vector<double>& a, const std::vector<double>& b, double peak = 255.0);

// Mean structural similarity over all fully-valid 11x11 windows (Gaussian
// weights, sigma 1.5; C1 = (0.01*255)^2, C2 = (0.03*255)^2). Planes are
// h x w row-major with values in [0,255]; both dims must be >= 11.
double ssim(const std::vector<double>& a, const std::vector<double>& b, int w, int h);

// Per-channel 256-bin histograms over a set of frames.
std::array<std::array<uint64_t, 256>, 3> channel_histograms(
    const std::vector<ImageBuffer>& frames);

// Per-image PSNR/SSIM rows plus aggregate means, with a fixed-format text
// rendering for the CLI.
struct MetricReport {
  struct Row {
    std::string name;
    double psnr = 0;
    double ssim = 0;
  };
  std::vector<Row> rows;

  double mean_psnr() const;
  double mean_ssim() const;
  std::string to_text() const;
};

}  // namespace cssr
