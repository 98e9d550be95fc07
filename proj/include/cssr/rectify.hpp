#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cssr/image.hpp"

namespace cssr {

// Point match between a captured frame (x1,y1) and the reference plane (x2,y2).
struct Correspondence {
  double x1 = 0, y1 = 0;
  double x2 = 0, y2 = 0;
};

// 3x3 projective transform normalized to m[2][2] == 1.
struct Homography {
  std::array<std::array<double, 3>, 3> m = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  static Homography identity() { return Homography{}; }

  std::array<double, 2> apply(double x, double y) const;
  Homography inverse() const;  // throws NumericError on singular transforms
  double det() const;
};

// "x1 y1 x2 y2" per line; '#' comments and blank lines allowed.
std::vector<Correspondence> read_correspondences(const std::string& path);

// Direct linear transform with m[2][2] fixed to 1: Hartley-normalizes both
// point sets, solves the resulting 8-unknown linear system (exactly for 4
// correspondences, via normal equations for more), and denormalizes.
// `normalize=false` skips the conditioning step (kept for validation).
Homography estimate_homography_dlt(const std::vector<Correspondence>& points,
                                   bool normalize = true);

// Euclidean distance between H(x1,y1) and (x2,y2).
double transfer_error(const Homography& h, const Correspondence& c);

struct RansacResult {
  Homography h;
  std::vector<int> inliers;  // indices into the input list, ascending
};

// Classic 4-point RANSAC; candidate inliers are matches with transfer error
// below threshold_px, and the best consensus set is refit with DLT. Each
// iteration draws from its own derived seed, so results do not depend on
// evaluation order. Throws NumericError when no model reaches 4 inliers.
RansacResult ransac_homography(const std::vector<Correspondence>& points,
                               double threshold_px, int iterations, uint64_t seed);

// Inverse-warps img into the reference frame: output(p) samples img
// bilinearly at H^-1 p; samples outside the image are zero.
ImageBuffer warp_bilinear(const ImageBuffer& img, const Homography& h, int out_w, int out_h);

// Pixelwise mean of equally-sized frames, half-up rounded.
ImageBuffer average_stack(const std::vector<ImageBuffer>& frames);

// Integer-factor Catmull-Rom resampling (a = -0.5, pixel centers at i+0.5,
// clamp-to-edge). factor == 1 copies.
ImageBuffer downscale_bicubic(const ImageBuffer& img, int factor);
ImageBuffer upscale_bicubic(const ImageBuffer& img, int factor);

}  // namespace cssr
