#pragma once

// Procedural test images: smooth gradients, sinusoidal texture, and a few
// hard edges, deterministic in the seed. Rich enough in low and high
// frequencies to make restoration, metric, and alignment tests meaningful
// without shipping binary fixtures.

#include <cmath>
#include <cstdint>

#include "cssr/image.hpp"
#include "cssr/rng.hpp"

namespace cssr::testsupport {

inline ImageBuffer synthetic_image(int width, int height, uint64_t seed) {
  Rng rng(seed);
  const double phase_x = rng.uniform(0.0, 6.28318);
  const double phase_y = rng.uniform(0.0, 6.28318);
  const double freq_x = rng.uniform(2.0, 5.0);
  const double freq_y = rng.uniform(2.0, 5.0);
  const double gradient_angle = rng.uniform(0.0, 6.28318);
  const int bar_x = 2 + rng.uniform_int(width > 4 ? width - 4 : 1);
  const int bar_y = 2 + rng.uniform_int(height > 4 ? height - 4 : 1);

  const double gx = std::cos(gradient_angle), gy = std::sin(gradient_angle);
  ImageBuffer img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width, v = (y + 0.5) / height;
      const double ramp = 0.5 + 0.35 * (gx * (u - 0.5) + gy * (v - 0.5));
      const double wave = 0.25 * std::sin(freq_x * 6.28318 * u + phase_x) *
                          std::cos(freq_y * 6.28318 * v + phase_y);
      double base = ramp + wave;
      if (x == bar_x || x == bar_x + 1) base = 0.95;  // vertical edge pair
      if (y == bar_y) base = 0.05;                    // horizontal edge
      // Channel-dependent tint keeps the three planes distinct.
      img.at(x, y, 0) = quantize_unit(base);
      img.at(x, y, 1) = quantize_unit(0.85 * base + 0.07 * u);
      img.at(x, y, 2) = quantize_unit(0.7 * base + 0.12 * v);
    }
  }
  return img;
}

}  // namespace cssr::testsupport
