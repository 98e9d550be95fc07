#include "cssr/rectify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cssr/rng.hpp"
#include "cssr/tensor.hpp"

namespace cssr {

std::array<double, 2> Homography::apply(double x, double y) const {
  const double w = m[2][0] * x + m[2][1] * y + m[2][2];
  if (std::fabs(w) < 1e-12)
    throw NumericError("homography: point maps to infinity");
  return {(m[0][0] * x + m[0][1] * y + m[0][2]) / w,
          (m[1][0] * x + m[1][1] * y + m[1][2]) / w};
}

double Homography::det() const {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Homography Homography::inverse() const {
  const double d = det();
  if (std::fabs(d) < 1e-12) throw NumericError("homography: singular, cannot invert");
  Homography inv;
  inv.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
  inv.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
  inv.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
  inv.m[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
  inv.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
  inv.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
  inv.m[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
  inv.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
  inv.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
  // Renormalize to the m[2][2] == 1 convention when possible.
  if (std::fabs(inv.m[2][2]) > 1e-12) {
    const double s = inv.m[2][2];
    for (auto& row : inv.m)
      for (double& v : row) v /= s;
  }
  return inv;
}

std::vector<Correspondence> read_correspondences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  std::vector<Correspondence> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    Correspondence c;
    if (!(row >> c.x1)) continue;  // blank line
    double trailing;
    if (!(row >> c.y1 >> c.x2 >> c.y2) || (row >> trailing))
      throw IoError(path + ":" + std::to_string(line_no) + ": expected 'x1 y1 x2 y2'");
    points.push_back(c);
  }
  return points;
}

namespace {

// Similarity that moves the centroid to the origin and the mean distance to
// sqrt(2) (Hartley normalization); identity for degenerate all-equal inputs.
struct Similarity {
  double scale = 1.0, tx = 0.0, ty = 0.0;

  std::array<double, 2> apply(double x, double y) const {
    return {scale * (x + tx), scale * (y + ty)};
  }
};

Similarity normalizer(const std::vector<Correspondence>& pts, bool src) {
  double cx = 0, cy = 0;
  for (const auto& p : pts) {
    cx += src ? p.x1 : p.x2;
    cy += src ? p.y1 : p.y2;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0;
  for (const auto& p : pts) {
    const double dx = (src ? p.x1 : p.x2) - cx;
    const double dy = (src ? p.y1 : p.y2) - cy;
    mean_dist += std::sqrt(dx * dx + dy * dy);
  }
  mean_dist /= static_cast<double>(pts.size());
  Similarity s;
  s.tx = -cx;
  s.ty = -cy;
  s.scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
  return s;
}

// Solves the n x n system a*x = b in place by Gaussian elimination with
// partial pivoting. Throws NumericError if a pivot vanishes.
template <int N>
std::array<double, N> solve_linear(std::array<std::array<double, N>, N>& a,
                                   std::array<double, N>& b) {
  for (int col = 0; col < N; ++col) {
    int pivot = col;
    for (int row = col + 1; row < N; ++row)
      if (std::fabs(a[row][col]) > std::fabs(a[pivot][col])) pivot = row;
    if (std::fabs(a[pivot][col]) < 1e-12)
      throw NumericError("homography estimation: singular system (degenerate points)");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int row = col + 1; row < N; ++row) {
      const double f = a[row][col] / a[col][col];
      for (int k = col; k < N; ++k) a[row][k] -= f * a[col][k];
      b[row] -= f * b[col];
    }
  }
  std::array<double, N> x{};
  for (int row = N - 1; row >= 0; --row) {
    double acc = b[row];
    for (int k = row + 1; k < N; ++k) acc -= a[row][k] * x[k];
    x[row] = acc / a[row][row];
  }
  return x;
}

}  // namespace

Homography estimate_homography_dlt(const std::vector<Correspondence>& points, bool normalize) {
  const int n = static_cast<int>(points.size());
  if (n < 4)
    throw NumericError("homography estimation: need at least 4 correspondences, have " +
                       std::to_string(n));

  const Similarity t1 = normalize ? normalizer(points, true) : Similarity{};
  const Similarity t2 = normalize ? normalizer(points, false) : Similarity{};

  // Each correspondence yields two rows of the 8-unknown system
  //   [x y 1 0 0 0 -x'x -x'y] h = x'
  //   [0 0 0 x y 1 -y'x -y'y] h = y'
  // with h = (h00,h01,h02,h10,h11,h12,h20,h21) and h22 = 1.
  std::vector<std::array<double, 8>> rows;
  std::vector<double> rhs;
  rows.reserve(2 * n);
  rhs.reserve(2 * n);
  for (const auto& p : points) {
    const auto [x, y] = t1.apply(p.x1, p.y1);
    const auto [u, v] = t2.apply(p.x2, p.y2);
    rows.push_back({x, y, 1, 0, 0, 0, -u * x, -u * y});
    rhs.push_back(u);
    rows.push_back({0, 0, 0, x, y, 1, -v * x, -v * y});
    rhs.push_back(v);
  }

  std::array<std::array<double, 8>, 8> a{};
  std::array<double, 8> b{};
  if (n == 4) {
    for (int i = 0; i < 8; ++i) {
      a[i] = rows[i];
      b[i] = rhs[i];
    }
  } else {
    // Least squares via normal equations: A^T A h = A^T b. The prior
    // normalization keeps A well-conditioned enough for this at desk scale.
    for (size_t r = 0; r < rows.size(); ++r)
      for (int i = 0; i < 8; ++i) {
        b[i] += rows[r][i] * rhs[r];
        for (int j = 0; j < 8; ++j) a[i][j] += rows[r][i] * rows[r][j];
      }
  }
  const std::array<double, 8> h = solve_linear<8>(a, b);

  Homography hn;
  hn.m = {{{h[0], h[1], h[2]}, {h[3], h[4], h[5]}, {h[6], h[7], 1.0}}};
  if (!normalize) return hn;

  // Denormalize: H = T2^-1 * Hn * T1, with T = [[s,0,s*tx],[0,s,s*ty],[0,0,1]].
  Homography ht1;
  ht1.m = {{{t1.scale, 0, t1.scale * t1.tx}, {0, t1.scale, t1.scale * t1.ty}, {0, 0, 1}}};
  Homography ht2inv;
  ht2inv.m = {{{1.0 / t2.scale, 0, -t2.tx}, {0, 1.0 / t2.scale, -t2.ty}, {0, 0, 1}}};
  Homography out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0;
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) acc += ht2inv.m[i][k] * hn.m[k][l] * ht1.m[l][j];
      out.m[i][j] = acc;
    }
  if (std::fabs(out.m[2][2]) < 1e-12)
    throw NumericError("homography estimation: denormalized H has vanishing scale");
  const double s = out.m[2][2];
  for (auto& row : out.m)
    for (double& v : row) v /= s;
  return out;
}

double transfer_error(const Homography& h, const Correspondence& c) {
  const auto [x, y] = h.apply(c.x1, c.y1);
  return std::hypot(x - c.x2, y - c.y2);
}

RansacResult ransac_homography(const std::vector<Correspondence>& points, double threshold_px,
                               int iterations, uint64_t seed) {
  const int n = static_cast<int>(points.size());
  if (n < 4)
    throw NumericError("ransac: need at least 4 correspondences, have " + std::to_string(n));
  if (threshold_px <= 0) throw ConfigError("ransac: threshold must be > 0");
  if (iterations < 1) throw ConfigError("ransac: iterations must be >= 1");

  std::vector<int> best;
  for (int it = 0; it < iterations; ++it) {
    Rng rng(Rng::derive(seed, static_cast<uint64_t>(it)));
    // Partial Fisher-Yates for 4 distinct indices.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = 0; i < 4; ++i) std::swap(order[i], order[i + rng.uniform_int(n - i)]);
    std::vector<Correspondence> sample = {points[order[0]], points[order[1]],
                                          points[order[2]], points[order[3]]};
    Homography h;
    try {
      h = estimate_homography_dlt(sample);
    } catch (const NumericError&) {
      continue;  // degenerate minimal sample
    }
    std::vector<int> inliers;
    for (int i = 0; i < n; ++i) {
      try {
        if (transfer_error(h, points[i]) < threshold_px) inliers.push_back(i);
      } catch (const NumericError&) {
        // The candidate maps this point to infinity: infinite transfer
        // error, so it is simply not an inlier of this model.
      }
    }
    if (inliers.size() > best.size()) best = std::move(inliers);
  }

  if (best.size() < 4)
    throw NumericError("ransac: no consensus (best model had " +
                       std::to_string(best.size()) + " inliers, need 4)");
  std::vector<Correspondence> support;
  for (int i : best) support.push_back(points[i]);
  return {estimate_homography_dlt(support), std::move(best)};
}

ImageBuffer warp_bilinear(const ImageBuffer& img, const Homography& h, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw ConfigError("warp: output size must be positive");
  const Homography inv = h.inverse();
  ImageBuffer out(out_w, out_h);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const auto [sx, sy] = inv.apply(x, y);
      if (sx < 0 || sy < 0 || sx > img.width - 1 || sy > img.height - 1) continue;
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fy) * ((1 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c)) +
                         fy * ((1 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c));
        out.at(x, y, c) = static_cast<uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
      }
    }
  return out;
}

ImageBuffer average_stack(const std::vector<ImageBuffer>& frames) {
  if (frames.empty()) throw ConfigError("average_stack: no frames");
  const int w = frames[0].width, h = frames[0].height;
  for (const auto& f : frames)
    if (f.width != w || f.height != h)
      throw ShapeError("average_stack: frame size " + std::to_string(f.width) + "x" +
                       std::to_string(f.height) + " differs from " + std::to_string(w) + "x" +
                       std::to_string(h));
  ImageBuffer out(w, h);
  const size_t count = out.data.size();
  std::vector<double> acc(count, 0.0);
  for (const auto& f : frames)
    for (size_t i = 0; i < count; ++i) acc[i] += f.data[i];
  const double inv = 1.0 / static_cast<double>(frames.size());
  for (size_t i = 0; i < count; ++i)
    out.data[i] = static_cast<uint8_t>(std::clamp(acc[i] * inv + 0.5, 0.0, 255.0));
  return out;
}

namespace {

// Catmull-Rom kernel (cubic convolution, a = -0.5).
double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::fabs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
  return 0.0;
}

ImageBuffer resample_bicubic(const ImageBuffer& img, double scale, int out_w, int out_h) {
  ImageBuffer out(out_w, out_h);
  for (int oy = 0; oy < out_h; ++oy) {
    // Pixel centers sit at i + 0.5 in both grids.
    const double sy = (oy + 0.5) * scale - 0.5;
    const int y0 = static_cast<int>(std::floor(sy));
    const double ty = sy - y0;
    double wy[4];
    for (int k = 0; k < 4; ++k) wy[k] = cubic_weight(ty - (k - 1));
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = (ox + 0.5) * scale - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const double tx = sx - x0;
      double wx[4];
      for (int k = 0; k < 4; ++k) wx[k] = cubic_weight(tx - (k - 1));
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int ky = 0; ky < 4; ++ky) {
          const int yy = std::clamp(y0 + ky - 1, 0, img.height - 1);
          double row = 0.0;
          for (int kx = 0; kx < 4; ++kx) {
            const int xx = std::clamp(x0 + kx - 1, 0, img.width - 1);
            row += wx[kx] * img.at(xx, yy, c);
          }
          acc += wy[ky] * row;
        }
        out.at(ox, oy, c) = static_cast<uint8_t>(std::clamp(acc + 0.5, 0.0, 255.0));
      }
    }
  }
  return out;
}

}  // namespace

ImageBuffer downscale_bicubic(const ImageBuffer& img, int factor) {
  if (factor < 1) throw ConfigError("downscale_bicubic: factor must be >= 1");
  if (factor == 1) return img;
  if (img.width % factor != 0 || img.height % factor != 0)
    throw ShapeError("downscale_bicubic: " + std::to_string(img.width) + "x" +
                     std::to_string(img.height) + " not divisible by " +
                     std::to_string(factor));
  return resample_bicubic(img, factor, img.width / factor, img.height / factor);
}

ImageBuffer upscale_bicubic(const ImageBuffer& img, int factor) {
  if (factor < 1) throw ConfigError("upscale_bicubic: factor must be >= 1");
  if (factor == 1) return img;
  return resample_bicubic(img, 1.0 / factor, img.width * factor, img.height * factor);
}

}  // namespace cssr
