#include "cssr/metrics.hpp"

#include <cmath>
#include <sstream>

#include "cssr/tensor.hpp"

namespace cssr {

std::vector<double> rgb_to_y(const ImageBuffer& img) {
  std::vector<double> y(static_cast<size_t>(img.width) * img.height);
  for (size_t i = 0; i < y.size(); ++i) {
    const uint8_t* px = img.data.data() + i * 3;
    y[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return y;
}

double psnr(const std::vector<double>& a, const std::vector<double>& b, double peak) {
  if (a.size() != b.size() || a.empty())
    throw ShapeError("psnr: planes differ in size (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  double mse = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(peak * peak / mse));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 6.5025;    // (0.01 * 255)^2
constexpr double kC2 = 58.5225;   // (0.03 * 255)^2

const std::array<double, kWindow * kWindow>& ssim_window() {
  static const auto window = [] {
    std::array<double, kWindow * kWindow> w{};
    double sum = 0.0;
    for (int y = 0; y < kWindow; ++y)
      for (int x = 0; x < kWindow; ++x) {
        const double dy = y - kWindow / 2, dx = x - kWindow / 2;
        const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kSsimSigma * kSsimSigma));
        w[static_cast<size_t>(y) * kWindow + x] = v;
        sum += v;
      }
    for (double& v : w) v /= sum;
    return w;
  }();
  return window;
}

}  // namespace

double ssim(const std::vector<double>& a, const std::vector<double>& b, int w, int h) {
  if (a.size() != b.size() || a.size() != static_cast<size_t>(w) * h)
    throw ShapeError("ssim: plane size mismatch");
  if (w < kWindow || h < kWindow)
    throw ShapeError("ssim: image " + std::to_string(w) + "x" + std::to_string(h) +
                     " smaller than the " + std::to_string(kWindow) + "x" +
                     std::to_string(kWindow) + " window");
  const auto& win = ssim_window();
  double total = 0.0;
  long long count = 0;
  for (int oy = 0; oy + kWindow <= h; ++oy)
    for (int ox = 0; ox + kWindow <= w; ++ox) {
      double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
      for (int ky = 0; ky < kWindow; ++ky)
        for (int kx = 0; kx < kWindow; ++kx) {
          const double wv = win[static_cast<size_t>(ky) * kWindow + kx];
          const double va = a[static_cast<size_t>(oy + ky) * w + ox + kx];
          const double vb = b[static_cast<size_t>(oy + ky) * w + ox + kx];
          mu_a += wv * va;
          mu_b += wv * vb;
          aa += wv * va * va;
          bb += wv * vb * vb;
          ab += wv * va * vb;
        }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      total += ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
               ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
      ++count;
    }
  return total / static_cast<double>(count);
}

std::array<std::array<uint64_t, 256>, 3> channel_histograms(
    const std::vector<ImageBuffer>& frames) {
  std::array<std::array<uint64_t, 256>, 3> hist{};
  for (const auto& f : frames)
    for (size_t i = 0; i < f.data.size(); i += 3)
      for (int c = 0; c < 3; ++c) ++hist[c][f.data[i + c]];
  return hist;
}

double MetricReport::mean_psnr() const {
  double acc = 0;
  for (const auto& r : rows) acc += r.psnr;
  return rows.empty() ? 0.0 : acc / static_cast<double>(rows.size());
}

double MetricReport::mean_ssim() const {
  double acc = 0;
  for (const auto& r : rows) acc += r.ssim;
  return rows.empty() ? 0.0 : acc / static_cast<double>(rows.size());
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  for (const auto& r : rows)
    os << r.name << "\tpsnr=" << r.psnr << "\tssim=" << r.ssim << "\n";
  os << "mean\tpsnr=" << mean_psnr() << "\tssim=" << mean_ssim() << "\n";
  return os.str();
}

}  // namespace cssr
