// Forward semantics of the tensor engine: every operation against small
// hand-computed cases, a naive reference convolution, and shape/error
// contracts.

#include <cmath>
#include <vector>

#include "doctest.h"

#include "cssr/rng.hpp"
#include "cssr/tape.hpp"
#include "cssr/tensor.hpp"

using namespace cssr;

namespace {

Tensor<double> filled(Shape s, std::initializer_list<double> values) {
  Tensor<double> t(s);
  REQUIRE(t.data.size() == values.size());
  size_t i = 0;
  for (double v : values) t.data[i++] = v;
  return t;
}

Tensor<double> random_tensor(Shape s, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor<double> t(s);
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Textbook cross-correlation, written with explicit bounds checks instead of
// the library's column-range hoisting; serves as the independent reference.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w,
                          const Tensor<double>& bias, int pad) {
  const int oh = x.shape.h + 2 * pad - w.shape.h + 1;
  const int ow = x.shape.w + 2 * pad - w.shape.w + 1;
  Tensor<double> out(Shape{x.shape.n, w.shape.n, oh, ow});
  for (int b = 0; b < x.shape.n; ++b)
    for (int oc = 0; oc < w.shape.n; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias.data[oc];
          for (int ic = 0; ic < x.shape.c; ++ic)
            for (int ky = 0; ky < w.shape.h; ++ky)
              for (int kx = 0; kx < w.shape.w; ++kx) {
                const int iy = oy + ky - pad;
                const int ix = ox + kx - pad;
                if (iy < 0 || iy >= x.shape.h || ix < 0 || ix >= x.shape.w) continue;
                acc += x.at(b, ic, iy, ix) * w.at(oc, ic, ky, kx);
              }
          out.at(b, oc, oy, ox) = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("shape bookkeeping") {
  const Shape s{2, 3, 4, 5};
  CHECK(s.numel() == 120);
  CHECK(Tensor<double>(s).data.size() == 120);
  CHECK(s == Shape{2, 3, 4, 5});
  CHECK_FALSE(s == Shape{2, 3, 5, 4});
  CHECK(s.str() == "2x3x4x5");  // the AxBxCxD form shape errors print
}

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
  Tape<double> t;
  const auto x = random_tensor({1, 1, 3, 3}, 11);
  const ValueId xi = t.input(x);
  const ValueId w = t.input(filled({1, 1, 1, 1}, {1.0}));
  const ValueId b = t.input(filled({1, 1, 1, 1}, {0.0}));
  const ValueId y = t.conv2d(xi, w, b, 0, 0);
  CHECK(t.value(y).shape == x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(t.value(y).data[i] == x.data[i]);
}

TEST_CASE("conv2d: all-ones 2x2 kernel sums the window to 10") {
  Tape<double> t;
  const ValueId x = t.input(filled({1, 1, 2, 2}, {1, 2, 3, 4}));
  const ValueId w = t.input(filled({1, 1, 2, 2}, {1, 1, 1, 1}));
  const ValueId b = t.input(filled({1, 1, 1, 1}, {0.0}));
  const ValueId y = t.conv2d(x, w, b, 0, 0);
  CHECK(t.value(y).shape == Shape{1, 1, 1, 1});
  CHECK(t.value(y).data[0] == doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("conv2d: zero weights leave only the bias") {
  Tape<double> t;
  const ValueId x = t.input(random_tensor({2, 3, 4, 4}, 12));
  const ValueId w = t.input(Tensor<double>(Shape{5, 3, 3, 3}));
  const ValueId b = t.input(filled({1, 1, 1, 5}, {-1, 0.25, 7, 0, 2}));
  const ValueId y = t.conv2d(x, w, b, 1, 1);
  const Tensor<double>& out = t.value(y);
  CHECK(out.shape == Shape{2, 5, 4, 4});
  for (int n = 0; n < 2; ++n)
    for (int oc = 0; oc < 5; ++oc)
      for (int i = 0; i < 16; ++i)
        CHECK(out.data[out.idx(n, oc, i / 4, i % 4)] ==
              t.value(b).data[static_cast<size_t>(oc)]);
}

TEST_CASE("conv2d matches a naive reference on random tensors") {
  for (const int pad : {0, 1, 2}) {
    const auto x = random_tensor({2, 3, 6, 5}, 100 + pad);
    const auto w = random_tensor({4, 3, 3, 3}, 200 + pad);
    const auto bias = random_tensor({1, 1, 1, 4}, 300 + pad);
    const Tensor<double> want = naive_conv(x, w, bias, pad);
    const Tensor<double> got = conv2d_plain(x, w, bias, pad, pad);
    REQUIRE(got.shape == want.shape);
    for (size_t i = 0; i < got.data.size(); ++i)
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d: same padding preserves spatial size for odd kernels") {
  for (const int k : {1, 3, 5, 7, 11}) {
    Tape<double> t;
    const ValueId x = t.input(random_tensor({1, 2, 12, 13}, 40 + k));
    const ValueId w = t.input(random_tensor({3, 2, k, k}, 50 + k));
    const ValueId b = t.input(Tensor<double>(Shape{1, 1, 1, 3}));
    const ValueId y = t.conv2d_same(x, w, b);
    CHECK(t.value(y).shape == Shape{1, 3, 12, 13});
  }
}

TEST_CASE("conv2d error contracts") {
  Tape<double> t;
  const ValueId x = t.input(random_tensor({1, 3, 4, 4}, 1));
  SUBCASE("channel mismatch") {
    const ValueId w = t.input(random_tensor({2, 4, 3, 3}, 2));
    const ValueId b = t.input(Tensor<double>(Shape{1, 1, 1, 2}));
    CHECK_THROWS_AS(t.conv2d_same(x, w, b), ShapeError);
  }
  SUBCASE("even kernel refuses same padding") {
    const ValueId w = t.input(random_tensor({2, 3, 2, 2}, 3));
    const ValueId b = t.input(Tensor<double>(Shape{1, 1, 1, 2}));
    CHECK_THROWS_AS(t.conv2d_same(x, w, b), ConfigError);
  }
  SUBCASE("bias size mismatch") {
    const ValueId w = t.input(random_tensor({2, 3, 3, 3}, 4));
    const ValueId b = t.input(Tensor<double>(Shape{1, 1, 1, 5}));
    CHECK_THROWS_AS(t.conv2d_same(x, w, b), ShapeError);
  }
}

TEST_CASE("activations: fixed points and definitions") {
  Tape<double> t;
  const ValueId x = t.input(filled({1, 1, 1, 3}, {-1, 0, 2}));
  const Tensor<double>& r = t.value(t.relu(x));
  CHECK(r.data[0] == 0);
  CHECK(r.data[1] == 0);
  CHECK(r.data[2] == 2);
  const ValueId zero = t.input(filled({1, 1, 1, 1}, {0.0}));
  CHECK(t.scalar(t.sigmoid(zero)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t.scalar(t.tanh(zero)) == 0.0);
  const ValueId big = t.input(filled({1, 1, 1, 2}, {30.0, -30.0}));
  CHECK(t.value(t.sigmoid(big)).data[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.value(t.tanh(big)).data[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("maxpool2") {
  Tape<double> t;
  SUBCASE("single window takes the max") {
    const ValueId x = t.input(filled({1, 1, 2, 2}, {1, 2, 3, 4}));
    CHECK(t.scalar(t.maxpool2(x)) == 4);
  }
  SUBCASE("constant image stays constant at half size") {
    Tensor<double> c(Shape{1, 2, 4, 6});
    for (auto& v : c.data) v = 3.25;
    const Tensor<double>& out = t.value(t.maxpool2(t.input(c)));
    CHECK(out.shape == Shape{1, 2, 2, 3});
    for (double v : out.data) CHECK(v == 3.25);
  }
  SUBCASE("4x4 block-structured maxima") {
    // Windows: {1,5,2,6} {3,7,4,8} {9,13,10,14} {11,15,12,16}
    const ValueId x =
        t.input(filled({1, 1, 4, 4}, {1, 5, 3, 7, 2, 6, 4, 8, 9, 13, 11, 15, 10, 14, 12, 16}));
    const Tensor<double>& out = t.value(t.maxpool2(x));
    CHECK(out.data == std::vector<double>{6, 8, 14, 16});
  }
  SUBCASE("exhaustive window scan on random input") {
    const auto x = random_tensor({2, 3, 6, 4}, 77);
    const Tensor<double>& out = t.value(t.maxpool2(t.input(x)));
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 3; ++y)
          for (int xx = 0; xx < 2; ++xx) {
            const double m = std::max(
                std::max(x.at(b, c, 2 * y, 2 * xx), x.at(b, c, 2 * y, 2 * xx + 1)),
                std::max(x.at(b, c, 2 * y + 1, 2 * xx), x.at(b, c, 2 * y + 1, 2 * xx + 1)));
            CHECK(out.at(b, c, y, xx) == m);
          }
  }
  SUBCASE("odd spatial dims rejected") {
    CHECK_THROWS_AS(t.maxpool2(t.input(random_tensor({1, 1, 3, 4}, 5))), ShapeError);
    CHECK_THROWS_AS(t.maxpool2(t.input(random_tensor({1, 1, 4, 5}, 6))), ShapeError);
  }
}

TEST_CASE("global_avg_pool") {
  Tape<double> t;
  SUBCASE("constant channel") {
    Tensor<double> c(Shape{1, 2, 3, 3});
    for (auto& v : c.data) v = -1.5;
    const Tensor<double>& out = t.value(t.global_avg_pool(t.input(c)));
    CHECK(out.shape == Shape{1, 2, 1, 1});
    CHECK(out.data[0] == doctest::Approx(-1.5).epsilon(1e-15));
  }
  SUBCASE("small exact mean") {
    const ValueId x = t.input(filled({1, 1, 2, 2}, {0, 2, 4, 6}));
    CHECK(t.scalar(t.global_avg_pool(x)) == doctest::Approx(3.0).epsilon(1e-15));
  }
  SUBCASE("random 5x7 channel matches the naive double loop") {
    const auto x = random_tensor({1, 1, 5, 7}, 88);
    double sum = 0;
    for (double v : x.data) sum += v;
    CHECK(t.scalar(t.global_avg_pool(t.input(x))) ==
          doctest::Approx(sum / 35.0).epsilon(1e-12));
  }
}

TEST_CASE("pixel_shuffle") {
  Tape<double> t;
  SUBCASE("r=2 on a 1x1 grid lays channels out row-major") {
    const ValueId x = t.input(filled({1, 4, 1, 1}, {10, 11, 12, 13}));
    const Tensor<double>& out = t.value(t.pixel_shuffle(x, 2));
    CHECK(out.shape == Shape{1, 1, 2, 2});
    CHECK(out.data == std::vector<double>{10, 11, 12, 13});
  }
  SUBCASE("r=1 is the identity") {
    const auto x = random_tensor({2, 3, 4, 5}, 9);
    const Tensor<double>& out = t.value(t.pixel_shuffle(t.input(x), 1));
    CHECK(out.shape == x.shape);
    CHECK(out.data == x.data);
  }
  SUBCASE("stated index mapping holds everywhere") {
    const int r = 3;
    const auto x = random_tensor({2, 9 * 2, 2, 3}, 10);
    const Tensor<double>& out = t.value(t.pixel_shuffle(t.input(x), r));
    REQUIRE(out.shape == Shape{2, 2, 6, 9});
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 2; ++y)
          for (int xx = 0; xx < 3; ++xx)
            for (int dy = 0; dy < r; ++dy)
              for (int dx = 0; dx < r; ++dx)
                CHECK(out.at(b, c, r * y + dy, r * xx + dx) ==
                      x.at(b, c * r * r + dy * r + dx, y, xx));
  }
  SUBCASE("inverse permutation recovers the input exactly") {
    const int r = 2;
    const auto x = random_tensor({1, 8, 3, 2}, 21);
    const Tensor<double>& out = t.value(t.pixel_shuffle(t.input(x), r));
    Tensor<double> back(x.shape);
    for (int b = 0; b < x.shape.n; ++b)
      for (int c = 0; c < out.shape.c; ++c)
        for (int y = 0; y < x.shape.h; ++y)
          for (int xx = 0; xx < x.shape.w; ++xx)
            for (int dy = 0; dy < r; ++dy)
              for (int dx = 0; dx < r; ++dx)
                back.at(b, c * r * r + dy * r + dx, y, xx) =
                    out.at(b, c, r * y + dy, r * xx + dx);
    CHECK(back.data == x.data);
  }
  SUBCASE("channel count must divide by r^2") {
    CHECK_THROWS_AS(t.pixel_shuffle(t.input(random_tensor({1, 6, 2, 2}, 3)), 2), ShapeError);
  }
}

TEST_CASE("elementwise combine ops") {
  Tape<double> t;
  const auto a = random_tensor({1, 2, 3, 3}, 31);
  const auto b = random_tensor({1, 2, 3, 3}, 32);
  const ValueId ai = t.input(a), bi = t.input(b);
  SUBCASE("add with zeros is the identity") {
    const ValueId z = t.input(Tensor<double>(a.shape));
    CHECK(t.value(t.add(ai, z)).data == a.data);
  }
  SUBCASE("add, sub, mul match scalar arithmetic") {
    for (size_t i = 0; i < a.data.size(); ++i) {
      CHECK(t.value(t.add(ai, bi)).data[i] == a.data[i] + b.data[i]);
      CHECK(t.value(t.sub(ai, bi)).data[i] == a.data[i] - b.data[i]);
      CHECK(t.value(t.mul(ai, bi)).data[i] == a.data[i] * b.data[i]);
    }
  }
  SUBCASE("shape mismatch rejected") {
    const ValueId c = t.input(random_tensor({1, 2, 3, 4}, 33));
    CHECK_THROWS_AS(t.add(ai, c), ShapeError);
    CHECK_THROWS_AS(t.mul(ai, c), ShapeError);
  }
}

TEST_CASE("channel_concat stacks along channels") {
  Tape<double> t;
  const auto a = random_tensor({1, 2, 3, 4}, 41);
  const auto b = random_tensor({1, 3, 3, 4}, 42);
  const Tensor<double>& out = t.value(t.channel_concat(t.input(a), t.input(b)));
  CHECK(out.shape == Shape{1, 5, 3, 4});
  for (int c = 0; c < 5; ++c)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x)
        CHECK(out.at(0, c, y, x) == (c < 2 ? a.at(0, c, y, x) : b.at(0, c - 2, y, x)));
  CHECK_THROWS_AS(
      t.channel_concat(t.input(a), t.input(random_tensor({1, 2, 4, 4}, 43))), ShapeError);
}

TEST_CASE("channel_scale broadcasts per channel") {
  Tape<double> t;
  const auto x = random_tensor({2, 3, 2, 2}, 51);
  SUBCASE("scaling by ones is the identity") {
    Tensor<double> ones(Shape{2, 3, 1, 1});
    for (auto& v : ones.data) v = 1.0;
    CHECK(t.value(t.channel_scale(t.input(x), t.input(ones))).data == x.data);
  }
  SUBCASE("per-channel factors apply to every pixel") {
    const auto s = random_tensor({2, 3, 1, 1}, 52);
    const Tensor<double>& out = t.value(t.channel_scale(t.input(x), t.input(s)));
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 2; ++y)
          for (int xx = 0; xx < 2; ++xx)
            CHECK(out.at(b, c, y, xx) == x.at(b, c, y, xx) * s.at(b, c, 0, 0));
  }
  SUBCASE("scale must be (b,c,1,1)") {
    CHECK_THROWS_AS(t.channel_scale(t.input(x), t.input(random_tensor({2, 3, 2, 1}, 53))),
                    ShapeError);
  }
}

TEST_CASE("scalar helpers: affine, abs, log, clamp, reductions") {
  Tape<double> t;
  const ValueId x = t.input(filled({1, 1, 1, 4}, {-2, -0.5, 0.5, 3}));
  const Tensor<double>& aff = t.value(t.affine(x, 2.0, 1.0));
  CHECK(aff.data == std::vector<double>{-3, 0, 2, 7});
  const Tensor<double>& ab = t.value(t.abs(x));
  CHECK(ab.data == std::vector<double>{2, 0.5, 0.5, 3});
  const Tensor<double>& cl = t.value(t.clamp(x, -1.0, 1.0));
  CHECK(cl.data == std::vector<double>{-1, -0.5, 0.5, 1});
  CHECK(t.scalar(t.mean_all(x)) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(t.scalar(t.sum_all(x)) == doctest::Approx(1.0).epsilon(1e-15));
  const ValueId pos = t.input(filled({1, 1, 1, 2}, {1.0, std::exp(1.0)}));
  const Tensor<double>& lg = t.value(t.log(pos));
  CHECK(lg.data[0] == 0.0);
  CHECK(lg.data[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sub_scalar subtracts a scalar node from every element") {
  Tape<double> t;
  const auto x = random_tensor({1, 2, 2, 2}, 61);
  const ValueId m = t.mean_all(t.input(x));
  const Tensor<double>& out = t.value(t.sub_scalar(t.input(x), m));
  double mean = 0;
  for (double v : x.data) mean += v;
  mean /= static_cast<double>(x.data.size());
  for (size_t i = 0; i < x.data.size(); ++i)
    CHECK(out.data[i] == doctest::Approx(x.data[i] - mean).epsilon(1e-14));
}

TEST_CASE("forward values stay finite on finite inputs") {
  Tape<double> t;
  const auto x = random_tensor({1, 4, 4, 4}, 71, -100.0, 100.0);
  const ValueId xi = t.input(x);
  const ValueId w = t.input(random_tensor({4, 4, 3, 3}, 72, -5.0, 5.0));
  const ValueId b = t.input(random_tensor({1, 1, 1, 4}, 73));
  ValueId y = t.conv2d_same(xi, w, b);
  y = t.sigmoid(y);
  y = t.maxpool2(y);
  y = t.pixel_shuffle(t.channel_concat(y, y), 2);
  CHECK(t.value(y).all_finite());
}

TEST_CASE("identical seeds give bitwise-identical forwards") {
  auto run = [] {
    Rng rng(404);
    Tape<float> t;
    Tensor<float> x(Shape{1, 2, 4, 4}), w(Shape{2, 2, 3, 3}), b(Shape{1, 1, 1, 2});
    for (auto& v : x.data) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : w.data) v = static_cast<float>(rng.uniform(-1, 1));
    const ValueId y = t.tanh(t.conv2d_same(t.input(x), t.input(w), t.input(b)));
    return t.value(y).data;
  };
  CHECK(run() == run());
}
