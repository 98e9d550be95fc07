// Restoration network: preset parameter counts (frozen against an
// independent arithmetic tally), forward shapes, the zero-init identity, and
// configuration validation.

#include <string>
#include <vector>

#include "doctest.h"

#include "cssr/durcan.hpp"
#include "cssr/rng.hpp"
#include "cssr/tape.hpp"

using namespace cssr;

namespace {

Tensor<float> random_unit(Shape s, uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(s);
  for (auto& v : t.data) v = static_cast<float>(rng.uniform());
  return t;
}

}  // namespace

TEST_CASE("preset parameter counts are frozen") {
  // Independent tally: conv(i,o,k) = o*i*k*k + o; rcab = two 1x1 convs at
  // reduction 16; durb = two 3x3 plus the [large,small] pair; head/tail 3x3;
  // two 64->256 upsample convs for scale 4.
  CHECK(Durcan<float>::build(DurcanConfig::preset("durcan-6_s"), 1).params.total_parameters() ==
        1976971);
  CHECK(Durcan<float>::build(DurcanConfig::preset("durcan-6"), 1).params.total_parameters() ==
        3517067);
  CHECK(Durcan<float>::build(DurcanConfig::preset("durcan-12"), 1).params.total_parameters() ==
        5451915);
  CHECK(Durcan<float>::build(DurcanConfig::preset("durcan-18"), 1).params.total_parameters() ==
        9877131);
}

TEST_CASE("preset depths and kernel ordering") {
  CHECK(DurcanConfig::preset("durcan-6").depth() == 6);
  CHECK(DurcanConfig::preset("durcan-6_s").depth() == 6);
  CHECK(DurcanConfig::preset("durcan-12").depth() == 12);
  CHECK(DurcanConfig::preset("durcan-18").depth() == 18);
  for (const std::string& name : DurcanConfig::preset_names()) {
    const DurcanConfig cfg = DurcanConfig::preset(name);
    for (const auto& [large, small] : cfg.kernels) CHECK(large >= small);
    CHECK_NOTHROW(cfg.validate());
  }
  CHECK_THROWS_AS(DurcanConfig::preset("durcan-7"), ConfigError);
}

TEST_CASE("upsample stage count is log2(scale)") {
  DurcanConfig cfg = DurcanConfig::preset("durcan-6_s");
  cfg.scale = 4;
  CHECK(cfg.upsample_stages() == 2);
  cfg.scale = 2;
  CHECK(cfg.upsample_stages() == 1);
  cfg.scale = 8;
  CHECK(cfg.upsample_stages() == 3);
  CHECK(Durcan<float>::build(cfg, 1).ups.size() == 3);
}

TEST_CASE("config validation") {
  DurcanConfig cfg;
  cfg.kernels = {{5, 3}};
  SUBCASE("non power-of-two scale") {
    cfg.scale = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("empty kernel list") {
    cfg.kernels.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("bad reduction") {
    cfg.channels = 10;
    cfg.reduction = 3;
    CHECK_THROWS_AS(Durcan<float>::build(cfg, 1), ConfigError);
  }
}

TEST_CASE("forward maps (1,3,h,w) to (1,3,scale*h,scale*w) inside [0,1]") {
  DurcanConfig cfg;
  cfg.channels = 8;
  cfg.reduction = 4;
  cfg.scale = 4;
  cfg.kernels = {{5, 3}, {7, 5}};
  const Durcan<float> net = Durcan<float>::build(cfg, 7);
  Tape<float> t;
  const ValueId y = net.forward(t, t.input(random_unit({1, 3, 6, 5}, 70)));
  const Tensor<float>& out = t.value(y);
  CHECK(out.shape == Shape{1, 3, 24, 20});
  CHECK(out.all_finite());
  for (float v : out.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("scale 2 configuration upscales by 2") {
  DurcanConfig cfg;
  cfg.channels = 4;
  cfg.reduction = 2;
  cfg.scale = 2;
  cfg.kernels = {{3, 3}};
  const Durcan<float> net = Durcan<float>::build(cfg, 8);
  Tape<float> t;
  CHECK(t.value(net.forward(t, t.input(random_unit({2, 3, 4, 4}, 80)))).shape ==
        Shape{2, 3, 8, 8});
}

TEST_CASE("zero-initialized network emits exactly 0.5 everywhere") {
  // Every conv is zero, so the trunk, the long residual, and the tail all
  // carry zeros; tanh(0) = 0 maps back to 0.5 in image space, bitwise.
  DurcanConfig cfg;
  cfg.channels = 4;
  cfg.reduction = 2;
  cfg.scale = 2;
  cfg.kernels = {{5, 3}, {3, 3}};
  Durcan<float> net = Durcan<float>::build(cfg, 9);
  for (size_t i = 0; i < net.params.size(); ++i)
    for (auto& v : net.params[i].value.data) v = 0.0f;
  Tape<float> t;
  const Tensor<float>& out = t.value(net.forward(t, t.input(random_unit({1, 3, 5, 5}, 90))));
  for (float v : out.data) CHECK(v == 0.5f);
}

TEST_CASE("building twice with one seed is bitwise deterministic") {
  const DurcanConfig cfg = [] {
    DurcanConfig c;
    c.channels = 8;
    c.reduction = 4;
    c.scale = 2;
    c.kernels = {{7, 3}};
    return c;
  }();
  const Durcan<float> a = Durcan<float>::build(cfg, 1234);
  const Durcan<float> b = Durcan<float>::build(cfg, 1234);
  REQUIRE(a.params.size() == b.params.size());
  for (size_t i = 0; i < a.params.size(); ++i) {
    CHECK(a.params[i].name == b.params[i].name);
    CHECK(a.params[i].value.data == b.params[i].value.data);
  }
  const Durcan<float> c = Durcan<float>::build(cfg, 1235);
  CHECK(c.params[0].value.data != a.params[0].value.data);
}

TEST_CASE("parameter layout follows construction order") {
  const DurcanConfig cfg = [] {
    DurcanConfig c;
    c.channels = 4;
    c.reduction = 2;
    c.scale = 2;
    c.kernels = {{5, 3}, {3, 3}};
    return c;
  }();
  const Durcan<float> net = Durcan<float>::build(cfg, 2);
  const auto rows = net.params.breakdown();
  REQUIRE(rows.size() >= 7);
  CHECK(rows[0].first == "head");
  CHECK(rows[1].first == "rcab_front");
  CHECK(rows[2].first == "durb.0");
  CHECK(rows[3].first == "durb.1");
  CHECK(rows[4].first == "rcab_back");
  CHECK(rows[5].first == "c_ed");
  CHECK(rows[6].first == "up.0");
  CHECK(rows.back().first == "tail");
}
