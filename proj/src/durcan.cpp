#include "cssr/durcan.hpp"

namespace cssr {

namespace {

std::vector<std::pair<int, int>> repeat_schedule(
    const std::vector<std::pair<int, int>>& groups, int times) {
  std::vector<std::pair<int, int>> out;
  for (const auto& g : groups)
    for (int i = 0; i < times; ++i) out.push_back(g);
  return out;
}

}  // namespace

DurcanConfig DurcanConfig::preset(const std::string& name) {
  DurcanConfig cfg;
  if (name == "durcan-12") {
    cfg.kernels = {{5, 3}, {5, 3}, {7, 3}, {7, 5}, {11, 5}, {11, 7},
                   {11, 7}, {11, 5}, {7, 5}, {7, 3}, {5, 3}, {5, 3}};
  } else if (name == "durcan-6") {
    cfg.kernels = {{5, 3}, {7, 5}, {11, 7}, {11, 7}, {11, 5}, {7, 5}};
  } else if (name == "durcan-6_s") {
    cfg.kernels = {{3, 3}, {5, 3}, {7, 5}, {7, 5}, {7, 3}, {5, 3}};
  } else if (name == "durcan-18") {
    cfg.kernels = repeat_schedule({{5, 3}, {7, 5}}, 3);
    auto mid = repeat_schedule({{11, 7}}, 6);
    auto late = repeat_schedule({{11, 5}}, 3);
    auto end = repeat_schedule({{7, 5}}, 3);
    cfg.kernels.insert(cfg.kernels.end(), mid.begin(), mid.end());
    cfg.kernels.insert(cfg.kernels.end(), late.begin(), late.end());
    cfg.kernels.insert(cfg.kernels.end(), end.begin(), end.end());
  } else {
    throw ConfigError("unknown architecture preset '" + name +
                      "' (expected durcan-12, durcan-6, durcan-6_s, or durcan-18)");
  }
  return cfg;
}

const std::vector<std::string>& DurcanConfig::preset_names() {
  static const std::vector<std::string> names = {"durcan-6_s", "durcan-6", "durcan-12",
                                                 "durcan-18"};
  return names;
}

int DurcanConfig::upsample_stages() const {
  int s = scale, stages = 0;
  while (s > 1) {
    s /= 2;
    ++stages;
  }
  return stages;
}

void DurcanConfig::validate() const {
  if (kernels.empty()) throw ConfigError("durcan: kernel schedule is empty");
  if (channels < 1) throw ConfigError("durcan: channels must be positive");
  if (reduction < 1 || channels % reduction != 0)
    throw ConfigError("durcan: channels " + std::to_string(channels) +
                      " not divisible by reduction " + std::to_string(reduction));
  int s = scale;
  while (s > 1 && s % 2 == 0) s /= 2;
  if (s != 1) throw ConfigError("durcan: scale " + std::to_string(scale) +
                                " must be a power of two");
  for (const auto& [large, small] : kernels)
    if (large % 2 == 0 || small % 2 == 0)
      throw ConfigError("durcan: even kernel in schedule");
}

template <typename S>
Durcan<S> Durcan<S>::build(const DurcanConfig& cfg, uint64_t seed) {
  cfg.validate();
  Durcan net;
  net.cfg = cfg;
  Rng rng(seed);
  const int c = cfg.channels;
  net.head = ConvLayer<S>::same(net.params, "head", 3, c, 3, rng);
  net.rcab_front = Rcab<S>::create(net.params, "rcab_front", c, cfg.reduction, rng);
  for (int i = 0; i < cfg.depth(); ++i)
    net.durbs.push_back(DuRB<S>::create(net.params, "durb." + std::to_string(i), c,
                                        cfg.kernels[i].first, cfg.kernels[i].second, rng));
  net.rcab_back = Rcab<S>::create(net.params, "rcab_back", c, cfg.reduction, rng);
  net.c_ed = ConvLayer<S>::same(net.params, "c_ed", c, c, 3, rng);
  for (int i = 0; i < cfg.upsample_stages(); ++i)
    net.ups.push_back(
        UpsampleBlock<S>::create(net.params, "up." + std::to_string(i), c, c, 2, rng));
  net.tail = ConvLayer<S>::same(net.params, "tail", c, 3, 3, rng);
  return net;
}

template <typename S>
ValueId Durcan<S>::forward_signed(Tape<S>& t, ValueId x) const {
  ValueId features = rcab_front.forward(t, head.apply(t, x));
  // Both DuRB streams start from the same attention output; the res stream
  // carries the long skip that is added back after the stack.
  ValueId cur = features;
  ValueId res = features;
  for (const DuRB<S>& block : durbs) {
    auto [x_next, res_next] = block.forward(t, cur, res);
    cur = x_next;
    res = res_next;
  }
  ValueId merged = t.add(c_ed.apply(t, rcab_back.forward(t, cur)), res);
  for (const UpsampleBlock<S>& up : ups) merged = up.forward(t, merged);
  return t.tanh(tail.apply(t, merged));
}

template <typename S>
ValueId Durcan<S>::forward(Tape<S>& t, ValueId x) const {
  ValueId signed_in = t.affine(x, S(2), S(-1));
  ValueId signed_out = forward_signed(t, signed_in);
  return t.affine(signed_out, S(0.5), S(0.5));
}

template struct Durcan<float>;
template struct Durcan<double>;

}  // namespace cssr
