#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cssr/blocks.hpp"
#include "cssr/params.hpp"
#include "cssr/tape.hpp"

namespace cssr {

// Restoration network configuration. `kernels` lists the [large, small]
// pair for each dual residual block, in order.
struct DurcanConfig {
  int channels = 64;
  int reduction = 16;
  int scale = 4;  // power of two; realized as log2(scale) x2 upsample stages
  std::vector<std::pair<int, int>> kernels;

  // Presets: durcan-12 (default depth), durcan-6, durcan-6_s, durcan-18.
  static DurcanConfig preset(const std::string& name);
  static const std::vector<std::string>& preset_names();

  int depth() const { return static_cast<int>(kernels.size()); }
  int upsample_stages() const;
  void validate() const;
};

// DuRCAN: restores and upscales a degraded LR image.
//   head conv -> RCAB -> DuRB stack -> RCAB -> conv, plus the long residual
//   from before the stack -> upsample stages -> tail conv -> tanh.
// Input/output live in [0,1]; internally mapped to [-1,1] to match tanh.
template <typename S>
struct Durcan {
  DurcanConfig cfg;
  ParamStore<S> params;
  ConvLayer<S> head;
  Rcab<S> rcab_front, rcab_back;
  std::vector<DuRB<S>> durbs;
  ConvLayer<S> c_ed;
  std::vector<UpsampleBlock<S>> ups;
  ConvLayer<S> tail;

  static Durcan build(const DurcanConfig& cfg, uint64_t seed);

  // x: (b,3,h,w) in [0,1]; returns (b,3,h*scale,w*scale) in [0,1].
  ValueId forward(Tape<S>& t, ValueId x) const;

  // Raw network: takes/produces [-1,1] values (no I/O range mapping).
  ValueId forward_signed(Tape<S>& t, ValueId x) const;
};

extern template struct Durcan<float>;
extern template struct Durcan<double>;

}  // namespace cssr
