#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cssr/blocks.hpp"
#include "cssr/params.hpp"
#include "cssr/tape.hpp"

namespace cssr {

// Degradation generator configuration. The encoder has `widths.size()` groups
// (= N halvings); the decoder upsamples back until the output is `scale`
// times smaller than the input, i.e. it has N - log2(scale) stages.
struct GeneratorConfig {
  std::vector<int> widths = {64, 128, 256};
  int scale = 4;

  int groups() const { return static_cast<int>(widths.size()); }
  int upsample_stages() const;
  void validate() const;
};

// Learns to map a clean HR image to a realistically degraded LR image at
// 1/scale resolution. U-shaped: each encoder group widens via a transition
// conv when the width changes, applies two residual blocks, and halves the
// resolution; each decoder stage concatenates the encoder feature of equal
// spatial size and upsamples.
template <typename S>
struct DdganGenerator {
  GeneratorConfig cfg;
  ParamStore<S> params;
  ConvLayer<S> head;
  std::vector<std::optional<ConvLayer<S>>> transitions;  // per group
  std::vector<ResBlock<S>> enc_blocks;                   // 2 per group
  std::vector<ResBlock<S>> bottleneck;                   // 2
  std::vector<UpsampleBlock<S>> dec_ups;
  ConvLayer<S> tail;

  static DdganGenerator build(const GeneratorConfig& cfg, uint64_t seed);

  // y: (b,3,h,w) in [0,1] with h,w divisible by 2^groups; returns
  // (b,3,h/scale,w/scale) in [0,1] (sigmoid output).
  ValueId forward(Tape<S>& t, ValueId y) const;
};

// Discriminator configuration: a conv ladder that halves the input
// `widths.size()` times and then scores the final grid with two dense
// layers (realized as convolutions).
struct DiscriminatorConfig {
  int input_size = 48;
  std::vector<int> widths = {64, 128, 256};
  int dense_units = 512;

  void validate() const;
  int final_size() const;
};

template <typename S>
struct DdganDiscriminator {
  DiscriminatorConfig cfg;
  ParamStore<S> params;
  ConvLayer<S> head;
  std::vector<ConvLayer<S>> stage_convs;  // 2 per halving stage
  ConvLayer<S> dense1, dense2;

  static DdganDiscriminator build(const DiscriminatorConfig& cfg, uint64_t seed);

  // x: (b,3,input_size,input_size); returns one logit per element, (b,1,1,1).
  ValueId forward(Tape<S>& t, ValueId x) const;
};

// Relativistic probability that each target logit outscores the opposite
// class: sigmoid(target_i - mean(opposite)). Tape version for training...
ValueId relativistic_score_node(Tape<float>& t, ValueId target_logits, ValueId opposite_logits);
ValueId relativistic_score_node(Tape<double>& t, ValueId target_logits, ValueId opposite_logits);

// ...and a plain version for direct evaluation and tests.
std::vector<double> relativistic_score(const std::vector<double>& target_logits,
                                       const std::vector<double>& opposite_logits);

extern template struct DdganGenerator<float>;
extern template struct DdganGenerator<double>;
extern template struct DdganDiscriminator<float>;
extern template struct DdganDiscriminator<double>;

}  // namespace cssr
