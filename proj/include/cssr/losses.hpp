#pragma once

#include <cstdint>
#include <vector>

#include "cssr/rng.hpp"
#include "cssr/tape.hpp"

namespace cssr {

// Loss weights and label-smoothing bounds shared across training.
struct LossWeights {
  double eta = 6e-3;     // Laplacian term weight inside the restoration loss
  double lambda = 1e-3;  // adversarial term weight inside the generator loss
  double label_alpha = 0.2;  // fake labels ~ U(0, alpha)
  double label_beta = 0.8;   // real labels ~ U(beta, 1)

  void validate() const;
};

enum class LabelKind { Real, Fake };

// Smoothed adversarial targets, one per batch element, shape (n,1,1,1).
// alpha = 0 / beta = 1 degenerate to hard labels.
template <typename S>
Tensor<S> smoothed_labels(LabelKind kind, int n, const LossWeights& w, Rng& rng);

// Mean absolute difference.
template <typename S>
ValueId l1_loss(Tape<S>& t, ValueId a, ValueId b);

// Mean absolute difference of 4-neighbor Laplacian responses
// (kernel [[0,1,0],[1,-4,1],[0,1,0]] per channel, zero padding).
template <typename S>
ValueId laplacian_loss(Tape<S>& t, ValueId a, ValueId b);

// Tape-free Laplacian filtering of a (b,c,h,w) tensor; used by evaluation.
template <typename S>
Tensor<S> laplacian_filter(const Tensor<S>& x);

// L1 plus eta-weighted Laplacian loss; drives the restoration network.
template <typename S>
ValueId restoration_loss(Tape<S>& t, ValueId sr, ValueId hr, const LossWeights& w);

// Mean binary cross-entropy of probabilities `p` (clamped to
// [1e-7, 1-1e-7]) against fixed targets.
template <typename S>
ValueId bce_loss(Tape<S>& t, ValueId p, const Tensor<S>& targets);

template <typename S>
struct AdvLabels {
  Tensor<S> real;  // targets for D(real, fake)
  Tensor<S> fake;  // targets for D(fake, real)
};

// Relativistic adversarial losses over precomputed scores. `score_real` is
// D(real, fake) = sigmoid(C(real_i) - mean C(fake)) and `score_fake` the
// mirror image. The discriminator pushes real-vs-fake scores toward the
// real-smoothed labels; the generator loss swaps the label roles so the same
// scores are pushed the opposite way.
template <typename S>
ValueId discriminator_loss(Tape<S>& t, ValueId score_real, ValueId score_fake,
                           const AdvLabels<S>& labels);

template <typename S>
ValueId generator_adv_loss(Tape<S>& t, ValueId score_real, ValueId score_fake,
                           const AdvLabels<S>& labels);

// Frozen random-weight conv stack used as the feature space for the content
// loss. Weights are fixed at construction (seeded) and never trained; they
// enter tapes as constants.
template <typename S>
struct FeatureExtractor {
  std::vector<Tensor<S>> weights;
  std::vector<Tensor<S>> biases;

  static constexpr uint64_t kDefaultSeed = 0x5eedf00dULL;

  // 5 conv3x3 layers 3->16->16->16->16->16, relu between layers.
  static FeatureExtractor create(uint64_t seed = kDefaultSeed);
  // Single 1x1 identity layer: apply(x) == x. Test hook.
  static FeatureExtractor identity();

  ValueId apply(Tape<S>& t, ValueId x) const;
};

// Pixel L1 plus feature-space L1 between generated and real images.
template <typename S>
ValueId content_loss(Tape<S>& t, ValueId generated, ValueId real,
                     const FeatureExtractor<S>& extractor);

extern template Tensor<float> smoothed_labels<float>(LabelKind, int, const LossWeights&, Rng&);
extern template Tensor<double> smoothed_labels<double>(LabelKind, int, const LossWeights&, Rng&);
extern template ValueId l1_loss<float>(Tape<float>&, ValueId, ValueId);
extern template ValueId l1_loss<double>(Tape<double>&, ValueId, ValueId);
extern template ValueId laplacian_loss<float>(Tape<float>&, ValueId, ValueId);
extern template ValueId laplacian_loss<double>(Tape<double>&, ValueId, ValueId);
extern template Tensor<float> laplacian_filter<float>(const Tensor<float>&);
extern template Tensor<double> laplacian_filter<double>(const Tensor<double>&);
extern template ValueId restoration_loss<float>(Tape<float>&, ValueId, ValueId,
                                                const LossWeights&);
extern template ValueId restoration_loss<double>(Tape<double>&, ValueId, ValueId,
                                                 const LossWeights&);
extern template ValueId bce_loss<float>(Tape<float>&, ValueId, const Tensor<float>&);
extern template ValueId bce_loss<double>(Tape<double>&, ValueId, const Tensor<double>&);
extern template ValueId discriminator_loss<float>(Tape<float>&, ValueId, ValueId,
                                                  const AdvLabels<float>&);
extern template ValueId discriminator_loss<double>(Tape<double>&, ValueId, ValueId,
                                                   const AdvLabels<double>&);
extern template ValueId generator_adv_loss<float>(Tape<float>&, ValueId, ValueId,
                                                  const AdvLabels<float>&);
extern template ValueId generator_adv_loss<double>(Tape<double>&, ValueId, ValueId,
                                                   const AdvLabels<double>&);
extern template struct FeatureExtractor<float>;
extern template struct FeatureExtractor<double>;
extern template ValueId content_loss<float>(Tape<float>&, ValueId, ValueId,
                                            const FeatureExtractor<float>&);
extern template ValueId content_loss<double>(Tape<double>&, ValueId, ValueId,
                                             const FeatureExtractor<double>&);

}  // namespace cssr
