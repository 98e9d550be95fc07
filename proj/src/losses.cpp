#include "cssr/losses.hpp"

#include <cmath>

namespace cssr {

void LossWeights::validate() const {
  if (eta < 0) throw ConfigError("loss weights: eta must be >= 0");
  if (lambda < 0) throw ConfigError("loss weights: lambda must be >= 0");
  if (label_alpha < 0 || label_alpha > 1 || label_beta < 0 || label_beta > 1)
    throw ConfigError("loss weights: label bounds must lie in [0,1]");
  if (label_alpha >= label_beta)
    throw ConfigError("loss weights: label_alpha must be < label_beta");
}

template <typename S>
Tensor<S> smoothed_labels(LabelKind kind, int n, const LossWeights& w, Rng& rng) {
  if (n < 1) throw ConfigError("smoothed_labels: batch size must be >= 1");
  Tensor<S> out(Shape{n, 1, 1, 1});
  for (int i = 0; i < n; ++i)
    out.data[i] = static_cast<S>(kind == LabelKind::Real ? rng.uniform(w.label_beta, 1.0)
                                                         : rng.uniform(0.0, w.label_alpha));
  return out;
}

template <typename S>
ValueId l1_loss(Tape<S>& t, ValueId a, ValueId b) {
  return t.mean_all(t.abs(t.sub(a, b)));
}

namespace {

// Block-diagonal conv weight applying the 4-neighbor Laplacian to each
// channel independently.
template <typename S>
Tensor<S> laplacian_weight(int channels) {
  Tensor<S> w(Shape{channels, channels, 3, 3});
  for (int c = 0; c < channels; ++c) {
    S* k = w.plane(c, c);
    k[1] = S(1);
    k[3] = S(1);
    k[4] = S(-4);
    k[5] = S(1);
    k[7] = S(1);
  }
  return w;
}

}  // namespace

template <typename S>
ValueId laplacian_loss(Tape<S>& t, ValueId a, ValueId b) {
  const int channels = t.value(a).shape.c;
  ValueId w = t.input(laplacian_weight<S>(channels));
  ValueId bias = t.input(Tensor<S>(Shape{1, channels, 1, 1}));
  ValueId fa = t.conv2d(a, w, bias, 1, 1);
  ValueId fb = t.conv2d(b, w, bias, 1, 1);
  return t.mean_all(t.abs(t.sub(fa, fb)));
}

template <typename S>
Tensor<S> laplacian_filter(const Tensor<S>& x) {
  return conv2d_plain(x, laplacian_weight<S>(x.shape.c), Tensor<S>(Shape{1, x.shape.c, 1, 1}),
                      1, 1);
}

template <typename S>
ValueId restoration_loss(Tape<S>& t, ValueId sr, ValueId hr, const LossWeights& w) {
  return t.add(l1_loss(t, sr, hr),
               t.affine(laplacian_loss(t, sr, hr), static_cast<S>(w.eta), S(0)));
}

template <typename S>
ValueId bce_loss(Tape<S>& t, ValueId p, const Tensor<S>& targets) {
  const Shape ps = t.value(p).shape;
  if (!(ps == targets.shape)) shape_fail("bce targets", targets.shape, ps.str());
  Tensor<S> complement(targets.shape);
  for (size_t i = 0; i < targets.data.size(); ++i)
    complement.data[i] = S(1) - targets.data[i];
  ValueId labels = t.input(targets);
  ValueId co_labels = t.input(std::move(complement));
  ValueId pc = t.clamp(p, static_cast<S>(1e-7), static_cast<S>(1.0 - 1e-7));
  ValueId ll = t.add(t.mul(labels, t.log(pc)),
                     t.mul(co_labels, t.log(t.affine(pc, S(-1), S(1)))));
  return t.affine(t.mean_all(ll), S(-1), S(0));
}

template <typename S>
ValueId discriminator_loss(Tape<S>& t, ValueId score_real, ValueId score_fake,
                           const AdvLabels<S>& labels) {
  return t.add(bce_loss(t, score_real, labels.real), bce_loss(t, score_fake, labels.fake));
}

template <typename S>
ValueId generator_adv_loss(Tape<S>& t, ValueId score_real, ValueId score_fake,
                           const AdvLabels<S>& labels) {
  // Same scores, label roles swapped: the generator wants real-vs-fake scores
  // pulled toward the fake targets and vice versa.
  return t.add(bce_loss(t, score_real, labels.fake), bce_loss(t, score_fake, labels.real));
}

template <typename S>
FeatureExtractor<S> FeatureExtractor<S>::create(uint64_t seed) {
  FeatureExtractor e;
  Rng rng(seed);
  const int layers = 5, width = 16;
  int in_ch = 3;
  for (int l = 0; l < layers; ++l) {
    Tensor<S> w(Shape{width, in_ch, 3, 3});
    const double bound = std::sqrt(1.0 / (in_ch * 9));
    for (auto& v : w.data) v = static_cast<S>(rng.uniform(-bound, bound));
    e.weights.push_back(std::move(w));
    e.biases.emplace_back(Shape{1, width, 1, 1});
    in_ch = width;
  }
  return e;
}

template <typename S>
FeatureExtractor<S> FeatureExtractor<S>::identity() {
  FeatureExtractor e;
  Tensor<S> w(Shape{3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) w.at(c, c, 0, 0) = S(1);
  e.weights.push_back(std::move(w));
  e.biases.emplace_back(Shape{1, 3, 1, 1});
  return e;
}

template <typename S>
ValueId FeatureExtractor<S>::apply(Tape<S>& t, ValueId x) const {
  ValueId cur = x;
  for (size_t l = 0; l < weights.size(); ++l) {
    if (l > 0) cur = t.relu(cur);
    cur = t.conv2d_same(cur, t.input(weights[l]), t.input(biases[l]));
  }
  return cur;
}

template <typename S>
ValueId content_loss(Tape<S>& t, ValueId generated, ValueId real,
                     const FeatureExtractor<S>& extractor) {
  ValueId pixel = l1_loss(t, generated, real);
  ValueId feature = l1_loss(t, extractor.apply(t, generated), extractor.apply(t, real));
  return t.add(pixel, feature);
}

template Tensor<float> smoothed_labels<float>(LabelKind, int, const LossWeights&, Rng&);
template Tensor<double> smoothed_labels<double>(LabelKind, int, const LossWeights&, Rng&);
template ValueId l1_loss<float>(Tape<float>&, ValueId, ValueId);
template ValueId l1_loss<double>(Tape<double>&, ValueId, ValueId);
template ValueId laplacian_loss<float>(Tape<float>&, ValueId, ValueId);
template ValueId laplacian_loss<double>(Tape<double>&, ValueId, ValueId);
template Tensor<float> laplacian_filter<float>(const Tensor<float>&);
template Tensor<double> laplacian_filter<double>(const Tensor<double>&);
template ValueId restoration_loss<float>(Tape<float>&, ValueId, ValueId, const LossWeights&);
template ValueId restoration_loss<double>(Tape<double>&, ValueId, ValueId, const LossWeights&);
template ValueId bce_loss<float>(Tape<float>&, ValueId, const Tensor<float>&);
template ValueId bce_loss<double>(Tape<double>&, ValueId, const Tensor<double>&);
template ValueId discriminator_loss<float>(Tape<float>&, ValueId, ValueId,
                                           const AdvLabels<float>&);
template ValueId discriminator_loss<double>(Tape<double>&, ValueId, ValueId,
                                            const AdvLabels<double>&);
template ValueId generator_adv_loss<float>(Tape<float>&, ValueId, ValueId,
                                           const AdvLabels<float>&);
template ValueId generator_adv_loss<double>(Tape<double>&, ValueId, ValueId,
                                            const AdvLabels<double>&);
template struct FeatureExtractor<float>;
template struct FeatureExtractor<double>;
template ValueId content_loss<float>(Tape<float>&, ValueId, ValueId,
                                     const FeatureExtractor<float>&);
template ValueId content_loss<double>(Tape<double>&, ValueId, ValueId,
                                      const FeatureExtractor<double>&);

}  // namespace cssr
