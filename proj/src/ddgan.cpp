#include "cssr/ddgan.hpp"

#include <cmath>

namespace cssr {

namespace {

int log2_exact(int v, const std::string& what) {
  int bits = 0, s = v;
  while (s > 1 && s % 2 == 0) {
    s /= 2;
    ++bits;
  }
  if (s != 1) throw ConfigError(what + " " + std::to_string(v) + " must be a power of two");
  return bits;
}

}  // namespace

int GeneratorConfig::upsample_stages() const {
  return groups() - log2_exact(scale, "generator scale");
}

void GeneratorConfig::validate() const {
  if (widths.empty()) throw ConfigError("generator: no encoder groups configured");
  for (int w : widths)
    if (w < 1) throw ConfigError("generator: widths must be positive");
  const int halvings = log2_exact(scale, "generator scale");
  if (groups() < halvings)
    throw ConfigError("generator: " + std::to_string(groups()) +
                      " encoder groups cannot reach 1/" + std::to_string(scale) +
                      " output resolution");
}

template <typename S>
DdganGenerator<S> DdganGenerator<S>::build(const GeneratorConfig& cfg, uint64_t seed) {
  cfg.validate();
  DdganGenerator net;
  net.cfg = cfg;
  Rng rng(seed);
  const int n = cfg.groups();
  net.head = ConvLayer<S>::same(net.params, "head", 3, cfg.widths[0], 3, rng);
  int ch = cfg.widths[0];
  for (int g = 0; g < n; ++g) {
    // Residual blocks preserve width, so width changes happen in a dedicated
    // 3x3 transition conv at the top of the group.
    if (ch != cfg.widths[g]) {
      net.transitions.push_back(ConvLayer<S>::same(
          net.params, "enc." + std::to_string(g) + ".transition", ch, cfg.widths[g], 3, rng));
      ch = cfg.widths[g];
    } else {
      net.transitions.push_back(std::nullopt);
    }
    for (int i = 0; i < 2; ++i)
      net.enc_blocks.push_back(ResBlock<S>::create(
          net.params, "enc." + std::to_string(g) + ".res" + std::to_string(i), ch, rng));
  }
  for (int i = 0; i < 2; ++i)
    net.bottleneck.push_back(
        ResBlock<S>::create(net.params, "bottleneck.res" + std::to_string(i), ch, rng));
  // Decoder stage k consumes the concat of the running feature and the
  // encoder group output of equal spatial size (group n-1-k's pooled output).
  const int stages = cfg.upsample_stages();
  for (int k = 0; k < stages; ++k) {
    const int skip_ch = cfg.widths[n - 1 - k];
    const int out_ch = (k + 1 < stages) ? cfg.widths[n - 2 - k] : cfg.widths[0];
    net.dec_ups.push_back(UpsampleBlock<S>::create(net.params, "dec." + std::to_string(k),
                                                   ch + skip_ch, out_ch, 2, rng));
    ch = out_ch;
  }
  net.tail = ConvLayer<S>::same(net.params, "tail", ch, 3, 3, rng);
  return net;
}

template <typename S>
ValueId DdganGenerator<S>::forward(Tape<S>& t, ValueId y) const {
  const Shape ys = t.value(y).shape;
  const int n = cfg.groups();
  const int div = 1 << n;
  if (ys.h % div != 0 || ys.w % div != 0)
    shape_fail("generator input spatial dims must divide by 2^groups", ys,
               "h,w divisible by " + std::to_string(div));

  ValueId cur = head.apply(t, y);
  std::vector<ValueId> pooled(n);
  for (int g = 0; g < n; ++g) {
    if (transitions[g]) cur = transitions[g]->apply(t, cur);
    cur = enc_blocks[2 * g].forward(t, cur);
    cur = enc_blocks[2 * g + 1].forward(t, cur);
    cur = t.maxpool2(cur);
    pooled[g] = cur;
  }
  for (const ResBlock<S>& rb : bottleneck) cur = rb.forward(t, cur);
  for (size_t k = 0; k < dec_ups.size(); ++k) {
    ValueId skip = pooled[n - 1 - static_cast<int>(k)];
    cur = dec_ups[k].forward(t, t.channel_concat(cur, skip));
  }
  return t.sigmoid(tail.apply(t, cur));
}

void DiscriminatorConfig::validate() const {
  if (widths.empty()) throw ConfigError("discriminator: no stages configured");
  if (dense_units < 1) throw ConfigError("discriminator: dense_units must be positive");
  const int div = 1 << static_cast<int>(widths.size());
  if (input_size < div || input_size % div != 0)
    throw ConfigError("discriminator: input size " + std::to_string(input_size) +
                      " not divisible by 2^" + std::to_string(widths.size()));
}

int DiscriminatorConfig::final_size() const {
  return input_size >> static_cast<int>(widths.size());
}

template <typename S>
DdganDiscriminator<S> DdganDiscriminator<S>::build(const DiscriminatorConfig& cfg,
                                                   uint64_t seed) {
  cfg.validate();
  DdganDiscriminator net;
  net.cfg = cfg;
  Rng rng(seed);
  net.head = ConvLayer<S>::same(net.params, "head", 3, cfg.widths[0], 3, rng);
  int ch = cfg.widths[0];
  for (size_t i = 0; i < cfg.widths.size(); ++i) {
    net.stage_convs.push_back(ConvLayer<S>::same(
        net.params, "stage." + std::to_string(i) + ".a", ch, cfg.widths[i], 3, rng));
    net.stage_convs.push_back(ConvLayer<S>::same(
        net.params, "stage." + std::to_string(i) + ".b", cfg.widths[i], cfg.widths[i], 3, rng));
    ch = cfg.widths[i];
  }
  // Dense layers as convolutions: the first consumes the full remaining grid
  // (kernel = final_size, no padding), the second is 1x1 down to one logit.
  const int fs = cfg.final_size();
  net.dense1 = ConvLayer<S>::padded(net.params, "dense1", ch, cfg.dense_units, fs, fs, 0, 0, rng);
  net.dense2 = ConvLayer<S>::padded(net.params, "dense2", cfg.dense_units, 1, 1, 1, 0, 0, rng);
  return net;
}

template <typename S>
ValueId DdganDiscriminator<S>::forward(Tape<S>& t, ValueId x) const {
  const Shape xs = t.value(x).shape;
  if (xs.c != 3 || xs.h != cfg.input_size || xs.w != cfg.input_size)
    shape_fail("discriminator input", xs,
               "bx3x" + std::to_string(cfg.input_size) + "x" + std::to_string(cfg.input_size));
  ValueId cur = t.relu(head.apply(t, x));
  for (size_t i = 0; i < cfg.widths.size(); ++i) {
    cur = t.relu(stage_convs[2 * i].apply(t, cur));
    cur = t.relu(stage_convs[2 * i + 1].apply(t, cur));
    cur = t.maxpool2(cur);
  }
  cur = t.relu(dense1.apply(t, cur));
  return dense2.apply(t, cur);
}

namespace {

template <typename S>
ValueId relativistic_score_impl(Tape<S>& t, ValueId target_logits, ValueId opposite_logits) {
  const Shape ts = t.value(target_logits).shape;
  const Shape os = t.value(opposite_logits).shape;
  if (ts.c != 1 || ts.h != 1 || ts.w != 1 || ts.n < 1)
    shape_fail("relativistic target logits", ts, "bx1x1x1");
  if (os.c != 1 || os.h != 1 || os.w != 1 || os.n < 1)
    shape_fail("relativistic opposite logits", os, "bx1x1x1");
  return t.sigmoid(t.sub_scalar(target_logits, t.mean_all(opposite_logits)));
}

}  // namespace

ValueId relativistic_score_node(Tape<float>& t, ValueId target_logits, ValueId opposite_logits) {
  return relativistic_score_impl(t, target_logits, opposite_logits);
}

ValueId relativistic_score_node(Tape<double>& t, ValueId target_logits, ValueId opposite_logits) {
  return relativistic_score_impl(t, target_logits, opposite_logits);
}

std::vector<double> relativistic_score(const std::vector<double>& target_logits,
                                       const std::vector<double>& opposite_logits) {
  if (target_logits.empty() || opposite_logits.empty())
    throw ShapeError("relativistic_score: empty logit batch");
  double mean = 0.0;
  for (double v : opposite_logits) mean += v;
  mean /= static_cast<double>(opposite_logits.size());
  std::vector<double> out(target_logits.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-(target_logits[i] - mean)));
  return out;
}

template struct DdganGenerator<float>;
template struct DdganGenerator<double>;
template struct DdganDiscriminator<float>;
template struct DdganDiscriminator<double>;

}  // namespace cssr
