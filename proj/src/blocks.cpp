#include "cssr/blocks.hpp"

namespace cssr {

template <typename S>
ConvLayer<S> ConvLayer<S>::same(ParamStore<S>& store, const std::string& name, int in_ch,
                                int out_ch, int k, Rng& rng) {
  if (k % 2 == 0)
    throw ConfigError("conv layer '" + name + "': even kernel " + std::to_string(k) +
                      " cannot preserve spatial size");
  return padded(store, name, in_ch, out_ch, k, k, (k - 1) / 2, (k - 1) / 2, rng);
}

template <typename S>
ConvLayer<S> ConvLayer<S>::padded(ParamStore<S>& store, const std::string& name, int in_ch,
                                  int out_ch, int kh, int kw, int pad_h, int pad_w, Rng& rng) {
  if (in_ch < 1 || out_ch < 1 || kh < 1 || kw < 1)
    throw ConfigError("conv layer '" + name + "': channels and kernel must be positive");
  ConvLayer layer;
  layer.w = &store.create(name + ".w", Shape{out_ch, in_ch, kh, kw}, in_ch * kh * kw, rng);
  layer.b = &store.create(name + ".b", Shape{1, out_ch, 1, 1}, 0, rng);
  layer.pad_h = pad_h;
  layer.pad_w = pad_w;
  return layer;
}

template <typename S>
ValueId ConvLayer<S>::apply(Tape<S>& t, ValueId x) const {
  return t.conv2d(x, t.param(*w), t.param(*b), pad_h, pad_w);
}

template <typename S>
ResBlock<S> ResBlock<S>::create(ParamStore<S>& store, const std::string& name, int channels,
                                Rng& rng) {
  ResBlock block;
  block.c1 = ConvLayer<S>::same(store, name + ".c1", channels, channels, 3, rng);
  block.c2 = ConvLayer<S>::same(store, name + ".c2", channels, channels, 3, rng);
  return block;
}

template <typename S>
ValueId ResBlock<S>::forward(Tape<S>& t, ValueId x) const {
  return t.add(c2.apply(t, t.relu(c1.apply(t, x))), x);
}

template <typename S>
UpsampleBlock<S> UpsampleBlock<S>::create(ParamStore<S>& store, const std::string& name,
                                          int in_ch, int out_ch, int r, Rng& rng) {
  if (r < 1) throw ConfigError("upsample block '" + name + "': factor must be >= 1");
  UpsampleBlock block;
  block.conv = ConvLayer<S>::same(store, name + ".conv", in_ch, out_ch * r * r, 3, rng);
  block.r = r;
  return block;
}

template <typename S>
ValueId UpsampleBlock<S>::forward(Tape<S>& t, ValueId x) const {
  return t.relu(t.pixel_shuffle(conv.apply(t, x), r));
}

template <typename S>
Rcab<S> Rcab<S>::create(ParamStore<S>& store, const std::string& name, int channels,
                        int reduction, Rng& rng) {
  if (reduction < 1 || channels % reduction != 0)
    throw ConfigError("rcab '" + name + "': channels " + std::to_string(channels) +
                      " not divisible by reduction " + std::to_string(reduction));
  Rcab block;
  block.w0 = ConvLayer<S>::same(store, name + ".w0", channels, channels / reduction, 1, rng);
  block.w1 = ConvLayer<S>::same(store, name + ".w1", channels / reduction, channels, 1, rng);
  return block;
}

template <typename S>
ValueId Rcab<S>::forward(Tape<S>& t, ValueId x) const {
  ValueId attn = t.sigmoid(w1.apply(t, t.relu(w0.apply(t, t.global_avg_pool(x)))));
  return t.channel_scale(x, attn);
}

template <typename S>
DuRB<S> DuRB<S>::create(ParamStore<S>& store, const std::string& name, int channels,
                        int kernel_large, int kernel_small, Rng& rng) {
  if (kernel_large < kernel_small)
    throw ConfigError("durb '" + name + "': kernel pair [" + std::to_string(kernel_large) +
                      "," + std::to_string(kernel_small) + "] must be ordered large,small");
  for (int k : {kernel_large, kernel_small})
    if (k != 3 && k != 5 && k != 7 && k != 11)
      throw ConfigError("durb '" + name + "': kernel " + std::to_string(k) +
                        " not in {3,5,7,11}");
  DuRB block;
  block.c1 = ConvLayer<S>::same(store, name + ".c1", channels, channels, 3, rng);
  block.c2 = ConvLayer<S>::same(store, name + ".c2", channels, channels, 3, rng);
  block.cm = ConvLayer<S>::same(store, name + ".cm", channels, channels, kernel_large, rng);
  block.cn = ConvLayer<S>::same(store, name + ".cn", channels, channels, kernel_small, rng);
  return block;
}

template <typename S>
std::pair<ValueId, ValueId> DuRB<S>::forward(Tape<S>& t, ValueId x, ValueId res) const {
  ValueId xc = t.add(c2.apply(t, t.relu(c1.apply(t, x))), x);
  ValueId res_next = t.add(t.relu(cm.apply(t, xc)), res);
  ValueId x_next = t.add(t.relu(cn.apply(t, res_next)), x);
  return {x_next, res_next};
}

template struct ConvLayer<float>;
template struct ConvLayer<double>;
template struct ResBlock<float>;
template struct ResBlock<double>;
template struct UpsampleBlock<float>;
template struct UpsampleBlock<double>;
template struct Rcab<float>;
template struct Rcab<double>;
template struct DuRB<float>;
template struct DuRB<double>;

}  // namespace cssr
