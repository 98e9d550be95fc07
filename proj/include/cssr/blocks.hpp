#pragma once

#include <string>
#include <utility>

#include "cssr/params.hpp"
#include "cssr/tape.hpp"

namespace cssr {

// A convolution layer: weight + bias registered in a ParamStore, applied with
// same-padding (odd kernels) so spatial size is preserved, or explicit padding.
template <typename S>
struct ConvLayer {
  Parameter<S>* w = nullptr;
  Parameter<S>* b = nullptr;
  int pad_h = 0;
  int pad_w = 0;

  // Same-padding conv named `<name>.w` / `<name>.b`. Weights init uniform
  // +-sqrt(1/fan_in) with fan_in = in_ch*k*k, bias zero.
  static ConvLayer same(ParamStore<S>& store, const std::string& name, int in_ch,
                        int out_ch, int k, Rng& rng);
  // Explicit padding (used for the dense-as-conv discriminator head).
  static ConvLayer padded(ParamStore<S>& store, const std::string& name, int in_ch,
                          int out_ch, int kh, int kw, int pad_h, int pad_w, Rng& rng);

  ValueId apply(Tape<S>& t, ValueId x) const;
};

// conv3x3 -> relu -> conv3x3, plus identity shortcut. No normalization.
// Zero weights and biases make this an exact pass-through.
template <typename S>
struct ResBlock {
  ConvLayer<S> c1, c2;

  static ResBlock create(ParamStore<S>& store, const std::string& name, int channels,
                         Rng& rng);
  ValueId forward(Tape<S>& t, ValueId x) const;
};

// conv (in_ch -> out_ch*r^2) -> pixel_shuffle(r) -> relu. Upscales h,w by r.
template <typename S>
struct UpsampleBlock {
  ConvLayer<S> conv;
  int r = 2;

  static UpsampleBlock create(ParamStore<S>& store, const std::string& name, int in_ch,
                              int out_ch, int r, Rng& rng);
  ValueId forward(Tape<S>& t, ValueId x) const;
};

// Residual channel attention block: the per-channel attention weights are
//   sigmoid(W1 relu(W0 gap(x)))        (W0: c -> c/reduction, W1: back to c)
// realized as 1x1 convolutions, and the block output is x scaled by them.
template <typename S>
struct Rcab {
  ConvLayer<S> w0, w1;

  static Rcab create(ParamStore<S>& store, const std::string& name, int channels,
                     int reduction, Rng& rng);
  ValueId forward(Tape<S>& t, ValueId x) const;
};

// Dual residual block threading two streams (x, res):
//   x_c      = c2(relu(c1(x))) + x          two 3x3 convs
//   res_next = relu(cm(x_c)) + res          cm: kernel_large
//   x_next   = relu(cn(res_next)) + x       cn: kernel_small
// Zero weights make both streams exact pass-throughs.
template <typename S>
struct DuRB {
  ConvLayer<S> c1, c2, cm, cn;

  static DuRB create(ParamStore<S>& store, const std::string& name, int channels,
                     int kernel_large, int kernel_small, Rng& rng);
  std::pair<ValueId, ValueId> forward(Tape<S>& t, ValueId x, ValueId res) const;
};

extern template struct ConvLayer<float>;
extern template struct ConvLayer<double>;
extern template struct ResBlock<float>;
extern template struct ResBlock<double>;
extern template struct UpsampleBlock<float>;
extern template struct UpsampleBlock<double>;
extern template struct Rcab<float>;
extern template struct Rcab<double>;
extern template struct DuRB<float>;
extern template struct DuRB<double>;

}  // namespace cssr
