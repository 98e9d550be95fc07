#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cssr/params.hpp"
#include "cssr/tensor.hpp"

namespace cssr {

enum class Activation { Relu, Sigmoid, Tanh };
enum class CombineKind { Add, ChannelConcat, ChannelScale };

// Handle to a value living on a Tape.
struct ValueId {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Reverse-mode autodiff over dense NCHW tensors, define-by-run. Each forward
// call appends a node holding the computed value; backward() walks the nodes
// in reverse, accumulating gradients into node slots and, for Param leaves,
// into the bound Parameter's grad tensor.
//
// Conventions fixed across the library:
//   * conv2d is cross-correlation (no kernel flip), stride 1, zero padding
//   * relu subgradient at 0 is 0
//   * maxpool2 ties resolve to the first element in row-major window order
//   * saved activations stay on the tape until the tape is destroyed
template <typename S>
class Tape {
 public:
  // --- leaves -------------------------------------------------------------
  ValueId input(Tensor<S> value);               // constant, no gradient
  ValueId param(Parameter<S>& p);               // differentiable leaf

  // --- convolution ---------------------------------------------------------
  // x: (b, in_ch, h, w); w: (out_ch, in_ch, kh, kw); bias: (1, out_ch, 1, 1).
  ValueId conv2d(ValueId x, ValueId w, ValueId bias, int pad_h, int pad_w);
  // Same-padding convenience: pad = (k-1)/2 per axis; even kernels rejected.
  ValueId conv2d_same(ValueId x, ValueId w, ValueId bias);

  // --- activations ----------------------------------------------------------
  ValueId activation(ValueId x, Activation kind);
  ValueId relu(ValueId x) { return activation(x, Activation::Relu); }
  ValueId sigmoid(ValueId x) { return activation(x, Activation::Sigmoid); }
  ValueId tanh(ValueId x) { return activation(x, Activation::Tanh); }

  // --- shape movers ----------------------------------------------------------
  ValueId maxpool2(ValueId x);                  // 2x2/stride 2; even dims only
  ValueId global_avg_pool(ValueId x);           // (b,c,h,w) -> (b,c,1,1)
  // (b, c*r^2, h, w) -> (b, c, rh, rw);
  // out[b][c][r*y+dy][r*x+dx] = in[b][c*r^2 + dy*r + dx][y][x]
  ValueId pixel_shuffle(ValueId x, int r);

  // --- combining -------------------------------------------------------------
  ValueId add(ValueId a, ValueId b);            // same shape
  ValueId sub(ValueId a, ValueId b);            // same shape
  ValueId mul(ValueId a, ValueId b);            // elementwise, same shape
  ValueId channel_concat(ValueId a, ValueId b); // same (n,h,w)
  ValueId channel_scale(ValueId x, ValueId s);  // s: (b,c,1,1)
  ValueId combine(const std::vector<ValueId>& xs, CombineKind kind);

  // --- scalar-lifted elementwise ----------------------------------------------
  ValueId affine(ValueId x, S mul, S add);      // mul*x + add
  ValueId abs(ValueId x);                       // subgradient at 0 is 0
  ValueId log(ValueId x);
  ValueId clamp(ValueId x, S lo, S hi);         // gradient passes iff lo < x < hi

  // --- reductions ---------------------------------------------------------------
  ValueId mean_all(ValueId x);                  // -> (1,1,1,1)
  ValueId sum_all(ValueId x);                   // -> (1,1,1,1)
  // x - s with s a (1,1,1,1) scalar node broadcast over x.
  ValueId sub_scalar(ValueId x, ValueId s);

  // --- access ----------------------------------------------------------------
  const Tensor<S>& value(ValueId id) const;
  S scalar(ValueId id) const;                   // value of a single-element node
  const Tensor<S>& grad(ValueId id) const;      // valid after backward()

  // Accumulates d loss / d p into every bound Parameter reachable from loss.
  // loss must be a single-element node.
  void backward(ValueId loss);

  size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    Input, Param, Conv2d, Relu, Sigmoid, Tanh, MaxPool2, GlobalAvgPool,
    PixelShuffle, Add, Sub, Mul, ChannelConcat, ChannelScale, Affine, Abs,
    Log, Clamp, MeanAll, SumAll, SubScalar,
  };

  struct Node {
    Op op;
    std::array<int, 3> in = {-1, -1, -1};
    Tensor<S> value;
    Tensor<S> grad;
    int i0 = 0, i1 = 0;          // op-specific ints (padding, shuffle factor, split)
    S s0 = S(0), s1 = S(0);      // op-specific scalars (affine, clamp bounds)
    Parameter<S>* bound = nullptr;
    std::vector<int> argmax;     // maxpool2 winner indices
  };

  ValueId push(Node n);
  const Node& node(ValueId id) const;
  void backward_node(int i);

  std::vector<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

// Plain (tape-free) 2D cross-correlation used by the tape kernels and by
// code that needs filtering without gradients (loss oracles, metrics).
template <typename S>
Tensor<S> conv2d_plain(const Tensor<S>& x, const Tensor<S>& w,
                       const Tensor<S>& bias, int pad_h, int pad_w);

extern template Tensor<float> conv2d_plain<float>(const Tensor<float>&, const Tensor<float>&,
                                                  const Tensor<float>&, int, int);
extern template Tensor<double> conv2d_plain<double>(const Tensor<double>&, const Tensor<double>&,
                                                    const Tensor<double>&, int, int);

}  // namespace cssr
