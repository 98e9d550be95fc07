#include "cssr/tape.hpp"

#include <cmath>
#include <utility>

namespace cssr {

namespace {

// Valid output-column range [ox0, ox1) for one kernel column kx, so the inner
// loops below never branch on bounds: input column ix = ox + kx - pad_w must
// satisfy 0 <= ix < in_w.
inline void col_range(int out_w, int in_w, int kx, int pad_w, int& ox0, int& ox1) {
  ox0 = pad_w - kx;
  if (ox0 < 0) ox0 = 0;
  ox1 = in_w + pad_w - kx;
  if (ox1 > out_w) ox1 = out_w;
}

}  // namespace

template <typename S>
Tensor<S> conv2d_plain(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias,
                       int pad_h, int pad_w) {
  const Shape xs = x.shape, ws = w.shape;
  if (xs.c != ws.c)
    shape_fail("conv2d input channels", xs, "in_ch=" + std::to_string(ws.c));
  if (bias.shape.numel() != ws.n)
    shape_fail("conv2d bias", bias.shape, "1x" + std::to_string(ws.n) + "x1x1");
  if (pad_h < 0 || pad_w < 0)
    throw ConfigError("conv2d: negative padding");
  const int out_h = xs.h + 2 * pad_h - ws.h + 1;
  const int out_w = xs.w + 2 * pad_w - ws.w + 1;
  if (out_h < 1 || out_w < 1)
    shape_fail("conv2d kernel larger than padded input", xs,
               "spatial >= " + std::to_string(ws.h - 2 * pad_h) + "x" +
                   std::to_string(ws.w - 2 * pad_w));

  Tensor<S> out(Shape{xs.n, ws.n, out_h, out_w});
  for (int b = 0; b < xs.n; ++b) {
    for (int oc = 0; oc < ws.n; ++oc) {
      S* out_plane = out.plane(b, oc);
      const S bv = bias.data[oc];
      for (long long i = 0; i < static_cast<long long>(out_h) * out_w; ++i) out_plane[i] = bv;
      for (int ic = 0; ic < ws.c; ++ic) {
        const S* in_plane = x.plane(b, ic);
        const S* kernel = w.plane(oc, ic);
        for (int ky = 0; ky < ws.h; ++ky) {
          for (int kx = 0; kx < ws.w; ++kx) {
            const S wv = kernel[ky * ws.w + kx];
            int ox0, ox1;
            col_range(out_w, xs.w, kx, pad_w, ox0, ox1);
            for (int oy = 0; oy < out_h; ++oy) {
              const int iy = oy + ky - pad_h;
              if (iy < 0 || iy >= xs.h) continue;
              const S* in_row = in_plane + static_cast<long long>(iy) * xs.w + ox0 + kx - pad_w;
              S* out_row = out_plane + static_cast<long long>(oy) * out_w + ox0;
              for (int i = 0; i < ox1 - ox0; ++i) out_row[i] += wv * in_row[i];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename S>
ValueId Tape<S>::push(Node n) {
  nodes_.push_back(std::move(n));
  return ValueId{static_cast<int>(nodes_.size()) - 1};
}

template <typename S>
const typename Tape<S>::Node& Tape<S>::node(ValueId id) const {
  if (!id.valid() || id.idx >= static_cast<int>(nodes_.size()))
    throw ShapeError("tape: invalid value handle");
  return nodes_[id.idx];
}

template <typename S>
ValueId Tape<S>::input(Tensor<S> value) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::param(Parameter<S>& p) {
  Node n;
  n.op = Op::Param;
  n.value = p.value;
  n.bound = &p;
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::conv2d(ValueId x, ValueId w, ValueId bias, int pad_h, int pad_w) {
  Node n;
  n.op = Op::Conv2d;
  n.in = {x.idx, w.idx, bias.idx};
  n.i0 = pad_h;
  n.i1 = pad_w;
  n.value = conv2d_plain(node(x).value, node(w).value, node(bias).value, pad_h, pad_w);
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::conv2d_same(ValueId x, ValueId w, ValueId bias) {
  const Shape ws = node(w).value.shape;
  if (ws.h % 2 == 0 || ws.w % 2 == 0)
    throw ConfigError("conv2d_same: even kernel " + std::to_string(ws.h) + "x" +
                      std::to_string(ws.w) + " cannot preserve spatial size");
  return conv2d(x, w, bias, (ws.h - 1) / 2, (ws.w - 1) / 2);
}

template <typename S>
ValueId Tape<S>::activation(ValueId x, Activation kind) {
  Node n;
  n.in = {x.idx, -1, -1};
  const Tensor<S>& xv = node(x).value;
  n.value = Tensor<S>(xv.shape);
  switch (kind) {
    case Activation::Relu:
      n.op = Op::Relu;
      for (size_t i = 0; i < xv.data.size(); ++i)
        n.value.data[i] = xv.data[i] > S(0) ? xv.data[i] : S(0);
      break;
    case Activation::Sigmoid:
      n.op = Op::Sigmoid;
      for (size_t i = 0; i < xv.data.size(); ++i)
        n.value.data[i] = S(1) / (S(1) + std::exp(-xv.data[i]));
      break;
    case Activation::Tanh:
      n.op = Op::Tanh;
      for (size_t i = 0; i < xv.data.size(); ++i) n.value.data[i] = std::tanh(xv.data[i]);
      break;
  }
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::maxpool2(ValueId x) {
  const Tensor<S>& xv = node(x).value;
  const Shape xs = xv.shape;
  if (xs.h % 2 != 0 || xs.w % 2 != 0)
    shape_fail("maxpool2 requires even spatial dims", xs, "even h and w");
  Node n;
  n.op = Op::MaxPool2;
  n.in = {x.idx, -1, -1};
  n.value = Tensor<S>(Shape{xs.n, xs.c, xs.h / 2, xs.w / 2});
  n.argmax.resize(static_cast<size_t>(n.value.shape.numel()));
  long long o = 0;
  for (int b = 0; b < xs.n; ++b)
    for (int c = 0; c < xs.c; ++c) {
      const S* in_plane = xv.plane(b, c);
      for (int oy = 0; oy < xs.h / 2; ++oy)
        for (int ox = 0; ox < xs.w / 2; ++ox) {
          // Ties go to the first element in row-major window order.
          long long base = static_cast<long long>(2 * oy) * xs.w + 2 * ox;
          long long best = base;
          S bv = in_plane[base];
          const long long cand[3] = {base + 1, base + xs.w, base + xs.w + 1};
          for (long long ci : cand)
            if (in_plane[ci] > bv) {
              bv = in_plane[ci];
              best = ci;
            }
          n.value.data[o] = bv;
          n.argmax[o] = static_cast<int>(best);
          ++o;
        }
    }
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::global_avg_pool(ValueId x) {
  const Tensor<S>& xv = node(x).value;
  const Shape xs = xv.shape;
  Node n;
  n.op = Op::GlobalAvgPool;
  n.in = {x.idx, -1, -1};
  n.value = Tensor<S>(Shape{xs.n, xs.c, 1, 1});
  const long long plane = static_cast<long long>(xs.h) * xs.w;
  for (int b = 0; b < xs.n; ++b)
    for (int c = 0; c < xs.c; ++c) {
      const S* p = xv.plane(b, c);
      S acc = S(0);
      for (long long i = 0; i < plane; ++i) acc += p[i];
      n.value.at(b, c, 0, 0) = acc / static_cast<S>(plane);
    }
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::pixel_shuffle(ValueId x, int r) {
  const Tensor<S>& xv = node(x).value;
  const Shape xs = xv.shape;
  if (r < 1) throw ConfigError("pixel_shuffle: factor must be >= 1");
  if (xs.c % (r * r) != 0)
    shape_fail("pixel_shuffle channels not divisible by r^2", xs,
               "c divisible by " + std::to_string(r * r));
  Node n;
  n.op = Op::PixelShuffle;
  n.in = {x.idx, -1, -1};
  n.i0 = r;
  const int oc = xs.c / (r * r);
  n.value = Tensor<S>(Shape{xs.n, oc, xs.h * r, xs.w * r});
  for (int b = 0; b < xs.n; ++b)
    for (int c = 0; c < oc; ++c)
      for (int dy = 0; dy < r; ++dy)
        for (int dx = 0; dx < r; ++dx) {
          const S* in_plane = xv.plane(b, c * r * r + dy * r + dx);
          for (int y = 0; y < xs.h; ++y)
            for (int x2 = 0; x2 < xs.w; ++x2)
              n.value.at(b, c, r * y + dy, r * x2 + dx) = in_plane[y * xs.w + x2];
        }
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::add(ValueId a, ValueId b) {
  const Tensor<S>& av = node(a).value;
  const Tensor<S>& bv = node(b).value;
  if (!(av.shape == bv.shape)) shape_fail("add operands", bv.shape, av.shape.str());
  Node n;
  n.op = Op::Add;
  n.in = {a.idx, b.idx, -1};
  n.value = Tensor<S>(av.shape);
  for (size_t i = 0; i < av.data.size(); ++i) n.value.data[i] = av.data[i] + bv.data[i];
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::sub(ValueId a, ValueId b) {
  const Tensor<S>& av = node(a).value;
  const Tensor<S>& bv = node(b).value;
  if (!(av.shape == bv.shape)) shape_fail("sub operands", bv.shape, av.shape.str());
  Node n;
  n.op = Op::Sub;
  n.in = {a.idx, b.idx, -1};
  n.value = Tensor<S>(av.shape);
  for (size_t i = 0; i < av.data.size(); ++i) n.value.data[i] = av.data[i] - bv.data[i];
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::mul(ValueId a, ValueId b) {
  const Tensor<S>& av = node(a).value;
  const Tensor<S>& bv = node(b).value;
  if (!(av.shape == bv.shape)) shape_fail("mul operands", bv.shape, av.shape.str());
  Node n;
  n.op = Op::Mul;
  n.in = {a.idx, b.idx, -1};
  n.value = Tensor<S>(av.shape);
  for (size_t i = 0; i < av.data.size(); ++i) n.value.data[i] = av.data[i] * bv.data[i];
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::channel_concat(ValueId a, ValueId b) {
  const Tensor<S>& av = node(a).value;
  const Tensor<S>& bv = node(b).value;
  if (av.shape.n != bv.shape.n || av.shape.h != bv.shape.h || av.shape.w != bv.shape.w)
    shape_fail("channel_concat operands", bv.shape,
               "n/h/w matching " + av.shape.str());
  Node n;
  n.op = Op::ChannelConcat;
  n.in = {a.idx, b.idx, -1};
  n.i0 = av.shape.c;  // split point for backward
  n.value = Tensor<S>(Shape{av.shape.n, av.shape.c + bv.shape.c, av.shape.h, av.shape.w});
  for (int bb = 0; bb < av.shape.n; ++bb) {
    for (int c = 0; c < av.shape.c; ++c)
      std::copy(av.plane(bb, c), av.plane(bb, c) + static_cast<long long>(av.shape.h) * av.shape.w,
                n.value.plane(bb, c));
    for (int c = 0; c < bv.shape.c; ++c)
      std::copy(bv.plane(bb, c), bv.plane(bb, c) + static_cast<long long>(bv.shape.h) * bv.shape.w,
                n.value.plane(bb, av.shape.c + c));
  }
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::channel_scale(ValueId x, ValueId s) {
  const Tensor<S>& xv = node(x).value;
  const Tensor<S>& sv = node(s).value;
  if (sv.shape.n != xv.shape.n || sv.shape.c != xv.shape.c || sv.shape.h != 1 || sv.shape.w != 1)
    shape_fail("channel_scale weights", sv.shape,
               std::to_string(xv.shape.n) + "x" + std::to_string(xv.shape.c) + "x1x1");
  Node n;
  n.op = Op::ChannelScale;
  n.in = {x.idx, s.idx, -1};
  n.value = Tensor<S>(xv.shape);
  const long long plane = static_cast<long long>(xv.shape.h) * xv.shape.w;
  for (int b = 0; b < xv.shape.n; ++b)
    for (int c = 0; c < xv.shape.c; ++c) {
      const S sc = sv.at(b, c, 0, 0);
      const S* in_plane = xv.plane(b, c);
      S* out_plane = n.value.plane(b, c);
      for (long long i = 0; i < plane; ++i) out_plane[i] = sc * in_plane[i];
    }
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::combine(const std::vector<ValueId>& xs, CombineKind kind) {
  if (xs.empty()) throw ConfigError("combine: no inputs");
  switch (kind) {
    case CombineKind::Add: {
      ValueId acc = xs[0];
      for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
      return acc;
    }
    case CombineKind::ChannelConcat: {
      ValueId acc = xs[0];
      for (size_t i = 1; i < xs.size(); ++i) acc = channel_concat(acc, xs[i]);
      return acc;
    }
    case CombineKind::ChannelScale:
      if (xs.size() != 2) throw ConfigError("combine: channel_scale takes exactly 2 inputs");
      return channel_scale(xs[0], xs[1]);
  }
  throw ConfigError("combine: unknown kind");
}

template <typename S>
ValueId Tape<S>::affine(ValueId x, S mul, S add) {
  const Tensor<S>& xv = node(x).value;
  Node n;
  n.op = Op::Affine;
  n.in = {x.idx, -1, -1};
  n.s0 = mul;
  n.s1 = add;
  n.value = Tensor<S>(xv.shape);
  for (size_t i = 0; i < xv.data.size(); ++i) n.value.data[i] = mul * xv.data[i] + add;
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::abs(ValueId x) {
  const Tensor<S>& xv = node(x).value;
  Node n;
  n.op = Op::Abs;
  n.in = {x.idx, -1, -1};
  n.value = Tensor<S>(xv.shape);
  for (size_t i = 0; i < xv.data.size(); ++i) n.value.data[i] = std::fabs(xv.data[i]);
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::log(ValueId x) {
  const Tensor<S>& xv = node(x).value;
  Node n;
  n.op = Op::Log;
  n.in = {x.idx, -1, -1};
  n.value = Tensor<S>(xv.shape);
  for (size_t i = 0; i < xv.data.size(); ++i) n.value.data[i] = std::log(xv.data[i]);
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::clamp(ValueId x, S lo, S hi) {
  if (!(lo < hi)) throw ConfigError("clamp: lo must be < hi");
  const Tensor<S>& xv = node(x).value;
  Node n;
  n.op = Op::Clamp;
  n.in = {x.idx, -1, -1};
  n.s0 = lo;
  n.s1 = hi;
  n.value = Tensor<S>(xv.shape);
  for (size_t i = 0; i < xv.data.size(); ++i)
    n.value.data[i] = xv.data[i] < lo ? lo : (xv.data[i] > hi ? hi : xv.data[i]);
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::mean_all(ValueId x) {
  const Tensor<S>& xv = node(x).value;
  Node n;
  n.op = Op::MeanAll;
  n.in = {x.idx, -1, -1};
  n.value = Tensor<S>(Shape{1, 1, 1, 1});
  S acc = S(0);
  for (const S& v : xv.data) acc += v;
  n.value.data[0] = acc / static_cast<S>(xv.data.size());
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::sum_all(ValueId x) {
  const Tensor<S>& xv = node(x).value;
  Node n;
  n.op = Op::SumAll;
  n.in = {x.idx, -1, -1};
  n.value = Tensor<S>(Shape{1, 1, 1, 1});
  S acc = S(0);
  for (const S& v : xv.data) acc += v;
  n.value.data[0] = acc;
  return push(std::move(n));
}

template <typename S>
ValueId Tape<S>::sub_scalar(ValueId x, ValueId s) {
  const Tensor<S>& xv = node(x).value;
  const Tensor<S>& sv = node(s).value;
  if (sv.shape.numel() != 1)
    shape_fail("sub_scalar subtrahend", sv.shape, "1x1x1x1");
  Node n;
  n.op = Op::SubScalar;
  n.in = {x.idx, s.idx, -1};
  n.value = Tensor<S>(xv.shape);
  const S sc = sv.data[0];
  for (size_t i = 0; i < xv.data.size(); ++i) n.value.data[i] = xv.data[i] - sc;
  return push(std::move(n));
}

template <typename S>
const Tensor<S>& Tape<S>::value(ValueId id) const {
  return node(id).value;
}

template <typename S>
S Tape<S>::scalar(ValueId id) const {
  const Tensor<S>& v = node(id).value;
  if (v.shape.numel() != 1) shape_fail("scalar() on multi-element node", v.shape, "1x1x1x1");
  return v.data[0];
}

template <typename S>
const Tensor<S>& Tape<S>::grad(ValueId id) const {
  const Node& n = node(id);
  if (n.grad.data.empty()) throw ShapeError("tape: grad read before backward()");
  return n.grad;
}

template <typename S>
void Tape<S>::backward(ValueId loss) {
  const Node& ln = node(loss);
  if (ln.value.shape.numel() != 1)
    shape_fail("backward requires a scalar loss", ln.value.shape, "1x1x1x1");
  for (int i = 0; i <= loss.idx; ++i) nodes_[i].grad = Tensor<S>(nodes_[i].value.shape);
  nodes_[loss.idx].grad.data[0] = S(1);
  for (int i = loss.idx; i >= 0; --i) backward_node(i);
  for (int i = 0; i <= loss.idx; ++i) {
    Node& n = nodes_[i];
    if (n.op == Op::Param && n.bound != nullptr)
      for (size_t k = 0; k < n.grad.data.size(); ++k) n.bound->grad.data[k] += n.grad.data[k];
  }
}

template <typename S>
void Tape<S>::backward_node(int i) {
  Node& n = nodes_[i];
  const Tensor<S>& g = n.grad;
  switch (n.op) {
    case Op::Input:
    case Op::Param:
      return;
    case Op::Conv2d: {
      Node& xn = nodes_[n.in[0]];
      Node& wn = nodes_[n.in[1]];
      Node& bn = nodes_[n.in[2]];
      const Shape xs = xn.value.shape, ws = wn.value.shape, os = n.value.shape;
      const int pad_h = n.i0, pad_w = n.i1;
      for (int b = 0; b < xs.n; ++b) {
        for (int oc = 0; oc < ws.n; ++oc) {
          const S* g_plane = g.plane(b, oc);
          // d/d bias: sum of output grads over batch and space.
          S bacc = S(0);
          for (long long k = 0; k < static_cast<long long>(os.h) * os.w; ++k) bacc += g_plane[k];
          bn.grad.data[oc] += bacc;
          for (int ic = 0; ic < ws.c; ++ic) {
            const S* x_plane = xn.value.plane(b, ic);
            S* gx_plane = xn.grad.plane(b, ic);
            const S* kernel = wn.value.plane(oc, ic);
            S* gk = wn.grad.plane(oc, ic);
            for (int ky = 0; ky < ws.h; ++ky) {
              for (int kx = 0; kx < ws.w; ++kx) {
                const S wv = kernel[ky * ws.w + kx];
                int ox0, ox1;
                col_range(os.w, xs.w, kx, pad_w, ox0, ox1);
                S wacc = S(0);
                for (int oy = 0; oy < os.h; ++oy) {
                  const int iy = oy + ky - pad_h;
                  if (iy < 0 || iy >= xs.h) continue;
                  const long long in_off = static_cast<long long>(iy) * xs.w + ox0 + kx - pad_w;
                  const S* g_row = g_plane + static_cast<long long>(oy) * os.w + ox0;
                  const S* x_row = x_plane + in_off;
                  S* gx_row = gx_plane + in_off;
                  const int len = ox1 - ox0;
                  // d/d x: scatter wv * g; d/d w: dot of g with x.
                  for (int t = 0; t < len; ++t) gx_row[t] += wv * g_row[t];
                  for (int t = 0; t < len; ++t) wacc += g_row[t] * x_row[t];
                }
                gk[ky * ws.w + kx] += wacc;
              }
            }
          }
        }
      }
      return;
    }
    case Op::Relu: {
      Node& xn = nodes_[n.in[0]];
      for (size_t k = 0; k < g.data.size(); ++k)
        if (xn.value.data[k] > S(0)) xn.grad.data[k] += g.data[k];
      return;
    }
    case Op::Sigmoid: {
      Node& xn = nodes_[n.in[0]];
      for (size_t k = 0; k < g.data.size(); ++k) {
        const S y = n.value.data[k];
        xn.grad.data[k] += g.data[k] * y * (S(1) - y);
      }
      return;
    }
    case Op::Tanh: {
      Node& xn = nodes_[n.in[0]];
      for (size_t k = 0; k < g.data.size(); ++k) {
        const S y = n.value.data[k];
        xn.grad.data[k] += g.data[k] * (S(1) - y * y);
      }
      return;
    }
    case Op::MaxPool2: {
      Node& xn = nodes_[n.in[0]];
      const Shape os = n.value.shape;
      const long long plane = static_cast<long long>(os.h) * os.w;
      long long o = 0;
      for (int b = 0; b < os.n; ++b)
        for (int c = 0; c < os.c; ++c) {
          S* gx_plane = xn.grad.plane(b, c);
          const S* g_plane = g.plane(b, c);
          for (long long k = 0; k < plane; ++k, ++o) gx_plane[n.argmax[o]] += g_plane[k];
        }
      return;
    }
    case Op::GlobalAvgPool: {
      Node& xn = nodes_[n.in[0]];
      const Shape xs = xn.value.shape;
      const long long plane = static_cast<long long>(xs.h) * xs.w;
      for (int b = 0; b < xs.n; ++b)
        for (int c = 0; c < xs.c; ++c) {
          const S gv = g.at(b, c, 0, 0) / static_cast<S>(plane);
          S* gx_plane = xn.grad.plane(b, c);
          for (long long k = 0; k < plane; ++k) gx_plane[k] += gv;
        }
      return;
    }
    case Op::PixelShuffle: {
      Node& xn = nodes_[n.in[0]];
      const Shape xs = xn.value.shape;
      const int r = n.i0;
      const int oc = xs.c / (r * r);
      for (int b = 0; b < xs.n; ++b)
        for (int c = 0; c < oc; ++c)
          for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
              S* gx_plane = xn.grad.plane(b, c * r * r + dy * r + dx);
              for (int y = 0; y < xs.h; ++y)
                for (int x2 = 0; x2 < xs.w; ++x2)
                  gx_plane[y * xs.w + x2] += g.at(b, c, r * y + dy, r * x2 + dx);
            }
      return;
    }
    case Op::Add: {
      Node& an = nodes_[n.in[0]];
      Node& bn = nodes_[n.in[1]];
      for (size_t k = 0; k < g.data.size(); ++k) {
        an.grad.data[k] += g.data[k];
        bn.grad.data[k] += g.data[k];
      }
      return;
    }
    case Op::Sub: {
      Node& an = nodes_[n.in[0]];
      Node& bn = nodes_[n.in[1]];
      for (size_t k = 0; k < g.data.size(); ++k) {
        an.grad.data[k] += g.data[k];
        bn.grad.data[k] -= g.data[k];
      }
      return;
    }
    case Op::Mul: {
      Node& an = nodes_[n.in[0]];
      Node& bn = nodes_[n.in[1]];
      for (size_t k = 0; k < g.data.size(); ++k) {
        an.grad.data[k] += g.data[k] * bn.value.data[k];
        bn.grad.data[k] += g.data[k] * an.value.data[k];
      }
      return;
    }
    case Op::ChannelConcat: {
      Node& an = nodes_[n.in[0]];
      Node& bn = nodes_[n.in[1]];
      const Shape as = an.value.shape, bs = bn.value.shape;
      const long long plane = static_cast<long long>(as.h) * as.w;
      for (int b = 0; b < as.n; ++b) {
        for (int c = 0; c < as.c; ++c) {
          const S* g_plane = g.plane(b, c);
          S* ga = an.grad.plane(b, c);
          for (long long k = 0; k < plane; ++k) ga[k] += g_plane[k];
        }
        for (int c = 0; c < bs.c; ++c) {
          const S* g_plane = g.plane(b, as.c + c);
          S* gb = bn.grad.plane(b, c);
          for (long long k = 0; k < plane; ++k) gb[k] += g_plane[k];
        }
      }
      return;
    }
    case Op::ChannelScale: {
      Node& xn = nodes_[n.in[0]];
      Node& sn = nodes_[n.in[1]];
      const Shape xs = xn.value.shape;
      const long long plane = static_cast<long long>(xs.h) * xs.w;
      for (int b = 0; b < xs.n; ++b)
        for (int c = 0; c < xs.c; ++c) {
          const S sc = sn.value.at(b, c, 0, 0);
          const S* g_plane = g.plane(b, c);
          const S* x_plane = xn.value.plane(b, c);
          S* gx = xn.grad.plane(b, c);
          S sacc = S(0);
          for (long long k = 0; k < plane; ++k) {
            gx[k] += sc * g_plane[k];
            sacc += g_plane[k] * x_plane[k];
          }
          sn.grad.at(b, c, 0, 0) += sacc;
        }
      return;
    }
    case Op::Affine: {
      Node& xn = nodes_[n.in[0]];
      for (size_t k = 0; k < g.data.size(); ++k) xn.grad.data[k] += n.s0 * g.data[k];
      return;
    }
    case Op::Abs: {
      Node& xn = nodes_[n.in[0]];
      for (size_t k = 0; k < g.data.size(); ++k) {
        const S x = xn.value.data[k];
        if (x > S(0))
          xn.grad.data[k] += g.data[k];
        else if (x < S(0))
          xn.grad.data[k] -= g.data[k];
      }
      return;
    }
    case Op::Log: {
      Node& xn = nodes_[n.in[0]];
      for (size_t k = 0; k < g.data.size(); ++k) xn.grad.data[k] += g.data[k] / xn.value.data[k];
      return;
    }
    case Op::Clamp: {
      Node& xn = nodes_[n.in[0]];
      for (size_t k = 0; k < g.data.size(); ++k) {
        const S x = xn.value.data[k];
        if (x > n.s0 && x < n.s1) xn.grad.data[k] += g.data[k];
      }
      return;
    }
    case Op::MeanAll: {
      Node& xn = nodes_[n.in[0]];
      const S gv = g.data[0] / static_cast<S>(xn.value.data.size());
      for (size_t k = 0; k < xn.grad.data.size(); ++k) xn.grad.data[k] += gv;
      return;
    }
    case Op::SumAll: {
      Node& xn = nodes_[n.in[0]];
      const S gv = g.data[0];
      for (size_t k = 0; k < xn.grad.data.size(); ++k) xn.grad.data[k] += gv;
      return;
    }
    case Op::SubScalar: {
      Node& xn = nodes_[n.in[0]];
      Node& sn = nodes_[n.in[1]];
      S sacc = S(0);
      for (size_t k = 0; k < g.data.size(); ++k) {
        xn.grad.data[k] += g.data[k];
        sacc += g.data[k];
      }
      sn.grad.data[0] -= sacc;
      return;
    }
  }
}

template class Tape<float>;
template class Tape<double>;

template Tensor<float> conv2d_plain<float>(const Tensor<float>&, const Tensor<float>&,
                                           const Tensor<float>&, int, int);
template Tensor<double> conv2d_plain<double>(const Tensor<double>&, const Tensor<double>&,
                                             const Tensor<double>&, int, int);

}  // namespace cssr
