#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cssr {

// Error taxonomy used across the library. The CLI maps these onto exit codes,
// so every throw site should pick the class that matches what went wrong:
//   ShapeError  - tensor/geometry dimensions violate an operation's contract
//   ConfigError - invalid configuration value or unknown key
//   IoError     - file missing, malformed, or truncated
//   NumericError- NaN/divergence, singular systems, failed estimation
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense NCHW shape. Weights reuse it as (out_ch, in_ch, kh, kw).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  bool operator==(const Shape&) const = default;

  long long numel() const {
    return static_cast<long long>(n) * c * h * w;
  }

  std::string str() const;
};

template <typename S>
struct Tensor {
  Shape shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(Shape s, S fill = S(0))
      : shape(s), data(static_cast<size_t>(s.numel()), fill) {}

  long long idx(int n, int c, int y, int x) const {
    return ((static_cast<long long>(n) * shape.c + c) * shape.h + y) * shape.w + x;
  }
  S& at(int n, int c, int y, int x) { return data[idx(n, c, y, x)]; }
  const S& at(int n, int c, int y, int x) const { return data[idx(n, c, y, x)]; }

  S* plane(int n, int c) {
    return data.data() + (static_cast<long long>(n) * shape.c + c) * shape.h * shape.w;
  }
  const S* plane(int n, int c) const {
    return data.data() + (static_cast<long long>(n) * shape.c + c) * shape.h * shape.w;
  }

  bool all_finite() const;

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }
};

// Throws ShapeError with a "<what>: got AxBxCxD, expected ..." message.
[[noreturn]] void shape_fail(const std::string& what, const Shape& got,
                             const std::string& expected);

extern template struct Tensor<float>;
extern template struct Tensor<double>;

}  // namespace cssr
