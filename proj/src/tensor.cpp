#include "cssr/tensor.hpp"

#include <cmath>
#include <sstream>

namespace cssr {

std::string Shape::str() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

template <typename S>
bool Tensor<S>::all_finite() const {
  for (const S& v : data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

void shape_fail(const std::string& what, const Shape& got, const std::string& expected) {
  throw ShapeError(what + ": got " + got.str() + ", expected " + expected);
}

template struct Tensor<float>;
template struct Tensor<double>;

}  // namespace cssr
