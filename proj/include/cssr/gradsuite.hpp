#pragma once

#include <string>
#include <vector>

namespace cssr {

struct GradSuiteCase {
  std::string name;
  double rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Verifies every tape operation and every composed block/network/loss against
// central finite differences at double precision. Primitive ops must agree to
// 1e-6 relative error, compositions to 1e-4. Deterministic (fixed inputs).
std::vector<GradSuiteCase> run_gradient_suite();

}  // namespace cssr
