#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cssr/params.hpp"
#include "cssr/tape.hpp"

namespace cssr {

struct GradCheckRow {
  std::string param;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  double max_rel_err = 0.0;
  bool pass(double tolerance) const { return max_rel_err < tolerance; }
};

// Compares Tape::backward gradients against central finite differences for
// every element of every parameter in `params`. `build_loss` must construct
// the scalar loss on the given tape from the CURRENT parameter values; it is
// re-invoked ~2x per parameter element, so keep the model tiny.
//
// The reported error for a parameter is
//   max_i |analytic_i - numeric_i| / max(max_i |analytic_i|, max_i |numeric_i|, floor)
// i.e. the largest element mismatch normalized by the gradient's magnitude,
// which stays meaningful when individual entries are near zero. Run at
// double precision: central differences with h=1e-4 leave roughly 8 digits,
// which float arithmetic would eat entirely.
//
// `step` must stay below the distance from the evaluation point to the
// nearest relu/abs kink or maxpool argmax flip, or the central difference
// averages two different one-sided slopes. Deep compositions put kinks at
// interior values the caller cannot margin-engineer, so pass a finer step
// for those (roundoff grows only as eps/step).
GradCheckReport finite_diff_check(
    ParamStore<double>& params,
    const std::function<ValueId(Tape<double>&)>& build_loss,
    double step = 1e-4);

}  // namespace cssr
