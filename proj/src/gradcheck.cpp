#include "cssr/gradcheck.hpp"

#include <cmath>

namespace cssr {

namespace {

double eval_loss(const std::function<ValueId(Tape<double>&)>& build_loss) {
  Tape<double> tape;
  return tape.scalar(build_loss(tape));
}

}  // namespace

GradCheckReport finite_diff_check(ParamStore<double>& params,
                                  const std::function<ValueId(Tape<double>&)>& build_loss,
                                  double step) {
  params.zero_grads();
  {
    Tape<double> tape;
    tape.backward(build_loss(tape));
  }

  GradCheckReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<double>& p = params[pi];
    double max_abs_diff = 0.0, max_analytic = 0.0, max_numeric = 0.0;
    for (size_t k = 0; k < p.value.data.size(); ++k) {
      const double saved = p.value.data[k];
      p.value.data[k] = saved + step;
      const double plus = eval_loss(build_loss);
      p.value.data[k] = saved - step;
      const double minus = eval_loss(build_loss);
      p.value.data[k] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double analytic = p.grad.data[k];
      max_abs_diff = std::max(max_abs_diff, std::fabs(analytic - numeric));
      max_analytic = std::max(max_analytic, std::fabs(analytic));
      max_numeric = std::max(max_numeric, std::fabs(numeric));
    }
    const double scale = std::max({max_analytic, max_numeric, 1e-12});
    GradCheckRow row{p.name, max_abs_diff / scale};
    report.max_rel_err = std::max(report.max_rel_err, row.rel_err);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace cssr
