#include "bdtrack/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace bdtrack {

namespace {

double eval_scalar(const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
  Tensor y = f(x);
  if (y.numel() != 1) throw DimensionError("grad_check: function must be scalar-valued, got " + shape_str(y.shape()));
  double v = y.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, GradCheckOptions opts) {
  GradCheckReport report;
  report.tolerance = opts.tolerance;

  Tensor x = point.clone(true);
  Tensor y = f(x);
  if (y.numel() != 1) throw DimensionError("grad_check: function must be scalar-valued, got " + shape_str(y.shape()));
  if (!std::isfinite(y.item())) throw NumericError("grad_check: non-finite function value");
  y.backward();
  const std::vector<double> analytic = x.grad();

  NoGradGuard no_grad;
  Tensor probe = point.clone(false);
  auto values = probe.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    const double h = opts.step * std::max(1.0, std::abs(orig));
    values[i] = orig + h;
    const double fp = eval_scalar(f, probe);
    values[i] = orig - h;
    const double fm = eval_scalar(f, probe);
    values[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);

    const double abs_err = std::abs(analytic[i] - numeric);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), opts.scale_floor});
    const double rel = abs_err / denom;
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
  }
  report.passed = report.max_rel_error <= opts.tolerance;
  return report;
}

}  // namespace bdtrack
