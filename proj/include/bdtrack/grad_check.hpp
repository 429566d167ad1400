#pragma once

#include <cstddef>
#include <functional>

#include "bdtrack/tensor.hpp"

namespace bdtrack {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  /// Perturbation is `step * max(1, |x_i|)`.
  double step = 1e-5;
  /// Denominator floor: errors on gradients smaller than this are measured
  /// relative to the floor instead of the gradient itself.
  double scale_floor = 1e-3;
};

/// Compares the reverse-mode gradient of scalar `f` at `point` against
/// central finite differences. Throws NumericError if any evaluation is
/// non-finite.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                           GradCheckOptions opts = {});

}  // namespace bdtrack
