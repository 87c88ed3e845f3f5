#pragma once

#include <functional>

#include "ash/tensor.hpp"

namespace ash {

/// Compares the reverse-mode gradient of a scalar-valued function against
/// central finite differences at `point`. Returns
///   max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
/// `f` must be deterministic and rebuild its graph on every call; `h` must be
/// in [1e-7, 1e-3]. Non-finite intermediates raise an error naming the
/// coordinate being probed.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double h = 1e-5);

}  // namespace ash
