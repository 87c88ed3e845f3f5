#include "ash/grad_check.hpp"

#include <cmath>
#include <string>

namespace ash {

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) {
    throw std::invalid_argument("grad_check: h must lie in [1e-7, 1e-3]");
  }
  Tensor x = Tensor::from_data(point.shape(), point.values(), /*requires_grad=*/true);

  Tensor loss = f(x);
  if (loss.size() != 1) throw std::invalid_argument("grad_check: f must return a scalar");
  if (!std::isfinite(loss.value())) {
    throw std::runtime_error("grad_check: non-finite value at the base point");
  }
  loss.backward();
  const std::vector<double> analytic = x.has_grad()
                                           ? x.grad()
                                           : std::vector<double>(x.size(), 0.0);

  double worst = 0.0;
  auto eval = [&](int64_t i, double v) {
    Tensor probe = Tensor::from_data(x.shape(), x.values(), false);
    probe.raw()[static_cast<size_t>(i)] = v;
    NoGradGuard ng;
    const double y = f(probe).value();
    if (!std::isfinite(y)) {
      throw std::runtime_error("grad_check: non-finite intermediate at coordinate " + std::to_string(i));
    }
    return y;
  };
  for (int64_t i = 0; i < x.size(); ++i) {
    const double xi = x.values()[static_cast<size_t>(i)];
    const double numeric = (eval(i, xi + h) - eval(i, xi - h)) / (2.0 * h);
    const double a = analytic[static_cast<size_t>(i)];
    const double err = std::fabs(a - numeric) / std::max(1.0, std::fabs(a));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace ash
