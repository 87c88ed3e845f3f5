#include "ash/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ash {

namespace {

void check_optimizable(const std::vector<NamedParam>& params) {
  for (const auto& p : params) {
    if (!p.tensor.requires_grad()) {
      throw std::invalid_argument("optimizer: parameter '" + p.name +
                                  "' is frozen (requires_grad is false)");
    }
  }
}

void check_grads_present(const std::vector<NamedParam>& params) {
  std::string missing;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) missing += missing.empty() ? p.name : (", " + p.name);
  }
  if (!missing.empty()) {
    throw std::runtime_error("optimizer step: missing gradients for: " + missing);
  }
}

}  // namespace

SgdMomentum::SgdMomentum(std::vector<NamedParam> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  if (lr <= 0.0) throw std::invalid_argument("sgd_momentum: lr must be > 0");
  check_optimizable(params_);
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(p.tensor.size(), 0.0);
}

void SgdMomentum::step() {
  check_grads_present(params_);
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& data = params_[i].tensor.raw();
    const auto& g = params_[i].tensor.grad();
    auto& v = velocity_[i];
    for (size_t j = 0; j < data.size(); ++j) {
      v[j] = momentum_ * v[j] + g[j];
      data[j] -= lr_ * v[j];
    }
  }
}

void SgdMomentum::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Adam::Adam(std::vector<NamedParam> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr <= 0.0) throw std::invalid_argument("adam: lr must be > 0");
  check_optimizable(params_);
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::step() {
  check_grads_present(params_);
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& data = params_[i].tensor.raw();
    const auto& g = params_[i].tensor.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < data.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      data[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace ash
