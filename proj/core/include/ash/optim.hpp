#pragma once

#include <string>
#include <vector>

#include "ash/tensor.hpp"

namespace ash {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// Temporarily drops requires_grad on a parameter set, so backward passes
/// through another player's update skip their weight gradients entirely.
class FreezeGuard {
 public:
  explicit FreezeGuard(std::vector<NamedParam> params) : params_(std::move(params)) {
    for (auto& p : params_) {
      was_.push_back(p.tensor.requires_grad());
      p.tensor.set_requires_grad(false);
    }
  }
  ~FreezeGuard() {
    for (size_t i = 0; i < params_.size(); ++i)
      params_[i].tensor.set_requires_grad(was_[i]);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<NamedParam> params_;
  std::vector<bool> was_;
};

/// SGD with classical momentum: v <- mu*v + g, p <- p - lr*v.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<NamedParam> params, double lr, double momentum = 0.9);

  void step();
  void zero_grad();

  const std::vector<NamedParam>& params() const { return params_; }
  std::vector<double>& velocity(size_t i) { return velocity_[i]; }

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> velocity_;
  double lr_;
  double momentum_;
};

/// Adam with bias-corrected moments (beta1=0.9, beta2=0.999, eps=1e-8).
class Adam {
 public:
  Adam(std::vector<NamedParam> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();

  const std::vector<NamedParam>& params() const { return params_; }
  std::vector<double>& moment1(size_t i) { return m_[i]; }
  std::vector<double>& moment2(size_t i) { return v_[i]; }
  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace ash
