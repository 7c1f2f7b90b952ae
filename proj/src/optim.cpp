#include "fcs/optim.hpp"

#include <cmath>
#include <string>

#include "fcs/errors.hpp"

namespace fcs {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
      !(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (!(config_.eps > 0.0)) throw ConfigError("adam: eps must be positive");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (!p.trainable) continue;
    if (p.grad.shape() != p.value.shape()) p.zero_grad();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const double g = p.grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace fcs
