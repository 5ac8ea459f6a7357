#include "caed/optimizer.hpp"

#include <cmath>

#include "caed/error.hpp"

namespace caed {

double learning_rate(const OptimizerConfig& config) {
  return std::visit([](const auto& c) { return c.lr; }, config);
}

Optimizer::Optimizer(OptimizerConfig config, std::size_t size, double lr_scale)
    : config_(config), lr_scale_(lr_scale), m_(size, 0.0) {
  if (!(learning_rate(config_) >= 0.0)) throw DomainError("learning rate must be non-negative");
  if (!(lr_scale >= 0.0)) throw DomainError("learning-rate multiplier must be non-negative");
  if (std::holds_alternative<AdamConfig>(config_)) v_.assign(size, 0.0);
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("optimizer group size mismatch");
  ++t_;
  if (const auto* sgd = std::get_if<SgdConfig>(&config_)) {
    const double lr = sgd->lr * lr_scale_;
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = sgd->momentum * m_[k] - lr * grad[k];
      params[k] += m_[k];
    }
    return;
  }
  const auto& adam = std::get<AdamConfig>(config_);
  const double lr = adam.lr * lr_scale_;
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = adam.beta1 * m_[k] + (1.0 - adam.beta1) * grad[k];
    v_[k] = adam.beta2 * v_[k] + (1.0 - adam.beta2) * grad[k] * grad[k];
    params[k] -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + adam.eps);
  }
}

}  // namespace caed
