#pragma once

#include <span>
#include <variant>
#include <vector>

namespace caed {

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

using OptimizerConfig = std::variant<SgdConfig, AdamConfig>;

double learning_rate(const OptimizerConfig& config);

/// First-order optimizer state for one parameter group. `lr_scale` multiplies
/// the configured learning rate (used for the aperture group).
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::size_t size, double lr_scale = 1.0);

  void step(std::span<double> params, std::span<const double> grad);

  std::size_t steps() const { return t_; }

 private:
  OptimizerConfig config_;
  double lr_scale_ = 1.0;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

}  // namespace caed
