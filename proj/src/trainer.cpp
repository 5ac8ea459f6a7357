#include "caed/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "caed/error.hpp"
#include "caed/metrics.hpp"

namespace caed {

GateResult snapshot_gate(const CodedApertureSet& ca, std::optional<double> threshold, GateMode mode) {
  GateResult out{ca, std::vector<bool>(ca.shots(), true)};
  if (!threshold) return out;
  if (!(*threshold >= 0.0 && *threshold <= 1.0)) throw DomainError("gate threshold must lie in [0, 1]");
  for (std::size_t s = 0; s < ca.shots(); ++s) {
    const double mean = transmittance_of(ca, s);
    const bool keep = mode == GateMode::ZeroBelow ? !(mean < *threshold) : mean < *threshold;
    if (!keep) {
      out.active[s] = false;
      auto shot = out.ca.shot(s);
      std::fill(shot.begin(), shot.end(), 0.0);
    }
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate(optimizer) >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(ca_lr_multiplier >= 0.0)) throw ConfigError("CA learning-rate multiplier must be non-negative");
  if (gate_threshold && !(*gate_threshold >= 0.0 && *gate_threshold <= 1.0)) {
    throw ConfigError("gate threshold must lie in [0, 1]");
  }
  if (!(std::isfinite(input_scale) && input_scale > 0.0)) throw ConfigError("input scale must be positive");
}

std::vector<double> TrainConfig::levels_for_residual() const {
  if (!residual_levels.empty()) return residual_levels;
  for (const auto& spec : regularizers) {
    auto levels = term_levels(spec.term);
    if (!levels.empty()) return levels;
  }
  return {0.0, 1.0};
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Eigen::MatrixXd one_hot(std::span<const int> labels, std::size_t classes) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes),
                                            static_cast<Eigen::Index>(labels.size()));
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes) {
      throw DomainError("class index " + std::to_string(labels[b]) + " out of range");
    }
    t(labels[b], static_cast<Eigen::Index>(b)) = 1.0;
  }
  return t;
}

LossResult task_loss(TaskKind task, const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& scenes,
                     std::span<const int> labels) {
  if (task == TaskKind::Reconstruction) return loss(LossKind::Mse, outputs, scenes);
  if (labels.size() != static_cast<std::size_t>(outputs.cols())) {
    throw ShapeError("classification needs one label per scene");
  }
  return loss(LossKind::CrossEntropy, outputs, one_hot(labels, static_cast<std::size_t>(outputs.rows())));
}

std::size_t count_active(const CodedApertureSet& gated, const std::vector<bool>& active) {
  std::size_t count = 0;
  for (std::size_t s = 0; s < gated.shots(); ++s) {
    if (!active[s]) continue;
    const auto shot = gated.shot(s);
    if (std::any_of(shot.begin(), shot.end(), [](double v) { return v != 0.0; })) ++count;
  }
  return count;
}

}  // namespace

std::string TrainHistory::csv() const {
  std::string out = "epoch,task_loss";
  for (std::size_t q = 0; q < term_names.size(); ++q) out += ",r" + std::to_string(q) + "_" + term_names[q];
  for (std::size_t q = 0; q < term_names.size(); ++q) out += ",rho" + std::to_string(q) + "_" + term_names[q];
  out += ",binarization_residual,active_shots,transmittance\n";
  for (const auto& rec : epochs) {
    out += std::to_string(rec.epoch) + ',' + fmt(rec.task_loss);
    for (double v : rec.reg_values) out += ',' + fmt(v);
    for (double v : rec.rho) out += ',' + fmt(v);
    out += ',' + fmt(rec.binarization_residual) + ',' + std::to_string(rec.active_shots) + ',';
    for (std::size_t s = 0; s < rec.transmittance.size(); ++s) {
      if (s) out += ';';
      out += fmt(rec.transmittance[s]);
    }
    out += '\n';
  }
  return out;
}

ObjectiveResult objective(const TrainConfig& config, const SensingModel& sensing, const CaParameterization& param,
                          const DecoderNetwork& net, const Eigen::MatrixXd& scenes, std::span<const int> labels,
                          std::size_t epoch, std::uint64_t noise_seed, bool with_gradient) {
  if (scenes.cols() == 0) throw ShapeError("empty batch");
  if (static_cast<std::size_t>(scenes.rows()) != sensing.scene_size()) {
    throw ShapeError("scene length does not match the sensing model");
  }
  const CodedApertureSet phi = expand(param);
  sensing.check_ca(phi);
  const GateResult gate = snapshot_gate(phi, config.gate_threshold, config.gate_mode);

  Rng noise_rng(noise_seed);
  CodedApertureSet acquired = gate.ca;
  if (config.noise.ca_noise) {
    acquired = inject_ca_noise(phi, config.noise, noise_rng);
    for (std::size_t s = 0; s < acquired.shots(); ++s) {
      if (gate.active[s]) continue;
      auto shot = acquired.shot(s);
      std::fill(shot.begin(), shot.end(), 0.0);
    }
  }

  Eigen::MatrixXd g = forward_batch(sensing, acquired, scenes);
  if (config.noise.measurement_snr_db) {
    for (Eigen::Index b = 0; b < g.cols(); ++b) {
      const auto noisy = add_measurement_noise({g.col(b).data(), static_cast<std::size_t>(g.rows())},
                                               config.noise.measurement_snr_db, noise_rng);
      g.col(b) = Eigen::Map<const Eigen::VectorXd>(noisy.data(), g.rows());
    }
  }

  ForwardCache cache;
  const Eigen::MatrixXd outputs = forward(net, config.input_scale * g, with_gradient ? &cache : nullptr);
  const LossResult task = task_loss(config.task, outputs, scenes, labels);

  const RegValue reg = aggregate(config.regularizers, phi, &sensing, &scenes, epoch);

  ObjectiveResult out;
  out.task_loss = task.value;
  out.reg_value = reg.value;
  out.total = task.value + reg.value;
  out.active = gate.active;
  if (!with_gradient) return out;

  NetworkGradient ng = backward(net, cache, task.grad, task.at);
  out.net_grad = std::move(ng.params);

  const Eigen::MatrixXd dg = config.input_scale * ng.input;
  std::vector<double> dphi = forward_grad_wrt_ca_batch(sensing, acquired.shape(), scenes, dg);
  for (std::size_t s = 0; s < phi.shots(); ++s) {
    if (gate.active[s]) continue;
    const std::size_t base = s * phi.shape().shot_size();
    std::fill(dphi.begin() + static_cast<std::ptrdiff_t>(base),
              dphi.begin() + static_cast<std::ptrdiff_t>(base + phi.shape().shot_size()), 0.0);
  }
  if (!reg.grad.empty()) {
    for (std::size_t k = 0; k < dphi.size(); ++k) dphi[k] += reg.grad[k];
  }
  out.ca_grad = expand_backward(param, dphi);
  return out;
}

CodedApertureSet acquisition_ca(const TrainConfig& config, const CaParameterization& param) {
  return snapshot_gate(expand(param), config.gate_threshold, config.gate_mode).ca;
}

Eigen::MatrixXd predict(const CodedApertureSet& ca, const SensingModel& sensing, const DecoderNetwork& net,
                        double input_scale, const Eigen::MatrixXd& scenes) {
  sensing.check_ca(ca);
  constexpr Eigen::Index kChunk = 256;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(net.output_size()), scenes.cols());
  for (Eigen::Index start = 0; start < scenes.cols(); start += kChunk) {
    const Eigen::Index width = std::min(kChunk, scenes.cols() - start);
    const Eigen::MatrixXd g = forward_batch(sensing, ca, scenes.middleCols(start, width));
    out.middleCols(start, width) = forward(net, input_scale * g);
  }
  return out;
}

double dataset_loss(TaskKind task, const Eigen::MatrixXd& outputs, const Dataset& dataset) {
  return task_loss(task, outputs, dataset.scenes, dataset.labels).value;
}

double dataset_accuracy(const Eigen::MatrixXd& outputs, std::span<const int> labels) {
  std::vector<int> predicted(static_cast<std::size_t>(outputs.cols()));
  for (Eigen::Index b = 0; b < outputs.cols(); ++b) {
    predicted[static_cast<std::size_t>(b)] = static_cast<int>(
        predict_class({outputs.col(b).data(), static_cast<std::size_t>(outputs.rows())}));
  }
  return accuracy(predicted, labels);
}

TrainResult train_e2e(const TrainConfig& config, const Dataset& dataset, CaParameterization param,
                      const SensingModel& sensing, DecoderNetwork net, std::ostream* progress) {
  config.validate();
  if (dataset.size() == 0) throw ShapeError("training set is empty");
  if (dataset.scene_size() != sensing.scene_size()) throw ShapeError("dataset scenes do not match the sensing model");
  if (config.task == TaskKind::Classification && dataset.labels.size() != dataset.size()) {
    throw ShapeError("classification needs one label per scene");
  }
  sensing.check_ca_shape(param.output_shape());

  Rng rng(config.seed);
  Optimizer ca_opt(config.optimizer, param.trainables().size(), config.ca_lr_multiplier);
  Optimizer net_opt(config.optimizer, net.parameter_count());
  std::vector<double> theta = net.parameters();

  TrainHistory history;
  for (const auto& spec : config.regularizers) history.term_names.push_back(term_name(spec.term));
  const auto levels = config.levels_for_residual();

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto n = static_cast<Eigen::Index>(dataset.scene_size());
  Eigen::MatrixXd batch;
  std::vector<int> batch_labels;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t width = std::min(config.batch_size, order.size() - start);
      batch.resize(n, static_cast<Eigen::Index>(width));
      batch_labels.clear();
      for (std::size_t b = 0; b < width; ++b) {
        const std::size_t k = order[start + b];
        batch.col(static_cast<Eigen::Index>(b)) = dataset.scenes.col(static_cast<Eigen::Index>(k));
        if (!dataset.labels.empty()) batch_labels.push_back(dataset.labels[k]);
      }
      const std::uint64_t noise_seed = rng();
      const ObjectiveResult r = objective(config, sensing, param, net, batch, batch_labels, epoch, noise_seed, true);
      if (!std::isfinite(r.total)) {
        throw DivergenceError("loss became non-finite in epoch " + std::to_string(epoch));
      }
      loss_sum += r.task_loss * static_cast<double>(width);
      if (config.train_ca) ca_opt.step(param.trainables(), r.ca_grad);
      net_opt.step(theta, r.net_grad);
      net.set_parameters(theta);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.task_loss = loss_sum / static_cast<double>(order.size());
    const CodedApertureSet phi = expand(param);
    for (const auto& spec : config.regularizers) {
      rec.reg_values.push_back(evaluate_term(spec.term, phi, &sensing, &batch).value);
      rec.rho.push_back(rho_step(spec.rho, epoch));
    }
    for (std::size_t s = 0; s < phi.shots(); ++s) rec.transmittance.push_back(transmittance_of(phi, s));
    rec.binarization_residual = binarization_residual(phi, levels);
    const GateResult gate = snapshot_gate(phi, config.gate_threshold, config.gate_mode);
    rec.active_shots = count_active(gate.ca, gate.active);
    if (!std::isfinite(rec.task_loss)) throw DivergenceError("loss became non-finite in epoch " + std::to_string(epoch));

    if (progress) {
      const double mean_tr =
          std::accumulate(rec.transmittance.begin(), rec.transmittance.end(), 0.0) / static_cast<double>(phi.shots());
      *progress << "epoch " << epoch + 1 << '/' << config.epochs << " loss " << short_fmt(rec.task_loss);
      for (std::size_t q = 0; q < rec.rho.size(); ++q) {
        *progress << ' ' << history.term_names[q] << " rho=" << short_fmt(rec.rho[q]);
      }
      *progress << " transmittance " << short_fmt(mean_tr) << " residual " << short_fmt(rec.binarization_residual)
                << " active " << rec.active_shots << '\n';
      progress->flush();
    }
    history.epochs.push_back(std::move(rec));
  }
  return {std::move(param), std::move(net), std::move(history)};
}

std::vector<GradCheckGroup> gradient_check(const TrainConfig& config, const SensingModel& sensing,
                                           const CaParameterization& param, const DecoderNetwork& net,
                                           const Eigen::MatrixXd& scenes, std::span<const int> labels,
                                           std::size_t epoch, double h) {
  const std::size_t ca_count = param.trainables().size();
  const std::size_t total = ca_count + net.parameter_count();
  if (total > 500) {
    throw DomainError("gradient check needs at most 500 trainables, instance has " + std::to_string(total));
  }
  TrainConfig cfg = config;
  cfg.noise.measurement_snr_db.reset();
  constexpr std::uint64_t kNoiseSeed = 0x5eed;

  const ObjectiveResult analytic = objective(cfg, sensing, param, net, scenes, labels, epoch, kNoiseSeed, true);

  auto rel_error = [](const std::vector<double>& a, const std::vector<double>& numeric) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      diff = std::max(diff, std::abs(a[k] - numeric[k]));
      scale = std::max({scale, std::abs(a[k]), std::abs(numeric[k])});
    }
    return scale == 0.0 ? 0.0 : diff / scale;
  };

  std::vector<GradCheckGroup> report;

  CaParameterization p = param;
  std::vector<double> numeric(ca_count);
  for (std::size_t k = 0; k < ca_count; ++k) {
    const double saved = p.trainables()[k];
    p.trainables()[k] = saved + h;
    const double up = objective(cfg, sensing, p, net, scenes, labels, epoch, kNoiseSeed, false).total;
    p.trainables()[k] = saved - h;
    const double down = objective(cfg, sensing, p, net, scenes, labels, epoch, kNoiseSeed, false).total;
    p.trainables()[k] = saved;
    numeric[k] = (up - down) / (2.0 * h);
  }
  report.push_back({"ca", ca_count, rel_error(analytic.ca_grad, numeric)});

  DecoderNetwork trial = net;
  std::vector<double> theta = net.parameters();
  std::size_t offset = 0;
  for (std::size_t layer = 0; layer < net.layers().size(); ++layer) {
    const auto& l = net.layers()[layer];
    const std::size_t count = static_cast<std::size_t>(l.weights.size() + l.bias.size());
    std::vector<double> num(count), ana(count);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t idx = offset + k;
      const double saved = theta[idx];
      theta[idx] = saved + h;
      trial.set_parameters(theta);
      const double up = objective(cfg, sensing, param, trial, scenes, labels, epoch, kNoiseSeed, false).total;
      theta[idx] = saved - h;
      trial.set_parameters(theta);
      const double down = objective(cfg, sensing, param, trial, scenes, labels, epoch, kNoiseSeed, false).total;
      theta[idx] = saved;
      num[k] = (up - down) / (2.0 * h);
      ana[k] = analytic.net_grad[idx];
    }
    trial.set_parameters(theta);
    report.push_back({"layer" + std::to_string(layer), count, rel_error(ana, num)});
    offset += count;
  }
  return report;
}

}  // namespace caed
