#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "caed/ca_model.hpp"
#include "caed/data_io.hpp"
#include "caed/decoder.hpp"
#include "caed/optimizer.hpp"
#include "caed/regularizers.hpp"
#include "caed/sensing.hpp"

namespace caed {

/// ZeroBelow drops shots whose mean transmittance is below the threshold.
/// ZeroAtOrAbove is the opposite reading (keep a shot only while its mean is
/// below the threshold), kept for comparison runs.
enum class GateMode { ZeroBelow, ZeroAtOrAbove };

struct GateResult {
  CodedApertureSet ca;
  std::vector<bool> active;
};

/// Replaces gated shots with zeros. With no threshold every shot is active.
GateResult snapshot_gate(const CodedApertureSet& ca, std::optional<double> threshold,
                         GateMode mode = GateMode::ZeroBelow);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  OptimizerConfig optimizer = AdamConfig{};
  double ca_lr_multiplier = 1.0;
  bool train_ca = true;
  std::uint64_t seed = 0;
  NoiseSpec noise;
  std::optional<double> gate_threshold;
  GateMode gate_mode = GateMode::ZeroBelow;
  std::vector<RegularizerSpec> regularizers;
  TaskKind task = TaskKind::Classification;
  /// Measurements are multiplied by this before entering the decoder.
  double input_scale = 1.0;
  /// Levels for the recorded binarization residual. Empty picks the levels
  /// of the first level-targeting regularizer, or {0, 1}.
  std::vector<double> residual_levels;

  void validate() const;
  std::vector<double> levels_for_residual() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double task_loss = 0.0;
  std::vector<double> reg_values;  // unweighted R_q on the aperture at epoch end
  std::vector<double> rho;         // rho_q used during the epoch
  std::vector<double> transmittance;
  double binarization_residual = 0.0;
  std::size_t active_shots = 0;
};

struct TrainHistory {
  std::vector<std::string> term_names;
  std::vector<EpochRecord> epochs;

  std::string csv() const;
};

/// Value and gradients of the coupled objective on one batch.
struct ObjectiveResult {
  double task_loss = 0.0;
  double reg_value = 0.0;  // sum_q rho_q R_q
  double total = 0.0;
  std::vector<double> ca_grad;   // w.r.t. param.trainables(); empty unless requested
  std::vector<double> net_grad;  // DecoderNetwork::parameters() layout; empty unless requested
  std::vector<bool> active;
};

/// One forward/backward pass of the full pipeline. CA and measurement noise
/// are drawn from a generator seeded with `noise_seed`, so repeated calls with
/// the same seed see the same perturbation.
ObjectiveResult objective(const TrainConfig& config, const SensingModel& sensing, const CaParameterization& param,
                          const DecoderNetwork& net, const Eigen::MatrixXd& scenes, std::span<const int> labels,
                          std::size_t epoch, std::uint64_t noise_seed, bool with_gradient);

struct TrainResult {
  CaParameterization param;
  DecoderNetwork net;
  TrainHistory history;
};

TrainResult train_e2e(const TrainConfig& config, const Dataset& dataset, CaParameterization param,
                      const SensingModel& sensing, DecoderNetwork net, std::ostream* progress = nullptr);

/// Expanded, gated, noiseless aperture used for acquisition after training.
CodedApertureSet acquisition_ca(const TrainConfig& config, const CaParameterization& param);

/// Noiseless decoder outputs for every scene column, in batches.
Eigen::MatrixXd predict(const CodedApertureSet& ca, const SensingModel& sensing, const DecoderNetwork& net,
                        double input_scale, const Eigen::MatrixXd& scenes);

/// Task loss of `outputs` on the whole dataset.
double dataset_loss(TaskKind task, const Eigen::MatrixXd& outputs, const Dataset& dataset);

double dataset_accuracy(const Eigen::MatrixXd& outputs, std::span<const int> labels);

struct GradCheckGroup {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
};

/// Central differences of the coupled objective against the analytic
/// gradients, per group ("ca", "layer0", ...). Measurement noise is switched
/// off and the CA noise draw is held fixed. Refuses more than 500 trainables.
std::vector<GradCheckGroup> gradient_check(const TrainConfig& config, const SensingModel& sensing,
                                           const CaParameterization& param, const DecoderNetwork& net,
                                           const Eigen::MatrixXd& scenes, std::span<const int> labels,
                                           std::size_t epoch = 0, double h = 1e-5);

}  // namespace caed
