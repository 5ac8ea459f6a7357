#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "caed/ca_model.hpp"

namespace caed {

enum class SensingKind { Spc, Cassi };

/// Geometry of a coded sensing system.
///
/// SPC: each shot integrates the coded M x N scene to one detector value.
/// CASSI: each shot codes every band of an M x N x L cube with the same
/// aperture (or one plane per band for colored apertures), shears band l by l
/// columns to the right and integrates onto an M x (N + L - 1) detector.
class SensingModel {
 public:
  static SensingModel spc(std::size_t shots, std::size_t rows, std::size_t cols);
  static SensingModel cassi(std::size_t shots, std::size_t rows, std::size_t cols, std::size_t bands);

  SensingKind kind() const { return kind_; }
  std::size_t shots() const { return shots_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t bands() const { return bands_; }

  std::size_t scene_size() const { return rows_ * cols_ * bands_; }
  std::size_t detector_cols() const { return cols_ + bands_ - 1; }
  std::size_t per_shot_length() const { return kind_ == SensingKind::Spc ? 1 : rows_ * detector_cols(); }
  std::size_t measurement_size() const { return shots_ * per_shot_length(); }

  /// Throws ShapeError unless `ca` can drive this system.
  void check_ca(const CodedApertureSet& ca) const;
  void check_ca_shape(const CaShape& shape) const;

 private:
  SensingKind kind_ = SensingKind::Spc;
  std::size_t shots_ = 1;
  std::size_t rows_ = 1;
  std::size_t cols_ = 1;
  std::size_t bands_ = 1;
};

/// Stacked multishot measurement; shot s occupies [s*m, (s+1)*m).
struct Measurement {
  std::vector<double> stacked;
  std::size_t shots = 0;
  std::size_t per_shot = 0;

  std::span<const double> shot(std::size_t s) const { return {stacked.data() + s * per_shot, per_shot}; }
};

Measurement spc_forward(const CodedApertureSet& ca, std::span<const double> scene);
std::vector<double> spc_adjoint(const CodedApertureSet& ca, const Measurement& g);

/// `scene` is an M x N x L cube stored with the band index fastest.
Measurement cassi_forward(const CodedApertureSet& ca, std::span<const double> scene, std::size_t bands);
std::vector<double> cassi_adjoint(const CodedApertureSet& ca, const Measurement& y, std::size_t bands);

Measurement forward(const SensingModel& model, const CodedApertureSet& ca, std::span<const double> scene);
std::vector<double> adjoint(const SensingModel& model, const CodedApertureSet& ca, const Measurement& g);

/// Gradient of <upstream, H_ca f> with respect to the aperture values.
std::vector<double> forward_grad_wrt_ca(const SensingModel& model, const CaShape& ca_shape,
                                        std::span<const double> scene,
                                        std::span<const double> upstream);

/// Gradient of <upstream, H_ca^T g> with respect to the aperture values.
std::vector<double> adjoint_grad_wrt_ca(const SensingModel& model, const CaShape& ca_shape,
                                        std::span<const double> g,
                                        std::span<const double> upstream);

/// Column-batched forward: scenes is n x B, result is (S*m) x B.
Eigen::MatrixXd forward_batch(const SensingModel& model, const CodedApertureSet& ca,
                              const Eigen::MatrixXd& scenes);

/// Sum over the batch of forward_grad_wrt_ca for each column pair.
std::vector<double> forward_grad_wrt_ca_batch(const SensingModel& model, const CaShape& ca_shape,
                                              const Eigen::MatrixXd& scenes,
                                              const Eigen::MatrixXd& upstream);

/// Additive white Gaussian noise at the given SNR (signal power over noise
/// power, per vector). nullopt returns the input unchanged.
std::vector<double> add_measurement_noise(std::span<const double> g, std::optional<double> snr_db, Rng& rng);

/// gamma = S * m / n.
double compression_ratio(const SensingModel& model);

}  // namespace caed
