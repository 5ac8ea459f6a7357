#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "caed/ca_model.hpp"
#include "caed/sensing.hpp"

namespace caed {

enum class RhoMode { Static, Dynamic };

/// Weight of one regularization term over training.
///
/// Dynamic mode multiplies rho by alpha every `update_period` epochs, so that
/// after floor(T / period) updates it reaches rho_target.
struct RhoSchedule {
  double rho0 = 1.0;
  double rho_target = 1.0;
  std::size_t total_epochs = 1;
  std::size_t update_period = 1;
  double alpha = 1.0;
  RhoMode mode = RhoMode::Static;

  static RhoSchedule constant(double rho);
  /// Builds a dynamic schedule and fills in alpha.
  static RhoSchedule dynamic(double rho0, double rho_target, std::size_t total_epochs,
                             std::size_t update_period);

  std::size_t update_count() const { return total_epochs / update_period; }
};

/// alpha = (rho_target / rho0)^(1 / floor(T / period)); stores it in sched.alpha.
double alpha_from_endpoints(RhoSchedule& sched);

/// rho in effect during `epoch` (0-based). Epoch T reports the value after the
/// final update.
double rho_step(const RhoSchedule& sched, std::size_t epoch);

struct Binary01 {
  double p1 = 1.0;
  double p2 = 1.0;
};
struct BinaryPM1 {
  double p1 = 1.0;
  double p2 = 1.0;
};
struct MultiLevel {
  std::vector<double> levels;
  std::vector<double> exponents;
};
struct Transmittance {
  double target = 0.5;
};
struct SnapshotGroup {};
struct Correlation {};
struct Conditionality {};

using RegularizerTerm =
    std::variant<Binary01, BinaryPM1, MultiLevel, Transmittance, SnapshotGroup, Correlation, Conditionality>;

struct RegularizerSpec {
  RegularizerTerm term;
  RhoSchedule rho;
};

/// Regularizer value and its gradient, laid out like the aperture.
struct RegValue {
  double value = 0.0;
  std::vector<double> grad;
};

/// Short lowercase identifier ("binary01", "transmittance", ...).
std::string term_name(const RegularizerTerm& term);

/// Quantization levels a term drives the aperture toward; empty for terms that
/// do not target levels.
std::vector<double> term_levels(const RegularizerTerm& term);

RegValue r_binary01(const CodedApertureSet& ca, double p1, double p2);
RegValue r_binary_pm1(const CodedApertureSet& ca, double p1, double p2);
RegValue r_multilevel(const CodedApertureSet& ca, std::span<const double> levels,
                      std::span<const double> exponents);
RegValue r_transmittance(const CodedApertureSet& ca, double target);

/// Sum of per-shot l2 norms. Shots that are entirely zero contribute a zero
/// subgradient.
RegValue r_snapshot_group(const CodedApertureSet& ca);

/// Mean over pixels of the product across shots. Needs S >= 2.
RegValue r_correlation(const CodedApertureSet& ca);

/// (1/B) sum_k ||H^T H f_k - f_k||^2 over the columns of `scenes` (n x B),
/// evaluated operator-wise without forming H.
RegValue r_conditionality(const CodedApertureSet& ca, const SensingModel& model,
                          const Eigen::MatrixXd& scenes);

/// Evaluates one term. `model` and `scenes` are only read by Conditionality.
RegValue evaluate_term(const RegularizerTerm& term, const CodedApertureSet& ca,
                       const SensingModel* model, const Eigen::MatrixXd* scenes);

/// sum_q rho_q(epoch) * R_q and the matching gradient.
RegValue aggregate(std::span<const RegularizerSpec> specs, const CodedApertureSet& ca,
                   const SensingModel* model, const Eigen::MatrixXd* scenes, std::size_t epoch);

}  // namespace caed
