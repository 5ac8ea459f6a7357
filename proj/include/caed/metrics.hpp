#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caed/ca_model.hpp"

namespace caed {

/// 10 log10(peak^2 / MSE). Returns +infinity when the inputs match exactly.
double psnr(std::span<const double> reference, std::span<const double> estimate, double peak = 1.0);

/// Spectral angle in radians, in [0, pi].
double sam(std::span<const double> a, std::span<const double> b);

double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Mean over entries of the squared distance to the nearest level.
double binarization_residual(const CodedApertureSet& ca, std::span<const double> levels);

/// Mean over pixels of the product across shots (same quantity the
/// correlation regularizer penalizes).
double correlation_value(const CodedApertureSet& ca);

/// One evaluation row. Metrics that do not apply to a run stay empty.
struct MetricReport {
  std::optional<double> psnr_db;
  std::optional<double> sam_radians;
  std::optional<double> accuracy;
  std::optional<double> binarization_residual;
  std::optional<double> correlation_value;
  std::optional<double> compression_ratio;
  std::vector<double> transmittance;

  /// Throws DomainError if any present entry is not finite.
  void validate() const;

  static std::string csv_header();
  /// Empty fields for absent metrics; per-shot transmittance joined with ';'.
  std::string csv_row(const std::string& label) const;
};

}  // namespace caed
