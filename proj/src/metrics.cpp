#include "caed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "caed/error.hpp"
#include "caed/regularizers.hpp"

namespace caed {

double psnr(std::span<const double> reference, std::span<const double> estimate, double peak) {
  if (reference.size() != estimate.size() || reference.empty()) {
    throw ShapeError("psnr needs two non-empty arrays of the same size");
  }
  if (!(peak > 0.0)) throw DomainError("psnr peak must be positive");
  double mse = 0.0;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    const double d = reference[k] - estimate[k];
    mse += d * d;
  }
  mse /= static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double sam(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("sam needs two non-empty spectra of equal length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) throw DomainError("sam is undefined for a zero spectrum");
  const double cosine = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
  return std::acos(cosine);
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw ShapeError("accuracy needs equal-length, non-empty inputs");
  }
  std::size_t hits = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) hits += predictions[k] == labels[k] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double binarization_residual(const CodedApertureSet& ca, std::span<const double> levels) {
  if (levels.empty()) throw DomainError("binarization residual needs at least one level");
  double total = 0.0;
  for (double v : ca.data()) {
    double best = std::numeric_limits<double>::infinity();
    for (double level : levels) best = std::min(best, (v - level) * (v - level));
    total += best;
  }
  return total / static_cast<double>(ca.size());
}

double correlation_value(const CodedApertureSet& ca) { return r_correlation(ca).value; }

void MetricReport::validate() const {
  for (const auto* m : {&psnr_db, &sam_radians, &accuracy, &binarization_residual, &correlation_value,
                        &compression_ratio}) {
    if (*m && !std::isfinite(**m)) throw DomainError("metric report holds a non-finite value");
  }
  for (double t : transmittance) {
    if (!std::isfinite(t)) throw DomainError("metric report holds a non-finite transmittance");
  }
}

std::string MetricReport::csv_header() {
  return "label,psnr_db,sam_radians,accuracy,binarization_residual,correlation_value,compression_ratio,"
         "transmittance";
}

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string field(const std::optional<double>& v) { return v ? format_value(*v) : std::string(); }

}  // namespace

std::string MetricReport::csv_row(const std::string& label) const {
  validate();
  std::string row = label;
  for (const auto* m : {&psnr_db, &sam_radians, &accuracy, &binarization_residual, &correlation_value,
                        &compression_ratio}) {
    row += ',' + field(*m);
  }
  row += ',';
  for (std::size_t s = 0; s < transmittance.size(); ++s) {
    if (s) row += ';';
    row += format_value(transmittance[s]);
  }
  return row;
}

}  // namespace caed
