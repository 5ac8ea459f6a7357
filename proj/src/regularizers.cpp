#include "caed/regularizers.hpp"

#include <cmath>

#include "caed/error.hpp"

namespace caed {

RhoSchedule RhoSchedule::constant(double rho) {
  if (!(rho > 0.0)) throw DomainError("rho must be positive");
  RhoSchedule s;
  s.rho0 = rho;
  s.rho_target = rho;
  return s;
}

RhoSchedule RhoSchedule::dynamic(double rho0, double rho_target, std::size_t total_epochs,
                                 std::size_t update_period) {
  RhoSchedule s;
  s.rho0 = rho0;
  s.rho_target = rho_target;
  s.total_epochs = total_epochs;
  s.update_period = update_period;
  s.mode = RhoMode::Dynamic;
  alpha_from_endpoints(s);
  return s;
}

double alpha_from_endpoints(RhoSchedule& sched) {
  if (!(sched.rho0 > 0.0)) throw DomainError("rho0 must be positive");
  if (sched.mode == RhoMode::Static) {
    sched.alpha = 1.0;
    return sched.alpha;
  }
  if (!(sched.rho0 < sched.rho_target)) {
    throw DomainError("dynamic rho schedule needs rho0 < rhoT (use a static schedule for a constant rho)");
  }
  if (sched.update_period < 1 || sched.update_period > sched.total_epochs) {
    throw DomainError("rho update period must lie in [1, T]");
  }
  const auto updates = static_cast<long double>(sched.update_count());
  // Extended precision keeps exact roots exact after rounding, e.g. 1e6^(1/6) -> 10.
  const long double ratio = static_cast<long double>(sched.rho_target) / static_cast<long double>(sched.rho0);
  sched.alpha = static_cast<double>(std::pow(ratio, 1.0L / updates));
  return sched.alpha;
}

double rho_step(const RhoSchedule& sched, std::size_t epoch) {
  if (sched.mode == RhoMode::Static) return sched.rho0;
  const std::size_t k = std::min(epoch / sched.update_period, sched.update_count());
  return sched.rho0 * std::pow(sched.alpha, static_cast<double>(k));
}

std::string term_name(const RegularizerTerm& term) {
  struct {
    std::string operator()(const Binary01&) const { return "binary01"; }
    std::string operator()(const BinaryPM1&) const { return "binary_pm1"; }
    std::string operator()(const MultiLevel&) const { return "multilevel"; }
    std::string operator()(const Transmittance&) const { return "transmittance"; }
    std::string operator()(const SnapshotGroup&) const { return "snapshots"; }
    std::string operator()(const Correlation&) const { return "correlation"; }
    std::string operator()(const Conditionality&) const { return "conditionality"; }
  } visitor;
  return std::visit(visitor, term);
}

std::vector<double> term_levels(const RegularizerTerm& term) {
  if (std::holds_alternative<Binary01>(term)) return {0.0, 1.0};
  if (std::holds_alternative<BinaryPM1>(term)) return {-1.0, 1.0};
  if (const auto* m = std::get_if<MultiLevel>(&term)) return m->levels;
  return {};
}

namespace {

struct Factor {
  double value;
  double slope;
};

// ((x - level)^2)^p and its derivative. At a root the derivative is taken as 0,
// which is exact for p > 1/2 and a valid subgradient otherwise.
inline Factor level_factor(double x, double level, double p) {
  const double d = x - level;
  const double u = d * d;
  if (u == 0.0) return {0.0, 0.0};
  if (p == 1.0) return {u, 2.0 * d};
  const double up = std::pow(u, p - 1.0);
  return {up * u, 2.0 * p * d * up};
}

}  // namespace

RegValue r_multilevel(const CodedApertureSet& ca, std::span<const double> levels,
                      std::span<const double> exponents) {
  if (levels.size() < 2) throw DomainError("multi-level regularizer needs at least two levels");
  if (exponents.size() != levels.size()) throw DomainError("need one exponent per level");
  for (std::size_t d = 0; d < levels.size(); ++d) {
    if (!(exponents[d] > 0.0)) throw DomainError("regularizer exponents must be positive");
    for (std::size_t e = d + 1; e < levels.size(); ++e) {
      if (levels[d] == levels[e]) throw DomainError("duplicate quantization level");
    }
  }
  const std::size_t D = levels.size();
  const double scale = 1.0 / static_cast<double>(ca.shots());
  RegValue out{0.0, std::vector<double>(ca.size())};
  std::vector<Factor> f(D);
  const auto& values = ca.data();
  for (std::size_t k = 0; k < values.size(); ++k) {
    for (std::size_t d = 0; d < D; ++d) f[d] = level_factor(values[k], levels[d], exponents[d]);
    double prod = 1.0;
    for (std::size_t d = 0; d < D; ++d) prod *= f[d].value;
    double slope = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      double others = f[d].slope;
      for (std::size_t e = 0; e < D; ++e) {
        if (e != d) others *= f[e].value;
      }
      slope += others;
    }
    out.value += prod;
    out.grad[k] = scale * slope;
  }
  out.value *= scale;
  return out;
}

RegValue r_binary01(const CodedApertureSet& ca, double p1, double p2) {
  const double levels[] = {0.0, 1.0};
  const double exponents[] = {p1, p2};
  return r_multilevel(ca, levels, exponents);
}

RegValue r_binary_pm1(const CodedApertureSet& ca, double p1, double p2) {
  const double levels[] = {-1.0, 1.0};
  const double exponents[] = {p1, p2};
  return r_multilevel(ca, levels, exponents);
}

RegValue r_transmittance(const CodedApertureSet& ca, double target) {
  if (!(target >= 0.0 && target <= 1.0)) throw DomainError("target transmittance must lie in [0, 1]");
  const double S = static_cast<double>(ca.shots());
  const double count = static_cast<double>(ca.shape().shot_size());
  RegValue out{0.0, std::vector<double>(ca.size())};
  for (std::size_t s = 0; s < ca.shots(); ++s) {
    const double diff = transmittance_of(ca, s) - target;
    out.value += diff * diff;
    const double g = 2.0 * diff / (S * count);
    for (std::size_t k = 0; k < ca.shape().shot_size(); ++k) out.grad[s * ca.shape().shot_size() + k] = g;
  }
  out.value /= S;
  return out;
}

RegValue r_snapshot_group(const CodedApertureSet& ca) {
  RegValue out{0.0, std::vector<double>(ca.size(), 0.0)};
  const std::size_t n = ca.shape().shot_size();
  for (std::size_t s = 0; s < ca.shots(); ++s) {
    const auto phi = ca.shot(s);
    double sq = 0.0;
    for (double v : phi) sq += v * v;
    const double norm = std::sqrt(sq);
    out.value += norm;
    if (norm == 0.0) continue;
    for (std::size_t k = 0; k < n; ++k) out.grad[s * n + k] = phi[k] / norm;
  }
  return out;
}

RegValue r_correlation(const CodedApertureSet& ca) {
  const std::size_t S = ca.shots();
  if (S < 2) throw DomainError("correlation regularizer needs at least two shots");
  const std::size_t n = ca.shape().shot_size();
  const double scale = 1.0 / static_cast<double>(n);
  RegValue out{0.0, std::vector<double>(ca.size())};
  const auto& v = ca.data();
  std::vector<double> prefix(S + 1), suffix(S + 1);
  for (std::size_t k = 0; k < n; ++k) {
    prefix[0] = 1.0;
    for (std::size_t s = 0; s < S; ++s) prefix[s + 1] = prefix[s] * v[s * n + k];
    suffix[S] = 1.0;
    for (std::size_t s = S; s-- > 0;) suffix[s] = suffix[s + 1] * v[s * n + k];
    out.value += prefix[S];
    for (std::size_t s = 0; s < S; ++s) out.grad[s * n + k] = scale * prefix[s] * suffix[s + 1];
  }
  out.value *= scale;
  return out;
}

RegValue r_conditionality(const CodedApertureSet& ca, const SensingModel& model,
                          const Eigen::MatrixXd& scenes) {
  model.check_ca(ca);
  if (scenes.cols() == 0) throw DomainError("conditionality needs a non-empty batch");
  if (static_cast<std::size_t>(scenes.rows()) != model.scene_size()) {
    throw ShapeError("conditionality batch scene size " + std::to_string(scenes.rows()) + " does not match " +
                     std::to_string(model.scene_size()));
  }
  const double inv_b = 1.0 / static_cast<double>(scenes.cols());
  RegValue out{0.0, std::vector<double>(ca.size(), 0.0)};

  if (model.kind() == SensingKind::Spc) {
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMatrix> phi(ca.data().data(), static_cast<Eigen::Index>(model.shots()),
                                          static_cast<Eigen::Index>(model.scene_size()));
    const Eigen::MatrixXd u = phi * scenes;
    const Eigen::MatrixXd r = phi.transpose() * u - scenes;
    out.value = r.squaredNorm() * inv_b;
    // Reverse pass: v = H^T u contributes u dv^T, u = H f contributes (H dv) f^T.
    const Eigen::MatrixXd dv = (2.0 * inv_b) * r;
    const Eigen::MatrixXd du = phi * dv;
    Eigen::Map<RowMatrix> grad(out.grad.data(), static_cast<Eigen::Index>(model.shots()),
                               static_cast<Eigen::Index>(model.scene_size()));
    grad.noalias() = u * dv.transpose() + du * scenes.transpose();
    return out;
  }

  for (Eigen::Index b = 0; b < scenes.cols(); ++b) {
    const Eigen::VectorXd col = scenes.col(b);
    const std::span<const double> f{col.data(), static_cast<std::size_t>(col.size())};
    const Measurement u = forward(model, ca, f);
    std::vector<double> r = adjoint(model, ca, u);
    for (std::size_t k = 0; k < r.size(); ++k) {
      r[k] -= f[k];
      out.value += r[k] * r[k] * inv_b;
      r[k] *= 2.0 * inv_b;  // now dv
    }
    const Measurement du_m = forward(model, ca, r);
    const auto g_adj = adjoint_grad_wrt_ca(model, ca.shape(), u.stacked, r);
    const auto g_fwd = forward_grad_wrt_ca(model, ca.shape(), f, du_m.stacked);
    for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += g_adj[k] + g_fwd[k];
  }
  return out;
}

RegValue evaluate_term(const RegularizerTerm& term, const CodedApertureSet& ca,
                       const SensingModel* model, const Eigen::MatrixXd* scenes) {
  if (const auto* t = std::get_if<Binary01>(&term)) return r_binary01(ca, t->p1, t->p2);
  if (const auto* t = std::get_if<BinaryPM1>(&term)) return r_binary_pm1(ca, t->p1, t->p2);
  if (const auto* t = std::get_if<MultiLevel>(&term)) return r_multilevel(ca, t->levels, t->exponents);
  if (const auto* t = std::get_if<Transmittance>(&term)) return r_transmittance(ca, t->target);
  if (std::holds_alternative<SnapshotGroup>(term)) return r_snapshot_group(ca);
  if (std::holds_alternative<Correlation>(term)) return r_correlation(ca);
  if (model == nullptr || scenes == nullptr) {
    throw DomainError("conditionality regularizer needs a sensing model and a scene batch");
  }
  return r_conditionality(ca, *model, *scenes);
}

RegValue aggregate(std::span<const RegularizerSpec> specs, const CodedApertureSet& ca,
                   const SensingModel* model, const Eigen::MatrixXd* scenes, std::size_t epoch) {
  RegValue total{0.0, std::vector<double>(ca.size(), 0.0)};
  for (const auto& spec : specs) {
    const double rho = rho_step(spec.rho, epoch);
    const RegValue term = evaluate_term(spec.term, ca, model, scenes);
    total.value += rho * term.value;
    for (std::size_t k = 0; k < total.grad.size(); ++k) total.grad[k] += rho * term.grad[k];
  }
  return total;
}

}  // namespace caed
