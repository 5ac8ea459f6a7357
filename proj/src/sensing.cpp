#include "caed/sensing.hpp"

#include <cmath>
#include <string>

#include "caed/error.hpp"

namespace caed {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_size(const char* what, std::size_t got, std::size_t expected) {
  if (got != expected) {
    throw ShapeError(std::string(what) + " has " + std::to_string(got) + " entries, expected " +
                     std::to_string(expected));
  }
}

}  // namespace

SensingModel SensingModel::spc(std::size_t shots, std::size_t rows, std::size_t cols) {
  if (shots == 0 || rows == 0 || cols == 0) throw ShapeError("SPC dimensions must be >= 1");
  SensingModel m;
  m.kind_ = SensingKind::Spc;
  m.shots_ = shots;
  m.rows_ = rows;
  m.cols_ = cols;
  m.bands_ = 1;
  return m;
}

SensingModel SensingModel::cassi(std::size_t shots, std::size_t rows, std::size_t cols, std::size_t bands) {
  if (shots == 0 || rows == 0 || cols == 0 || bands == 0) throw ShapeError("CASSI dimensions must be >= 1");
  SensingModel m;
  m.kind_ = SensingKind::Cassi;
  m.shots_ = shots;
  m.rows_ = rows;
  m.cols_ = cols;
  m.bands_ = bands;
  return m;
}

void SensingModel::check_ca_shape(const CaShape& shape) const {
  if (shape.shots != shots_ || shape.rows != rows_ || shape.cols != cols_) {
    throw ShapeError("aperture is " + std::to_string(shape.shots) + "x" + std::to_string(shape.rows) + "x" +
                     std::to_string(shape.cols) + " but the sensing model expects " + std::to_string(shots_) +
                     "x" + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  if (kind_ == SensingKind::Spc && shape.planes != 1) {
    throw ShapeError("SPC needs a planar aperture (L = 1)");
  }
  if (kind_ == SensingKind::Cassi && shape.planes != 1 && shape.planes != bands_) {
    throw ShapeError("CASSI aperture must have 1 plane or one plane per band");
  }
}

void SensingModel::check_ca(const CodedApertureSet& ca) const { check_ca_shape(ca.shape()); }

Measurement spc_forward(const CodedApertureSet& ca, std::span<const double> scene) {
  if (ca.planes() != 1) throw ShapeError("SPC needs a planar aperture (L = 1)");
  const std::size_t n = ca.rows() * ca.cols();
  require_size("scene", scene.size(), n);
  Measurement g{std::vector<double>(ca.shots(), 0.0), ca.shots(), 1};
  for (std::size_t s = 0; s < ca.shots(); ++s) {
    const auto phi = ca.shot(s);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += phi[k] * scene[k];
    g.stacked[s] = acc;
  }
  return g;
}

std::vector<double> spc_adjoint(const CodedApertureSet& ca, const Measurement& g) {
  if (ca.planes() != 1) throw ShapeError("SPC needs a planar aperture (L = 1)");
  require_size("measurement", g.stacked.size(), ca.shots());
  const std::size_t n = ca.rows() * ca.cols();
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < ca.shots(); ++s) {
    const auto phi = ca.shot(s);
    for (std::size_t k = 0; k < n; ++k) out[k] += g.stacked[s] * phi[k];
  }
  return out;
}

namespace {

// Aperture value applied to band l at pixel (i, j).
inline double cassi_code(const CodedApertureSet& ca, std::size_t s, std::size_t i, std::size_t j, std::size_t l) {
  return ca.planes() == 1 ? ca.at(s, i, j, 0) : ca.at(s, i, j, l);
}

void check_cassi(const CodedApertureSet& ca, std::size_t bands) {
  if (bands == 0) throw ShapeError("CASSI needs at least one band");
  if (ca.planes() != 1 && ca.planes() != bands) {
    throw ShapeError("CASSI aperture must have 1 plane or one plane per band");
  }
}

}  // namespace

Measurement cassi_forward(const CodedApertureSet& ca, std::span<const double> scene, std::size_t bands) {
  check_cassi(ca, bands);
  const std::size_t M = ca.rows(), N = ca.cols(), L = bands;
  require_size("scene", scene.size(), M * N * L);
  const std::size_t W = N + L - 1;
  Measurement y{std::vector<double>(ca.shots() * M * W, 0.0), ca.shots(), M * W};
  for (std::size_t s = 0; s < ca.shots(); ++s) {
    double* det = y.stacked.data() + s * M * W;
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t l = 0; l < L; ++l)
          det[i * W + j + l] += cassi_code(ca, s, i, j, l) * scene[(i * N + j) * L + l];
  }
  return y;
}

std::vector<double> cassi_adjoint(const CodedApertureSet& ca, const Measurement& y, std::size_t bands) {
  check_cassi(ca, bands);
  const std::size_t M = ca.rows(), N = ca.cols(), L = bands;
  const std::size_t W = N + L - 1;
  require_size("detector", y.stacked.size(), ca.shots() * M * W);
  std::vector<double> out(M * N * L, 0.0);
  for (std::size_t s = 0; s < ca.shots(); ++s) {
    const double* det = y.stacked.data() + s * M * W;
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t l = 0; l < L; ++l)
          out[(i * N + j) * L + l] += cassi_code(ca, s, i, j, l) * det[i * W + j + l];
  }
  return out;
}

Measurement forward(const SensingModel& model, const CodedApertureSet& ca, std::span<const double> scene) {
  model.check_ca(ca);
  if (model.kind() == SensingKind::Spc) return spc_forward(ca, scene);
  return cassi_forward(ca, scene, model.bands());
}

std::vector<double> adjoint(const SensingModel& model, const CodedApertureSet& ca, const Measurement& g) {
  model.check_ca(ca);
  if (model.kind() == SensingKind::Spc) return spc_adjoint(ca, g);
  return cassi_adjoint(ca, g, model.bands());
}

std::vector<double> forward_grad_wrt_ca(const SensingModel& model, const CaShape& ca_shape,
                                        std::span<const double> scene,
                                        std::span<const double> upstream) {
  model.check_ca_shape(ca_shape);
  require_size("scene", scene.size(), model.scene_size());
  require_size("upstream gradient", upstream.size(), model.measurement_size());
  std::vector<double> grad(ca_shape.size(), 0.0);
  const std::size_t M = model.rows(), N = model.cols();
  if (model.kind() == SensingKind::Spc) {
    const std::size_t n = M * N;
    for (std::size_t s = 0; s < model.shots(); ++s)
      for (std::size_t k = 0; k < n; ++k) grad[s * n + k] = upstream[s] * scene[k];
    return grad;
  }
  const std::size_t L = model.bands(), W = model.detector_cols(), P = ca_shape.planes;
  for (std::size_t s = 0; s < model.shots(); ++s) {
    const double* up = upstream.data() + s * M * W;
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t l = 0; l < L; ++l) {
          const std::size_t plane = P == 1 ? 0 : l;
          grad[((s * M + i) * N + j) * P + plane] += up[i * W + j + l] * scene[(i * N + j) * L + l];
        }
  }
  return grad;
}

std::vector<double> adjoint_grad_wrt_ca(const SensingModel& model, const CaShape& ca_shape,
                                        std::span<const double> g,
                                        std::span<const double> upstream) {
  // <u, H^T g> = <H u, g>, so the roles of scene and detector swap.
  return forward_grad_wrt_ca(model, ca_shape, upstream, g);
}

Eigen::MatrixXd forward_batch(const SensingModel& model, const CodedApertureSet& ca,
                              const Eigen::MatrixXd& scenes) {
  model.check_ca(ca);
  if (static_cast<std::size_t>(scenes.rows()) != model.scene_size()) {
    throw ShapeError("scene batch has " + std::to_string(scenes.rows()) + " rows, expected " +
                     std::to_string(model.scene_size()));
  }
  if (model.kind() == SensingKind::Spc) {
    const Eigen::Map<const RowMatrix> phi(ca.data().data(), static_cast<Eigen::Index>(model.shots()),
                                          static_cast<Eigen::Index>(model.scene_size()));
    return phi * scenes;
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(model.measurement_size()), scenes.cols());
  for (Eigen::Index b = 0; b < scenes.cols(); ++b) {
    const Eigen::VectorXd col = scenes.col(b);
    const Measurement y = cassi_forward(ca, {col.data(), static_cast<std::size_t>(col.size())}, model.bands());
    out.col(b) = Eigen::Map<const Eigen::VectorXd>(y.stacked.data(), static_cast<Eigen::Index>(y.stacked.size()));
  }
  return out;
}

std::vector<double> forward_grad_wrt_ca_batch(const SensingModel& model, const CaShape& ca_shape,
                                              const Eigen::MatrixXd& scenes,
                                              const Eigen::MatrixXd& upstream) {
  model.check_ca_shape(ca_shape);
  if (scenes.cols() != upstream.cols()) throw ShapeError("scene and upstream batch sizes differ");
  if (model.kind() == SensingKind::Spc) {
    if (static_cast<std::size_t>(upstream.rows()) != model.shots() ||
        static_cast<std::size_t>(scenes.rows()) != model.scene_size()) {
      throw ShapeError("SPC batch gradient shape mismatch");
    }
    std::vector<double> grad(ca_shape.size());
    Eigen::Map<RowMatrix> out(grad.data(), static_cast<Eigen::Index>(model.shots()),
                              static_cast<Eigen::Index>(model.scene_size()));
    out.noalias() = upstream * scenes.transpose();
    return grad;
  }
  std::vector<double> grad(ca_shape.size(), 0.0);
  for (Eigen::Index b = 0; b < scenes.cols(); ++b) {
    const Eigen::VectorXd f = scenes.col(b);
    const Eigen::VectorXd u = upstream.col(b);
    const auto g = forward_grad_wrt_ca(model, ca_shape, {f.data(), static_cast<std::size_t>(f.size())},
                                       {u.data(), static_cast<std::size_t>(u.size())});
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g[k];
  }
  return grad;
}

std::vector<double> add_measurement_noise(std::span<const double> g, std::optional<double> snr_db, Rng& rng) {
  std::vector<double> out(g.begin(), g.end());
  if (!snr_db || out.empty()) return out;
  if (!std::isfinite(*snr_db)) throw DomainError("SNR must be finite");
  double power = 0.0;
  for (double v : out) power += v * v;
  power /= static_cast<double>(out.size());
  if (power == 0.0) return out;
  const double sigma = std::sqrt(power / std::pow(10.0, *snr_db / 10.0));
  std::normal_distribution<double> dist(0.0, sigma);
  for (double& v : out) v += dist(rng);
  return out;
}

double compression_ratio(const SensingModel& model) {
  return static_cast<double>(model.shots()) * static_cast<double>(model.per_shot_length()) /
         static_cast<double>(model.scene_size());
}

}  // namespace caed
