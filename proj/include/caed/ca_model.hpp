#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

namespace caed {

using Rng = std::mt19937_64;

/// Dimensions of a coded-aperture ensemble: S shots of M x N x L.
struct CaShape {
  std::size_t shots = 1;
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::size_t planes = 1;

  std::size_t shot_size() const { return rows * cols * planes; }
  std::size_t size() const { return shots * shot_size(); }
  bool operator==(const CaShape&) const = default;
};

/// The S x M x N x L array of aperture values.
///
/// Storage is shot-major, then row, column and plane, so that
/// index(s, i, j, l) = ((s * M + i) * N + j) * L + l. Each shot is a
/// contiguous block of M*N*L values.
class CodedApertureSet {
 public:
  CodedApertureSet() = default;
  explicit CodedApertureSet(CaShape shape, double fill = 0.0);
  CodedApertureSet(CaShape shape, std::vector<double> values);

  const CaShape& shape() const { return shape_; }
  std::size_t shots() const { return shape_.shots; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t planes() const { return shape_.planes; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(std::size_t s, std::size_t i, std::size_t j, std::size_t l = 0) const {
    return ((s * shape_.rows + i) * shape_.cols + j) * shape_.planes + l;
  }
  double& at(std::size_t s, std::size_t i, std::size_t j, std::size_t l = 0) {
    return values_[index(s, i, j, l)];
  }
  double at(std::size_t s, std::size_t i, std::size_t j, std::size_t l = 0) const {
    return values_[index(s, i, j, l)];
  }

  std::span<double> shot(std::size_t s);
  std::span<const double> shot(std::size_t s) const;

  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  /// Throws DomainError if any entry is NaN or infinite.
  void check_finite() const;

  bool operator==(const CodedApertureSet&) const = default;

 private:
  CaShape shape_{};
  std::vector<double> values_;
};

/// Fixed optical filter bank used by colored apertures: V filters over L bands,
/// stored row-major (filter v, band l) -> weights[v * L + l].
struct FilterBank {
  std::size_t filters = 0;
  std::size_t bands = 0;
  std::vector<double> weights;

  double at(std::size_t v, std::size_t l) const { return weights[v * bands + l]; }
};

/// Stand-in for a measured color-filter bank: V Gaussian bandpass responses
/// with evenly spaced centers, peak 1.
FilterBank gaussian_filter_bank(std::size_t filters, std::size_t bands);

enum class ParamKind { Dense, Kronecker, Colored };

/// How the full aperture ensemble is generated from trainable values.
///
/// Dense trains every entry. Kronecker trains an S x dn x dm x L kernel that is
/// tiled over the M x N aperture. Colored trains S x dn x dm x V mixing weights
/// over a fixed filter bank and tiles the resulting kernel.
class CaParameterization {
 public:
  static CaParameterization dense(CodedApertureSet values);
  static CaParameterization kronecker(CodedApertureSet kernel, std::size_t rows, std::size_t cols);
  static CaParameterization colored(CodedApertureSet weights, FilterBank bank, std::size_t rows,
                                    std::size_t cols);

  ParamKind kind() const { return kind_; }

  /// Shape of the aperture ensemble produced by expand().
  CaShape output_shape() const;

  /// The trainable block: Dense values, Kronecker kernel, or Colored weights.
  const CodedApertureSet& trainable_block() const { return block_; }
  std::vector<double>& trainables() { return block_.data(); }
  const std::vector<double>& trainables() const { return block_.data(); }

  const FilterBank& filter_bank() const { return bank_; }

  std::size_t tile_rows() const { return rows_ / block_.rows(); }
  std::size_t tile_cols() const { return cols_ / block_.cols(); }

 private:
  CaParameterization() = default;
  void validate() const;

  ParamKind kind_ = ParamKind::Dense;
  CodedApertureSet block_;
  FilterBank bank_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

CodedApertureSet expand(const CaParameterization& param);

/// Chain rule through expand(): maps a gradient on the expanded ensemble to a
/// gradient on param.trainables().
std::vector<double> expand_backward(const CaParameterization& param,
                                    std::span<const double> upstream);

std::size_t trainable_parameter_count(const CaParameterization& param);

struct UniformNoise {
  double lo = 0.0;
  double hi = 0.0;
};

/// Gaussian perturbation, truncated to [-bound, bound].
struct GaussianNoise {
  double mean = 0.0;
  double sigma = 0.0;
  double bound = 0.0;
};

using CaNoise = std::variant<UniformNoise, GaussianNoise>;

struct NoiseSpec {
  std::optional<CaNoise> ca_noise;
  std::optional<double> measurement_snr_db;  // nullopt means noiseless
};

/// Largest |eta| the distribution can produce.
double noise_amplitude(const CaNoise& noise);

/// Returns ca + eta with eta drawn i.i.d. per entry. Throws DomainError when
/// the noise amplitude is not strictly below max |ca| (zero noise is always
/// accepted).
CodedApertureSet inject_ca_noise(const CodedApertureSet& ca, const NoiseSpec& spec, Rng& rng);

/// Mean value of shot s.
double transmittance_of(const CodedApertureSet& ca, std::size_t shot);

/// Snaps each entry to the nearest of `levels` (strictly increasing); ties go
/// to the smaller level.
CodedApertureSet quantize_for_export(const CodedApertureSet& ca, std::span<const double> levels);

enum class CaInit {
  Binary01,   // Uniform(0.4, 0.6)
  BinaryPM1,  // Uniform(-0.1, 0.1)
  Bernoulli,  // {0, 1} with probability 1/2
};

CodedApertureSet initial_block(const CaShape& shape, CaInit init, Rng& rng);

}  // namespace caed
