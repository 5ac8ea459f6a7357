#include "caed/ca_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "caed/error.hpp"

namespace caed {

namespace {

void require_positive(const CaShape& shape) {
  if (shape.shots == 0 || shape.rows == 0 || shape.cols == 0 || shape.planes == 0) {
    throw ShapeError("coded aperture dimensions must all be >= 1");
  }
}

void require_divides(const char* axis, std::size_t kernel, std::size_t full) {
  if (kernel == 0 || full % kernel != 0) {
    throw ShapeError(std::string(axis) + ": kernel size " + std::to_string(kernel) +
                     " does not divide aperture size " + std::to_string(full));
  }
}

}  // namespace

CodedApertureSet::CodedApertureSet(CaShape shape, double fill)
    : shape_(shape), values_(shape.size(), fill) {
  require_positive(shape_);
}

CodedApertureSet::CodedApertureSet(CaShape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  require_positive(shape_);
  if (values_.size() != shape_.size()) {
    throw ShapeError("coded aperture value count " + std::to_string(values_.size()) +
                     " does not match shape size " + std::to_string(shape_.size()));
  }
}

std::span<double> CodedApertureSet::shot(std::size_t s) {
  if (s >= shape_.shots) throw ShapeError("shot index out of range");
  return {values_.data() + s * shape_.shot_size(), shape_.shot_size()};
}

std::span<const double> CodedApertureSet::shot(std::size_t s) const {
  if (s >= shape_.shots) throw ShapeError("shot index out of range");
  return {values_.data() + s * shape_.shot_size(), shape_.shot_size()};
}

void CodedApertureSet::check_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) throw DomainError("coded aperture contains a non-finite value");
  }
}

FilterBank gaussian_filter_bank(std::size_t filters, std::size_t bands) {
  if (filters == 0 || bands == 0) throw DomainError("filter bank needs >= 1 filter and band");
  FilterBank bank{filters, bands, std::vector<double>(filters * bands)};
  const double spacing = static_cast<double>(bands) / static_cast<double>(filters);
  const double width = std::max(0.5, 0.6 * spacing);
  for (std::size_t v = 0; v < filters; ++v) {
    const double center = (static_cast<double>(v) + 0.5) * spacing - 0.5;
    for (std::size_t l = 0; l < bands; ++l) {
      const double d = (static_cast<double>(l) - center) / width;
      bank.weights[v * bands + l] = std::exp(-0.5 * d * d);
    }
  }
  return bank;
}

CaParameterization CaParameterization::dense(CodedApertureSet values) {
  CaParameterization p;
  p.kind_ = ParamKind::Dense;
  p.rows_ = values.rows();
  p.cols_ = values.cols();
  p.block_ = std::move(values);
  p.validate();
  return p;
}

CaParameterization CaParameterization::kronecker(CodedApertureSet kernel, std::size_t rows,
                                                 std::size_t cols) {
  CaParameterization p;
  p.kind_ = ParamKind::Kronecker;
  p.block_ = std::move(kernel);
  p.rows_ = rows;
  p.cols_ = cols;
  p.validate();
  return p;
}

CaParameterization CaParameterization::colored(CodedApertureSet weights, FilterBank bank,
                                               std::size_t rows, std::size_t cols) {
  CaParameterization p;
  p.kind_ = ParamKind::Colored;
  p.block_ = std::move(weights);
  p.bank_ = std::move(bank);
  p.rows_ = rows;
  p.cols_ = cols;
  p.validate();
  return p;
}

void CaParameterization::validate() const {
  require_positive(block_.shape());
  if (kind_ == ParamKind::Dense) return;
  require_divides("rows", block_.rows(), rows_);
  require_divides("cols", block_.cols(), cols_);
  if (kind_ == ParamKind::Colored) {
    if (bank_.weights.size() != bank_.filters * bank_.bands || bank_.filters == 0) {
      throw ShapeError("filter bank weights must hold filters x bands values");
    }
    if (block_.planes() != bank_.filters) {
      throw ShapeError("colored weights have " + std::to_string(block_.planes()) +
                       " planes but the filter bank has " + std::to_string(bank_.filters) +
                       " filters");
    }
    if (bank_.filters > bank_.bands) {
      throw DomainError("colored aperture needs no more filters than bands");
    }
    for (double w : bank_.weights) {
      if (!(w >= 0.0 && w <= 1.0)) throw DomainError("filter bank entries must lie in [0, 1]");
    }
  }
}

CaShape CaParameterization::output_shape() const {
  const std::size_t planes = kind_ == ParamKind::Colored ? bank_.bands : block_.planes();
  return {block_.shots(), rows_, cols_, planes};
}

namespace {

// Per-kernel-cell spectral response of a colored aperture.
CodedApertureSet colored_kernel(const CodedApertureSet& weights, const FilterBank& bank) {
  CodedApertureSet kernel({weights.shots(), weights.rows(), weights.cols(), bank.bands});
  for (std::size_t s = 0; s < weights.shots(); ++s)
    for (std::size_t i = 0; i < weights.rows(); ++i)
      for (std::size_t j = 0; j < weights.cols(); ++j)
        for (std::size_t l = 0; l < bank.bands; ++l) {
          double acc = 0.0;
          for (std::size_t v = 0; v < bank.filters; ++v) acc += bank.at(v, l) * weights.at(s, i, j, v);
          kernel.at(s, i, j, l) = acc;
        }
  return kernel;
}

CodedApertureSet tile(const CodedApertureSet& kernel, std::size_t rows, std::size_t cols) {
  CodedApertureSet out({kernel.shots(), rows, cols, kernel.planes()});
  const std::size_t kr = kernel.rows();
  const std::size_t kc = kernel.cols();
  for (std::size_t s = 0; s < kernel.shots(); ++s)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t l = 0; l < kernel.planes(); ++l)
          out.at(s, i, j, l) = kernel.at(s, i % kr, j % kc, l);
  return out;
}

// Sum of upstream gradients over every tile position each kernel cell was copied to.
CodedApertureSet untile(const CaShape& kernel_shape, const CaShape& full,
                        std::span<const double> upstream) {
  CodedApertureSet grad(kernel_shape);
  const CodedApertureSet up(full, std::vector<double>(upstream.begin(), upstream.end()));
  for (std::size_t s = 0; s < full.shots; ++s)
    for (std::size_t i = 0; i < full.rows; ++i)
      for (std::size_t j = 0; j < full.cols; ++j)
        for (std::size_t l = 0; l < full.planes; ++l)
          grad.at(s, i % kernel_shape.rows, j % kernel_shape.cols, l) += up.at(s, i, j, l);
  return grad;
}

}  // namespace

CodedApertureSet expand(const CaParameterization& param) {
  switch (param.kind()) {
    case ParamKind::Dense:
      return param.trainable_block();
    case ParamKind::Kronecker: {
      const CaShape out = param.output_shape();
      return tile(param.trainable_block(), out.rows, out.cols);
    }
    case ParamKind::Colored: {
      const CaShape out = param.output_shape();
      return tile(colored_kernel(param.trainable_block(), param.filter_bank()), out.rows, out.cols);
    }
  }
  return {};
}

std::vector<double> expand_backward(const CaParameterization& param,
                                    std::span<const double> upstream) {
  const CaShape full = param.output_shape();
  if (upstream.size() != full.size()) {
    throw ShapeError("expand_backward: upstream gradient has " + std::to_string(upstream.size()) +
                     " entries, expected " + std::to_string(full.size()));
  }
  const CodedApertureSet& block = param.trainable_block();
  switch (param.kind()) {
    case ParamKind::Dense:
      return {upstream.begin(), upstream.end()};
    case ParamKind::Kronecker:
      return untile(block.shape(), full, upstream).data();
    case ParamKind::Colored: {
      const FilterBank& bank = param.filter_bank();
      const CaShape kshape{block.shots(), block.rows(), block.cols(), bank.bands};
      const CodedApertureSet dkernel = untile(kshape, full, upstream);
      CodedApertureSet dweights(block.shape());
      for (std::size_t s = 0; s < block.shots(); ++s)
        for (std::size_t i = 0; i < block.rows(); ++i)
          for (std::size_t j = 0; j < block.cols(); ++j)
            for (std::size_t v = 0; v < bank.filters; ++v) {
              double acc = 0.0;
              for (std::size_t l = 0; l < bank.bands; ++l) acc += bank.at(v, l) * dkernel.at(s, i, j, l);
              dweights.at(s, i, j, v) = acc;
            }
      return dweights.data();
    }
  }
  return {};
}

std::size_t trainable_parameter_count(const CaParameterization& param) {
  return param.trainable_block().size();
}

double noise_amplitude(const CaNoise& noise) {
  if (const auto* u = std::get_if<UniformNoise>(&noise)) {
    return std::max(std::abs(u->lo), std::abs(u->hi));
  }
  return std::abs(std::get<GaussianNoise>(noise).bound);
}

CodedApertureSet inject_ca_noise(const CodedApertureSet& ca, const NoiseSpec& spec, Rng& rng) {
  CodedApertureSet out = ca;
  if (!spec.ca_noise) return out;
  const double amplitude = noise_amplitude(*spec.ca_noise);
  if (amplitude == 0.0) return out;
  double peak = 0.0;
  for (double v : ca.data()) peak = std::max(peak, std::abs(v));
  if (!(amplitude < peak)) {
    throw DomainError("manufacturing noise amplitude " + std::to_string(amplitude) +
                      " is not below the aperture peak " + std::to_string(peak));
  }
  if (const auto* u = std::get_if<UniformNoise>(&*spec.ca_noise)) {
    if (u->hi < u->lo) throw DomainError("uniform noise needs lo <= hi");
    std::uniform_real_distribution<double> dist(u->lo, u->hi);
    for (double& v : out.data()) v += dist(rng);
  } else {
    const auto& g = std::get<GaussianNoise>(*spec.ca_noise);
    if (g.sigma < 0.0) throw DomainError("gaussian noise sigma must be >= 0");
    std::normal_distribution<double> dist(g.mean, g.sigma);
    for (double& v : out.data()) v += std::clamp(dist(rng), -g.bound, g.bound);
  }
  return out;
}

double transmittance_of(const CodedApertureSet& ca, std::size_t shot) {
  const auto values = ca.shot(shot);
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

CodedApertureSet quantize_for_export(const CodedApertureSet& ca, std::span<const double> levels) {
  if (levels.empty()) throw DomainError("quantization needs at least one level");
  for (std::size_t d = 1; d < levels.size(); ++d) {
    if (!(levels[d] > levels[d - 1])) throw DomainError("quantization levels must be strictly increasing");
  }
  CodedApertureSet out = ca;
  for (double& v : out.data()) {
    double best = levels[0];
    double best_dist = std::abs(v - levels[0]);
    for (std::size_t d = 1; d < levels.size(); ++d) {
      const double dist = std::abs(v - levels[d]);
      if (dist < best_dist) {  // strict: ties keep the smaller level
        best = levels[d];
        best_dist = dist;
      }
    }
    v = best;
  }
  return out;
}

CodedApertureSet initial_block(const CaShape& shape, CaInit init, Rng& rng) {
  CodedApertureSet out(shape);
  switch (init) {
    case CaInit::Binary01: {
      std::uniform_real_distribution<double> dist(0.4, 0.6);
      for (double& v : out.data()) v = dist(rng);
      break;
    }
    case CaInit::BinaryPM1: {
      std::uniform_real_distribution<double> dist(-0.1, 0.1);
      for (double& v : out.data()) v = dist(rng);
      break;
    }
    case CaInit::Bernoulli: {
      std::bernoulli_distribution dist(0.5);
      for (double& v : out.data()) v = dist(rng) ? 1.0 : 0.0;
      break;
    }
  }
  return out;
}

}  // namespace caed
