#include "caed/decoder.hpp"

#include <cfloat>
#include <cmath>

#include "caed/error.hpp"

namespace caed {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "softmax") return Activation::Softmax;
  throw DomainError("unknown activation '" + name + "'");
}

DecoderNetwork::DecoderNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("decoder needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0) throw ShapeError("empty decoder layer");
    if (layer.bias.size() != layer.weights.rows()) throw ShapeError("bias length does not match layer outputs");
    if (k > 0 && layer.inputs() != layers_[k - 1].outputs()) {
      throw ShapeError("layer " + std::to_string(k) + " expects " + std::to_string(layer.inputs()) +
                       " inputs but the previous layer has " + std::to_string(layers_[k - 1].outputs()) +
                       " outputs");
    }
    if (layer.activation == Activation::Softmax && k + 1 != layers_.size()) {
      throw ShapeError("softmax is only allowed on the final layer");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) throw DomainError("non-finite decoder parameter");
  }
}

std::size_t DecoderNetwork::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_) count += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  return count;
}

std::vector<double> DecoderNetwork::parameters() const {
  std::vector<double> theta;
  theta.reserve(parameter_count());
  for (const auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) theta.push_back(layer.weights(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) theta.push_back(layer.bias(r));
  }
  return theta;
}

void DecoderNetwork::set_parameters(std::span<const double> theta) {
  if (theta.size() != parameter_count()) throw ShapeError("parameter vector length mismatch");
  std::size_t k = 0;
  for (auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = theta[k++];
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = theta[k++];
  }
}

bool DecoderNetwork::operator==(const DecoderNetwork& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& a = layers_[k];
    const auto& b = other.layers_[k];
    if (a.activation != b.activation || a.weights.rows() != b.weights.rows() ||
        a.weights.cols() != b.weights.cols() || a.weights != b.weights || a.bias != b.bias) {
      return false;
    }
  }
  return true;
}

DecoderNetwork init_network(std::span<const std::size_t> sizes, std::span<const Activation> activations,
                            Rng& rng) {
  if (sizes.size() < 2) throw ShapeError("decoder needs at least one layer (two sizes)");
  if (activations.size() + 1 != sizes.size()) throw ShapeError("need one activation per layer");
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const auto fan_in = static_cast<Eigen::Index>(sizes[k]);
    const auto fan_out = static_cast<Eigen::Index>(sizes[k + 1]);
    if (fan_in == 0 || fan_out == 0) throw ShapeError("layer sizes must be >= 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out), activations[k]};
    for (Eigen::Index r = 0; r < fan_out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = dist(rng);
    layers.push_back(std::move(layer));
  }
  return DecoderNetwork(std::move(layers));
}

namespace {

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Identity:
      return z;
    case Activation::Relu:
      return z.cwiseMax(0.0);
    case Activation::Sigmoid:
      return z.unaryExpr([](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
    case Activation::Softmax: {
      Eigen::MatrixXd p(z.rows(), z.cols());
      for (Eigen::Index b = 0; b < z.cols(); ++b) {
        const double top = z.col(b).maxCoeff();
        p.col(b) = (z.col(b).array() - top).exp().matrix();
        p.col(b) /= p.col(b).sum();
      }
      return p;
    }
  }
  return z;
}

// Maps a gradient on the activation output to the pre-activation.
Eigen::MatrixXd activation_backward(Activation a, const Eigen::MatrixXd& out, const Eigen::MatrixXd& upstream) {
  switch (a) {
    case Activation::Identity:
      return upstream;
    case Activation::Relu:
      return (out.array() > 0.0).select(upstream, 0.0);
    case Activation::Sigmoid:
      return (upstream.array() * out.array() * (1.0 - out.array())).matrix();
    case Activation::Softmax: {
      Eigen::MatrixXd dz(out.rows(), out.cols());
      for (Eigen::Index b = 0; b < out.cols(); ++b) {
        const double dot = out.col(b).dot(upstream.col(b));
        dz.col(b) = (out.col(b).array() * (upstream.col(b).array() - dot)).matrix();
      }
      return dz;
    }
  }
  return upstream;
}

}  // namespace

Eigen::MatrixXd forward(const DecoderNetwork& net, const Eigen::MatrixXd& x, ForwardCache* cache) {
  if (net.layers().empty()) throw ShapeError("decoder has no layers");
  if (static_cast<std::size_t>(x.rows()) != net.input_size()) {
    throw ShapeError("decoder input has " + std::to_string(x.rows()) + " rows, expected " +
                     std::to_string(net.input_size()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  Eigen::MatrixXd a = x;
  for (const auto& layer : net.layers()) {
    Eigen::MatrixXd z = layer.weights * a;
    z.colwise() += layer.bias;
    Eigen::MatrixXd out = activate(layer.activation, z);
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->outputs.push_back(out);
    }
    a = std::move(out);
  }
  return a;
}

NetworkGradient backward(const DecoderNetwork& net, const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                         GradientAt at) {
  const auto& layers = net.layers();
  if (cache.inputs.size() != layers.size() || cache.outputs.size() != layers.size()) {
    throw ShapeError("forward cache does not match the network depth");
  }
  if (upstream.rows() != cache.outputs.back().rows() || upstream.cols() != cache.outputs.back().cols()) {
    throw ShapeError("upstream gradient shape does not match the cached output");
  }
  std::vector<Eigen::MatrixXd> dweights(layers.size());
  std::vector<Eigen::VectorXd> dbias(layers.size());
  Eigen::MatrixXd grad = upstream;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& layer = layers[k];
    if (cache.inputs[k].rows() != layer.weights.cols()) throw ShapeError("stale forward cache");
    const bool fused = (k + 1 == layers.size()) && at == GradientAt::PreActivation;
    const Eigen::MatrixXd dz = fused ? grad : activation_backward(layer.activation, cache.outputs[k], grad);
    dweights[k] = dz * cache.inputs[k].transpose();
    dbias[k] = dz.rowwise().sum();
    grad = layer.weights.transpose() * dz;
  }
  NetworkGradient out;
  out.params.reserve(net.parameter_count());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    for (Eigen::Index r = 0; r < dweights[k].rows(); ++r)
      for (Eigen::Index c = 0; c < dweights[k].cols(); ++c) out.params.push_back(dweights[k](r, c));
    for (Eigen::Index r = 0; r < dbias[k].size(); ++r) out.params.push_back(dbias[k](r));
  }
  out.input = std::move(grad);
  return out;
}

LossResult loss(LossKind kind, const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols()) {
    throw ShapeError("prediction and target shapes differ");
  }
  if (prediction.cols() == 0 || prediction.rows() == 0) throw ShapeError("empty loss batch");
  const double batch = static_cast<double>(prediction.cols());
  LossResult out;
  if (kind == LossKind::Mse) {
    const double count = static_cast<double>(prediction.rows());
    const Eigen::MatrixXd diff = prediction - target;
    out.value = diff.squaredNorm() / (count * batch);
    out.grad = (2.0 / (count * batch)) * diff;
    out.at = GradientAt::Output;
    return out;
  }
  for (Eigen::Index b = 0; b < target.cols(); ++b) {
    Eigen::Index hot = -1;
    for (Eigen::Index r = 0; r < target.rows(); ++r) {
      const double t = target(r, b);
      if (t == 1.0 && hot < 0) {
        hot = r;
      } else if (t != 0.0) {
        throw DomainError("cross-entropy target column " + std::to_string(b) + " is not one-hot");
      }
    }
    if (hot < 0) throw DomainError("cross-entropy target column " + std::to_string(b) + " is not one-hot");
    out.value -= std::log(std::max(prediction(hot, b), DBL_MIN));
  }
  out.value /= batch;
  out.grad = (prediction - target) / batch;
  out.at = GradientAt::PreActivation;
  return out;
}

LossResult cross_entropy(const Eigen::MatrixXd& probabilities, std::span<const int> labels) {
  if (static_cast<std::size_t>(probabilities.cols()) != labels.size()) {
    throw ShapeError("label count does not match the batch size");
  }
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(probabilities.rows(), probabilities.cols());
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] < 0 || labels[b] >= probabilities.rows()) {
      throw DomainError("class index " + std::to_string(labels[b]) + " out of range");
    }
    onehot(labels[b], static_cast<Eigen::Index>(b)) = 1.0;
  }
  return loss(LossKind::CrossEntropy, probabilities, onehot);
}

std::size_t predict_class(std::span<const double> output) {
  if (output.empty()) throw ShapeError("cannot classify an empty output");
  std::size_t best = 0;
  for (std::size_t k = 1; k < output.size(); ++k) {
    if (output[k] > output[best]) best = k;
  }
  return best;
}

}  // namespace caed
