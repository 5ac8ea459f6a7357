#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "caed/ca_model.hpp"

namespace caed {

enum class Activation { Identity, Relu, Sigmoid, Softmax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::Identity;

  std::size_t inputs() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t outputs() const { return static_cast<std::size_t>(weights.rows()); }
};

/// Stack of affine + activation layers. Softmax may only close the stack.
class DecoderNetwork {
 public:
  DecoderNetwork() = default;
  explicit DecoderNetwork(std::vector<DenseLayer> layers);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t input_size() const { return layers_.front().inputs(); }
  std::size_t output_size() const { return layers_.back().outputs(); }
  std::size_t parameter_count() const;

  /// Flattened theta: per layer, weights row-major followed by bias.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> theta);

  bool operator==(const DecoderNetwork& other) const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Glorot-uniform weights, zero biases. `sizes` has one more entry than
/// `activations`.
DecoderNetwork init_network(std::span<const std::size_t> sizes, std::span<const Activation> activations,
                            Rng& rng);

/// Per-layer inputs and post-activation outputs of a batched forward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> outputs;
};

/// Column-batched forward pass; x is input_size x B.
Eigen::MatrixXd forward(const DecoderNetwork& net, const Eigen::MatrixXd& x, ForwardCache* cache = nullptr);

/// Where an upstream gradient is taken: on the network output, or on the
/// final layer's pre-activation (as produced by the fused softmax/cross-entropy).
enum class GradientAt { Output, PreActivation };

struct NetworkGradient {
  std::vector<double> params;  // same layout as DecoderNetwork::parameters()
  Eigen::MatrixXd input;       // input_size x B
};

NetworkGradient backward(const DecoderNetwork& net, const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                         GradientAt at = GradientAt::Output);

enum class LossKind { Mse, CrossEntropy };

/// Batch-mean loss and its gradient. For CrossEntropy the gradient is the
/// fused softmax form (p - onehot) / B on the final pre-activation.
struct LossResult {
  double value = 0.0;
  Eigen::MatrixXd grad;
  GradientAt at = GradientAt::Output;
};

/// MSE: mean over the batch of the per-sample mean squared difference.
/// CrossEntropy: `target` columns must be one-hot.
LossResult loss(LossKind kind, const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target);

/// Cross-entropy against class indices.
LossResult cross_entropy(const Eigen::MatrixXd& probabilities, std::span<const int> labels);

/// Index of the largest entry; ties go to the lowest index.
std::size_t predict_class(std::span<const double> output);

}  // namespace caed
