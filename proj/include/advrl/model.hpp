#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "advrl/autodiff.hpp"
#include "advrl/dataset.hpp"
#include "advrl/tensor.hpp"

namespace advrl {

struct LayerSpec {
  enum class Kind { Conv, Relu, MaxPool, Flatten, Dense, Softmax };
  Kind kind = Kind::Relu;
  std::size_t units = 0;   // conv output channels or dense output width
  std::size_t kernel = 0;  // conv only

  static LayerSpec conv(std::size_t channels, std::size_t kernel) { return {Kind::Conv, channels, kernel}; }
  static LayerSpec dense(std::size_t width) { return {Kind::Dense, width, 0}; }
  static LayerSpec relu() { return {Kind::Relu, 0, 0}; }
  static LayerSpec max_pool() { return {Kind::MaxPool, 0, 0}; }
  static LayerSpec flatten() { return {Kind::Flatten, 0, 0}; }
  static LayerSpec softmax() { return {Kind::Softmax, 0, 0}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

const char* layer_name(LayerSpec::Kind kind);
LayerSpec::Kind parse_layer_kind(const std::string& name);

struct Architecture {
  Shape input{1, 28, 28};
  std::vector<LayerSpec> layers;
  std::size_t classes = 10;

  /// conv(8,3)-relu-pool-conv(16,3)-relu-pool-flatten-dense(64)-relu-dense(K)-softmax.
  static Architecture reference(std::size_t classes = 10, Shape input = {1, 28, 28});

  /// Throws std::invalid_argument unless layer shapes chain and the network
  /// ends in dense(K) followed by softmax.
  void validate() const;
  /// Output shape of every layer, in order.
  std::vector<Shape> layer_shapes() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double learning_rate = 0.0;
  std::size_t batch_size = 0;
  std::size_t train_examples = 0;
  std::optional<double> final_train_loss;
  std::optional<double> test_accuracy;
  std::string dataset;
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

/// Nodes produced by wiring a model into a tape.
struct ForwardGraph {
  NodeId logits;
  std::optional<NodeId> penultimate;
  std::vector<NodeId> params;
};

struct InputEvaluation {
  std::vector<double> probabilities;
  double loss = 0.0;
  Tensor input_gradient;
};

class Model {
 public:
  Model(Architecture architecture, std::vector<NamedTensor> params, TrainingMetadata metadata = {});

  /// Glorot-uniform weights, zero biases, drawn from the seed.
  static Model initialize(const Architecture& architecture, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  std::size_t classes() const { return arch_.classes; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  std::vector<NamedTensor>& parameters() { return params_; }
  const TrainingMetadata& metadata() const { return meta_; }
  TrainingMetadata& metadata() { return meta_; }

  ForwardGraph build(Tape& tape, NodeId input, bool params_require_grad) const;

  std::vector<double> predict_probabilities(const Tensor& image) const;
  std::size_t predict(const Tensor& image) const;

  /// Softmax cross-entropy against `label` and its exact gradient with
  /// respect to the image, parameters held fixed.
  std::pair<double, Tensor> loss_and_input_gradient(const Tensor& image, std::size_t label) const;
  /// One forward/backward pass returning probabilities, loss and input gradient.
  InputEvaluation evaluate(const Tensor& image, std::size_t label) const;

  /// Activations feeding the final dense layer.
  std::vector<double> penultimate_features(const Tensor& image) const;

 private:
  void check_image(const Tensor& image) const;

  Architecture arch_;
  std::vector<NamedTensor> params_;
  TrainingMetadata meta_;
};

std::size_t argmax(const std::vector<double>& values);

/// Mini-batch gradient descent on mean softmax cross-entropy. Deterministic
/// for a given seed. When `test` is given its accuracy is recorded.
Model train(const Architecture& architecture, const Dataset& train_set, const Dataset* test,
            const TrainConfig& config);

double accuracy(const Model& model, const Dataset& dataset);

}  // namespace advrl
