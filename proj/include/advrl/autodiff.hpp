#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "advrl/tensor.hpp"

namespace advrl {

enum class OpKind {
  Leaf,
  Add,
  Multiply,
  MatMul,
  Conv2d,
  MaxPool2d,
  Relu,
  Reshape,
  Softmax,
  CrossEntropy,
  Sum,
};

const char* op_name(OpKind kind);

struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

/// Gradients of a scalar loss with respect to the leaves of a tape.
class Gradients {
 public:
  explicit Gradients(std::vector<std::optional<Tensor>> grads) : grads_(std::move(grads)) {}

  /// Null when the node is not a leaf or does not require a gradient.
  const Tensor* find(NodeId id) const;
  const Tensor& at(NodeId id) const;

 private:
  std::vector<std::optional<Tensor>> grads_;
};

/// Append-only record of primitive applications. Nodes are stored in
/// creation order, which is a topological order by construction.
///
/// With recording disabled the tape keeps only values: the forward results
/// are identical, but backward() is unavailable.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  NodeId leaf(Tensor value, bool requires_grad = true);

  NodeId add(NodeId a, NodeId b);
  NodeId multiply(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId conv2d(NodeId input, NodeId weight, NodeId bias);
  NodeId max_pool2d(NodeId input);
  NodeId relu(NodeId a);
  NodeId reshape(NodeId a, Shape shape);
  NodeId flatten(NodeId a);
  NodeId softmax(NodeId a);
  NodeId cross_entropy(NodeId logits, std::size_t target);
  NodeId sum(NodeId a);

  const Tensor& value(NodeId id) const { return node(id).value; }
  OpKind kind(NodeId id) const { return node(id).kind; }

  /// Reverse-mode sweep from a scalar node. Visits each node once, in
  /// reverse creation order, skipping nodes no gradient-requiring leaf feeds.
  Gradients backward(NodeId loss) const;

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::array<std::size_t, 3> inputs{};
    std::size_t arity = 0;
    Tensor value;
    bool needs_grad = false;
    std::size_t target = 0;
    std::vector<std::size_t> winners;
    Tensor saved;
  };

  const Node& node(NodeId id) const;
  NodeId push(OpKind kind, std::initializer_list<NodeId> inputs, Tensor value);

  bool recording_;
  std::vector<Node> nodes_;
};

/// Central-difference estimate (f(x + h e_i) - f(x - h e_i)) / 2h for every
/// coordinate i.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double h);

}  // namespace advrl
