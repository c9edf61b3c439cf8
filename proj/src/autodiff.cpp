#include "advrl/autodiff.hpp"

#include <algorithm>

#include "advrl/ops.hpp"

namespace advrl {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Multiply: return "multiply";
    case OpKind::MatMul: return "matmul";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::MaxPool2d: return "max_pool2d";
    case OpKind::Relu: return "relu";
    case OpKind::Reshape: return "reshape";
    case OpKind::Softmax: return "softmax";
    case OpKind::CrossEntropy: return "cross_entropy";
    case OpKind::Sum: return "sum";
  }
  return "unknown";
}

const Tensor* Gradients::find(NodeId id) const {
  if (id.index >= grads_.size() || !grads_[id.index]) return nullptr;
  return &*grads_[id.index];
}

const Tensor& Gradients::at(NodeId id) const {
  const Tensor* g = find(id);
  if (!g) throw std::out_of_range("no gradient recorded for node " + std::to_string(id.index));
  return *g;
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id.index >= nodes_.size())
    throw std::out_of_range("node " + std::to_string(id.index) + " not on this tape");
  return nodes_[id.index];
}

NodeId Tape::push(OpKind kind, std::initializer_list<NodeId> inputs, Tensor value) {
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  if (recording_) {
    for (NodeId in : inputs) {
      n.inputs[n.arity++] = in.index;
      n.needs_grad = n.needs_grad || nodes_[in.index].needs_grad;
    }
  }
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

NodeId Tape::leaf(Tensor value, bool requires_grad) {
  NodeId id = push(OpKind::Leaf, {}, std::move(value));
  nodes_.back().needs_grad = recording_ && requires_grad;
  return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
  return push(OpKind::Add, {a, b}, ops::add(value(a), value(b)));
}

NodeId Tape::multiply(NodeId a, NodeId b) {
  return push(OpKind::Multiply, {a, b}, ops::multiply(value(a), value(b)));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  return push(OpKind::MatMul, {a, b}, ops::matmul(value(a), value(b)));
}

NodeId Tape::conv2d(NodeId input, NodeId weight, NodeId bias) {
  return push(OpKind::Conv2d, {input, weight, bias},
              ops::conv2d(value(input), value(weight), value(bias)));
}

NodeId Tape::max_pool2d(NodeId input) {
  std::vector<std::size_t> winners;
  Tensor out = ops::max_pool2d(value(input), winners);
  NodeId id = push(OpKind::MaxPool2d, {input}, std::move(out));
  if (recording_) nodes_.back().winners = std::move(winners);
  return id;
}

NodeId Tape::relu(NodeId a) { return push(OpKind::Relu, {a}, ops::relu(value(a))); }

NodeId Tape::reshape(NodeId a, Shape shape) {
  return push(OpKind::Reshape, {a}, ops::reshape(value(a), std::move(shape)));
}

NodeId Tape::flatten(NodeId a) { return reshape(a, Shape{value(a).size()}); }

NodeId Tape::softmax(NodeId a) { return push(OpKind::Softmax, {a}, ops::softmax(value(a))); }

NodeId Tape::cross_entropy(NodeId logits, std::size_t target) {
  NodeId id = push(OpKind::CrossEntropy, {logits}, ops::cross_entropy(value(logits), target));
  if (recording_) {
    nodes_.back().target = target;
    nodes_.back().saved = ops::softmax(value(logits));
  }
  return id;
}

NodeId Tape::sum(NodeId a) { return push(OpKind::Sum, {a}, ops::sum(value(a))); }

namespace {

void accumulate(std::optional<Tensor>& slot, Tensor g) {
  if (!slot) {
    slot = std::move(g);
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) (*slot)[i] += g[i];
}

// Gradient of an operand that may have been broadcast from a scalar.
Tensor reduce_to(const Tensor& operand, Tensor g) {
  if (operand.shape() == g.shape()) return g;
  return ops::sum(g);
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& g, Tensor* gx,
                     Tensor* gw, Tensor* gb) {
  const std::size_t channels = x.dim(0), height = x.dim(1), width = x.dim(2);
  const std::size_t outs = w.dim(0), k = w.dim(2);
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto wd = static_cast<std::ptrdiff_t>(width);
  const double* px = x.data().data();
  const double* pw = w.data().data();
  const double* pg = g.data().data();
  for (std::size_t o = 0; o < outs; ++o) {
    const double* gplane = pg + o * height * width;
    if (gb) {
      double total = 0.0;
      for (std::size_t i = 0; i < height * width; ++i) total += gplane[i];
      (*gb)[o] = total;
    }
    for (std::size_t c = 0; c < channels; ++c) {
      const double* src = px + c * height * width;
      double* gsrc = gx ? gx->data().data() + c * height * width : nullptr;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const std::size_t widx = ((o * channels + c) * k + ky) * k + kx;
          const double wv = pw[widx];
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(wd, wd - dx);
          double wacc = 0.0;
          for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, -dy);
               y < std::min<std::ptrdiff_t>(h, h - dy); ++y) {
            const double* grow = gplane + y * wd;
            const std::ptrdiff_t off = (y + dy) * wd + dx;
            if (gsrc) {
              double* dst = gsrc + off;
              for (std::ptrdiff_t xx = x0; xx < x1; ++xx) dst[xx] += wv * grow[xx];
            }
            if (gw) {
              const double* srow = src + off;
              for (std::ptrdiff_t xx = x0; xx < x1; ++xx) wacc += srow[xx] * grow[xx];
            }
          }
          if (gw) (*gw)[widx] = wacc;
        }
      }
    }
  }
}

}  // namespace

Gradients Tape::backward(NodeId loss) const {
  if (!recording_) throw std::logic_error("backward: tape was built with recording disabled");
  const Node& root = node(loss);
  if (root.value.size() != 1 || root.value.rank() != 0)
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     to_string(root.value.shape()));

  std::vector<std::optional<Tensor>> grads(nodes_.size());
  if (!root.needs_grad) return Gradients(std::move(grads));
  grads[loss.index] = Tensor::scalar(1.0);

  for (std::size_t idx = loss.index + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (n.kind == OpKind::Leaf || !grads[idx]) continue;
    Tensor g = std::move(*grads[idx]);
    grads[idx].reset();

    auto wants = [&](std::size_t slot) { return nodes_[n.inputs[slot]].needs_grad; };
    auto in = [&](std::size_t slot) -> const Tensor& { return nodes_[n.inputs[slot]].value; };
    auto give = [&](std::size_t slot, Tensor t) { accumulate(grads[n.inputs[slot]], std::move(t)); };

    switch (n.kind) {
      case OpKind::Add:
        if (wants(0)) give(0, reduce_to(in(0), g));
        if (wants(1)) give(1, reduce_to(in(1), g));
        break;
      case OpKind::Multiply:
        if (wants(0)) give(0, reduce_to(in(0), ops::multiply(g, in(1))));
        if (wants(1)) give(1, reduce_to(in(1), ops::multiply(g, in(0))));
        break;
      case OpKind::MatMul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        const std::size_t m = a.dim(0), k = a.dim(1);
        const std::size_t cols = b.rank() == 2 ? b.dim(1) : 1;
        if (wants(0)) {
          Tensor ga(a.shape());
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              double acc = 0.0;
              for (std::size_t c = 0; c < cols; ++c) acc += g[i * cols + c] * b[j * cols + c];
              ga[i * k + j] = acc;
            }
          give(0, std::move(ga));
        }
        if (wants(1)) {
          Tensor gb(b.shape());
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              const double av = a[i * k + j];
              for (std::size_t c = 0; c < cols; ++c) gb[j * cols + c] += av * g[i * cols + c];
            }
          give(1, std::move(gb));
        }
        break;
      }
      case OpKind::Conv2d: {
        std::optional<Tensor> gx, gw, gb;
        if (wants(0)) gx.emplace(in(0).shape());
        if (wants(1)) gw.emplace(in(1).shape());
        if (wants(2)) gb.emplace(in(2).shape());
        conv2d_backward(in(0), in(1), g, gx ? &*gx : nullptr, gw ? &*gw : nullptr,
                        gb ? &*gb : nullptr);
        if (gx) give(0, std::move(*gx));
        if (gw) give(1, std::move(*gw));
        if (gb) give(2, std::move(*gb));
        break;
      }
      case OpKind::MaxPool2d: {
        Tensor gx(in(0).shape());
        for (std::size_t o = 0; o < n.winners.size(); ++o) gx[n.winners[o]] += g[o];
        give(0, std::move(gx));
        break;
      }
      case OpKind::Relu: {
        Tensor gx(in(0).shape());
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = in(0)[i] > 0.0 ? g[i] : 0.0;
        give(0, std::move(gx));
        break;
      }
      case OpKind::Reshape:
        give(0, g.reshaped(in(0).shape()));
        break;
      case OpKind::Softmax: {
        const Tensor& p = n.value;
        double dot = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) dot += g[i] * p[i];
        Tensor gx(p.shape());
        for (std::size_t i = 0; i < p.size(); ++i) gx[i] = p[i] * (g[i] - dot);
        give(0, std::move(gx));
        break;
      }
      case OpKind::CrossEntropy: {
        Tensor gx = n.saved;
        gx[n.target] -= 1.0;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= g[0];
        give(0, std::move(gx));
        break;
      }
      case OpKind::Sum:
        give(0, Tensor(in(0).shape(), g[0]));
        break;
      case OpKind::Leaf:
        break;
    }
  }

  // Only leaves keep their gradients.
  for (std::size_t idx = 0; idx < nodes_.size(); ++idx)
    if (nodes_[idx].kind != OpKind::Leaf || !nodes_[idx].needs_grad) grads[idx].reset();
  for (std::size_t idx = 0; idx <= loss.index; ++idx)
    if (nodes_[idx].kind == OpKind::Leaf && nodes_[idx].needs_grad && !grads[idx])
      grads[idx] = Tensor(nodes_[idx].value.shape());
  return Gradients(std::move(grads));
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace advrl
