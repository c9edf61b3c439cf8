#include "advrl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "advrl/ops.hpp"

namespace advrl {

const char* layer_name(LayerSpec::Kind kind) {
  switch (kind) {
    case LayerSpec::Kind::Conv: return "conv";
    case LayerSpec::Kind::Relu: return "relu";
    case LayerSpec::Kind::MaxPool: return "maxpool";
    case LayerSpec::Kind::Flatten: return "flatten";
    case LayerSpec::Kind::Dense: return "dense";
    case LayerSpec::Kind::Softmax: return "softmax";
  }
  return "unknown";
}

LayerSpec::Kind parse_layer_kind(const std::string& name) {
  for (auto kind : {LayerSpec::Kind::Conv, LayerSpec::Kind::Relu, LayerSpec::Kind::MaxPool,
                    LayerSpec::Kind::Flatten, LayerSpec::Kind::Dense, LayerSpec::Kind::Softmax})
    if (name == layer_name(kind)) return kind;
  throw std::invalid_argument("unknown layer type '" + name + "'");
}

Architecture Architecture::reference(std::size_t classes, Shape input) {
  Architecture a;
  a.input = std::move(input);
  a.classes = classes;
  a.layers = {LayerSpec::conv(8, 3),  LayerSpec::relu(),    LayerSpec::max_pool(),
              LayerSpec::conv(16, 3), LayerSpec::relu(),    LayerSpec::max_pool(),
              LayerSpec::flatten(),   LayerSpec::dense(64), LayerSpec::relu(),
              LayerSpec::dense(classes), LayerSpec::softmax()};
  return a;
}

std::vector<Shape> Architecture::layer_shapes() const {
  std::vector<Shape> shapes;
  Shape cur = input;
  auto fail = [&](std::size_t i, const std::string& why) {
    throw std::invalid_argument("layer " + std::to_string(i) + " (" + layer_name(layers[i].kind) +
                                "): " + why + ", input shape " + to_string(cur));
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    switch (l.kind) {
      case LayerSpec::Kind::Conv:
        if (cur.size() != 3) fail(i, "needs [C,H,W] input");
        if (l.units == 0 || l.kernel == 0 || l.kernel % 2 == 0) fail(i, "needs channels > 0 and odd kernel");
        cur = {l.units, cur[1], cur[2]};
        break;
      case LayerSpec::Kind::MaxPool:
        if (cur.size() != 3 || cur[1] < 2 || cur[2] < 2) fail(i, "needs [C,H,W] input with H,W >= 2");
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      case LayerSpec::Kind::Flatten:
        cur = {element_count(cur)};
        break;
      case LayerSpec::Kind::Dense:
        if (cur.size() != 1) fail(i, "needs flat input");
        if (l.units == 0) fail(i, "needs width > 0");
        cur = {l.units};
        break;
      case LayerSpec::Kind::Relu:
        break;
      case LayerSpec::Kind::Softmax:
        if (cur.size() != 1) fail(i, "needs flat input");
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

void Architecture::validate() const {
  if (input.size() != 3 || element_count(input) == 0)
    throw std::invalid_argument("architecture input must be [channels,height,width], got " + to_string(input));
  if (classes < 2) throw std::invalid_argument("architecture needs at least 2 classes");
  if (layers.size() < 2 || layers.back().kind != LayerSpec::Kind::Softmax ||
      layers[layers.size() - 2].kind != LayerSpec::Kind::Dense ||
      layers[layers.size() - 2].units != classes)
    throw std::invalid_argument("architecture must end with dense(" + std::to_string(classes) +
                                ") followed by softmax");
  for (std::size_t i = 0; i + 1 < layers.size(); ++i)
    if (layers[i].kind == LayerSpec::Kind::Softmax)
      throw std::invalid_argument("softmax is only allowed as the final layer");
  layer_shapes();
}

Model::Model(Architecture architecture, std::vector<NamedTensor> params, TrainingMetadata metadata)
    : arch_(std::move(architecture)), params_(std::move(params)), meta_(std::move(metadata)) {
  arch_.validate();
  const auto shapes = arch_.layer_shapes();
  std::size_t p = 0;
  Shape cur = arch_.input;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const auto& l = arch_.layers[i];
    if (l.kind == LayerSpec::Kind::Conv || l.kind == LayerSpec::Kind::Dense) {
      const Shape w = l.kind == LayerSpec::Kind::Conv ? Shape{l.units, cur[0], l.kernel, l.kernel}
                                                      : Shape{l.units, cur[0]};
      if (p + 2 > params_.size() || params_[p].value.shape() != w ||
          params_[p + 1].value.shape() != Shape{l.units})
        throw std::invalid_argument("parameters do not match layer " + std::to_string(i));
      p += 2;
    }
    cur = shapes[i];
  }
  if (p != params_.size()) throw std::invalid_argument("unexpected extra parameters");
  for (const auto& np : params_)
    if (!np.value.all_finite()) throw std::invalid_argument("parameter " + np.name + " is not finite");
}

Model Model::initialize(const Architecture& architecture, std::uint64_t seed) {
  architecture.validate();
  std::mt19937_64 rng(seed);
  std::vector<NamedTensor> params;
  Shape cur = architecture.input;
  const auto shapes = architecture.layer_shapes();
  for (std::size_t i = 0; i < architecture.layers.size(); ++i) {
    const auto& l = architecture.layers[i];
    if (l.kind == LayerSpec::Kind::Conv || l.kind == LayerSpec::Kind::Dense) {
      const bool conv = l.kind == LayerSpec::Kind::Conv;
      const Shape wshape = conv ? Shape{l.units, cur[0], l.kernel, l.kernel} : Shape{l.units, cur[0]};
      const double receptive = conv ? static_cast<double>(l.kernel * l.kernel) : 1.0;
      const double fan_in = static_cast<double>(cur[0]) * receptive;
      const double fan_out = static_cast<double>(l.units) * receptive;
      const double s = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-s, s);
      Tensor w(wshape);
      for (auto& v : w.data()) v = dist(rng);
      const std::string prefix = "layer" + std::to_string(i);
      params.push_back({prefix + ".weight", std::move(w)});
      params.push_back({prefix + ".bias", Tensor(Shape{l.units})});
    }
    cur = shapes[i];
  }
  TrainingMetadata meta;
  meta.seed = seed;
  return Model(architecture, std::move(params), meta);
}

ForwardGraph Model::build(Tape& tape, NodeId input, bool params_require_grad) const {
  ForwardGraph g;
  for (const auto& np : params_) g.params.push_back(tape.leaf(np.value, params_require_grad));
  NodeId cur = input;
  std::size_t p = 0;
  std::size_t last_dense = 0;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i)
    if (arch_.layers[i].kind == LayerSpec::Kind::Dense) last_dense = i;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    switch (arch_.layers[i].kind) {
      case LayerSpec::Kind::Conv:
        cur = tape.conv2d(cur, g.params[p], g.params[p + 1]);
        p += 2;
        break;
      case LayerSpec::Kind::Dense:
        if (i == last_dense) g.penultimate = cur;
        cur = tape.add(tape.matmul(g.params[p], cur), g.params[p + 1]);
        p += 2;
        break;
      case LayerSpec::Kind::Relu: cur = tape.relu(cur); break;
      case LayerSpec::Kind::MaxPool: cur = tape.max_pool2d(cur); break;
      case LayerSpec::Kind::Flatten: cur = tape.flatten(cur); break;
      case LayerSpec::Kind::Softmax: break;
    }
  }
  g.logits = cur;
  return g;
}

void Model::check_image(const Tensor& image) const {
  if (image.shape() != arch_.input)
    throw ShapeError("model expects input " + to_string(arch_.input) + ", got " +
                     to_string(image.shape()));
}

std::vector<double> Model::predict_probabilities(const Tensor& image) const {
  check_image(image);
  Tape tape(false);
  const auto g = build(tape, tape.leaf(image, false), false);
  return ops::softmax(tape.value(g.logits)).values();
}

std::size_t Model::predict(const Tensor& image) const { return argmax(predict_probabilities(image)); }

InputEvaluation Model::evaluate(const Tensor& image, std::size_t label) const {
  check_image(image);
  if (label >= classes())
    throw std::out_of_range("label " + std::to_string(label) + " outside [0," +
                            std::to_string(classes()) + ")");
  Tape tape;
  const NodeId x = tape.leaf(image, true);
  const auto g = build(tape, x, false);
  const NodeId loss = tape.cross_entropy(g.logits, label);
  InputEvaluation out;
  out.probabilities = ops::softmax(tape.value(g.logits)).values();
  out.loss = tape.value(loss).item();
  out.input_gradient = tape.backward(loss).at(x);
  return out;
}

std::pair<double, Tensor> Model::loss_and_input_gradient(const Tensor& image, std::size_t label) const {
  auto ev = evaluate(image, label);
  return {ev.loss, std::move(ev.input_gradient)};
}

std::vector<double> Model::penultimate_features(const Tensor& image) const {
  check_image(image);
  Tape tape(false);
  const auto g = build(tape, tape.leaf(image, false), false);
  if (!g.penultimate) throw std::logic_error("architecture has no dense layer");
  return tape.value(*g.penultimate).values();
}

std::size_t argmax(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty vector");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

Model train(const Architecture& architecture, const Dataset& train_set, const Dataset* test,
            const TrainConfig& config) {
  if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
  if (config.batch_size == 0) throw std::invalid_argument("train: batch size must be positive");
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  for (const auto& item : train_set.images) {
    if (item.label >= architecture.classes)
      throw std::invalid_argument("train: label " + std::to_string(item.label) + " >= class count " +
                                  std::to_string(architecture.classes));
    if (item.pixels.shape() != architecture.input)
      throw ShapeError("train: image shape " + to_string(item.pixels.shape()) +
                       " does not match architecture input " + to_string(architecture.input));
  }

  Model model = Model::initialize(architecture, config.seed);
  auto& params = model.parameters();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x5DEECE66DULL);

  std::optional<double> last_loss;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<Tensor> acc;
      acc.reserve(params.size());
      for (const auto& np : params) acc.emplace_back(np.value.shape());
      for (std::size_t b = start; b < stop; ++b) {
        const auto& item = train_set.images[order[b]];
        Tape tape;
        const auto g = model.build(tape, tape.leaf(item.pixels, false), true);
        const NodeId loss = tape.cross_entropy(g.logits, item.label);
        epoch_loss += tape.value(loss).item();
        const Gradients grads = tape.backward(loss);
        for (std::size_t p = 0; p < params.size(); ++p) {
          const Tensor& gp = grads.at(g.params[p]);
          for (std::size_t i = 0; i < gp.size(); ++i) acc[p][i] += gp[i];
        }
      }
      const double step = config.learning_rate / static_cast<double>(stop - start);
      for (std::size_t p = 0; p < params.size(); ++p)
        for (std::size_t i = 0; i < acc[p].size(); ++i) params[p].value[i] -= step * acc[p][i];
    }
    last_loss = epoch_loss / static_cast<double>(order.size());
  }

  auto& meta = model.metadata();
  meta.seed = config.seed;
  meta.epochs = config.epochs;
  meta.learning_rate = config.learning_rate;
  meta.batch_size = config.batch_size;
  meta.train_examples = train_set.size();
  meta.final_train_loss = last_loss;
  meta.dataset = train_set.provenance;
  if (test && !test->empty()) meta.test_accuracy = accuracy(model, *test);
  return model;
}

double accuracy(const Model& model, const Dataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("accuracy: empty dataset");
  std::size_t correct = 0;
  for (const auto& item : dataset.images) correct += model.predict(item.pixels) == item.label;
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

}  // namespace advrl
