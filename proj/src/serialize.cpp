#include "advrl/serialize.hpp"

#include <fstream>
#include <sstream>

namespace advrl {

using nlohmann::json;

json to_json(const Architecture& arch) {
  json layers = json::array();
  for (const auto& l : arch.layers) {
    json layer = {{"type", layer_name(l.kind)}};
    if (l.kind == LayerSpec::Kind::Conv) {
      layer["out"] = l.units;
      layer["kernel"] = l.kernel;
    } else if (l.kind == LayerSpec::Kind::Dense) {
      layer["out"] = l.units;
    }
    layers.push_back(layer);
  }
  return {{"input", arch.input}, {"classes", arch.classes}, {"layers", layers}};
}

Architecture architecture_from_json(const json& j) {
  Architecture a;
  a.input = j.at("input").get<Shape>();
  a.classes = j.at("classes").get<std::size_t>();
  a.layers.clear();
  for (const auto& layer : j.at("layers")) {
    LayerSpec l;
    l.kind = parse_layer_kind(layer.at("type").get<std::string>());
    l.units = layer.value("out", std::size_t{0});
    l.kernel = layer.value("kernel", std::size_t{0});
    a.layers.push_back(l);
  }
  a.validate();
  return a;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

json to_json(const TrainingMetadata& m) {
  return {{"seed", m.seed},
          {"epochs", m.epochs},
          {"learning_rate", m.learning_rate},
          {"batch_size", m.batch_size},
          {"train_examples", m.train_examples},
          {"final_train_loss", optional_number(m.final_train_loss)},
          {"test_accuracy", optional_number(m.test_accuracy)},
          {"dataset", m.dataset}};
}

TrainingMetadata metadata_from_json(const json& j) {
  TrainingMetadata m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.epochs = j.at("epochs").get<std::size_t>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.batch_size = j.at("batch_size").get<std::size_t>();
  m.train_examples = j.value("train_examples", std::size_t{0});
  m.final_train_loss = optional_number(j, "final_train_loss");
  m.test_accuracy = optional_number(j, "test_accuracy");
  m.dataset = j.value("dataset", std::string{});
  return m;
}

json to_json(const AttackConfig& c) {
  return {{"alpha", c.alpha},
          {"max_iterations", c.max_iterations},
          {"distortion_cap", c.distortion_cap},
          {"gradient_mode", gradient_mode_name(c.gradient_mode)},
          {"success_confidence", c.success_confidence},
          {"clamp_pixels", c.clamp_pixels},
          {"rng_seed", c.rng_seed},
          {"trace", c.trace}};
}

void update_from_json(AttackConfig& c, const json& j) {
  c.alpha = j.value("alpha", c.alpha);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.distortion_cap = j.value("distortion_cap", c.distortion_cap);
  if (j.contains("gradient_mode"))
    c.gradient_mode = parse_gradient_mode(j.at("gradient_mode").get<std::string>());
  c.success_confidence = j.value("success_confidence", c.success_confidence);
  c.clamp_pixels = j.value("clamp_pixels", c.clamp_pixels);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.trace = j.value("trace", c.trace);
}

json to_json(const DistortionReport& r) {
  return {{"rms", r.rms}, {"linf", r.linf}, {"n", r.n}};
}

json to_json(const std::vector<ClassProbability>& report) {
  json out = json::array();
  for (const auto& e : report) out.push_back({{"class", e.label}, {"probability", e.probability}});
  return out;
}

json to_json(const AttackResult& r) {
  return {{"success", r.success},
          {"degenerate", r.degenerate},
          {"iterations_used", r.iterations_used},
          {"distortion", r.distortion},
          {"linf", r.linf},
          {"original_label", r.original_label},
          {"target_label", r.target_label},
          {"final_probabilities", r.final_probabilities},
          {"trace_length", r.trace.size()}};
}

std::string trace_csv(const std::vector<TracePoint>& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,loss,target_prob,distortion\n";
  for (const auto& t : trace)
    os << t.iteration << ',' << t.loss << ',' << t.target_probability << ',' << t.distortion << '\n';
  return os.str();
}

namespace {

template <typename T>
json optional_matrix(const std::vector<std::vector<std::optional<T>>>& m) {
  json out = json::array();
  for (const auto& row : m) {
    json r = json::array();
    for (const auto& v : row) r.push_back(v ? json(*v) : json(nullptr));
    out.push_back(r);
  }
  return out;
}

json optional_vector(const std::vector<std::optional<double>>& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(x ? json(*x) : json(nullptr));
  return out;
}

}  // namespace

json to_json(const PairSweepReport& r) {
  json rates = json::array();
  for (std::size_t s = 0; s < r.classes; ++s) {
    json row = json::array();
    for (std::size_t t = 0; t < r.classes; ++t) {
      const auto v = r.rate(s, t);
      row.push_back(v ? json(*v) : json(nullptr));
    }
    rates.push_back(row);
  }
  return {{"classes", r.classes},
          {"exemplars_per_class", r.exemplars_per_class},
          {"distortion_cap", r.distortion_cap},
          {"seed", r.seed},
          {"total_attempts", r.total_attempts},
          {"total_successes", r.total_successes},
          {"overall_success_rate", r.overall_success_rate},
          {"min_pair_rate", optional_number(r.min_pair_rate())},
          {"success_rate", rates},
          {"attempts", r.attempts},
          {"successes", r.successes},
          {"mean_distortion", optional_matrix(r.mean_distortion)},
          {"mean_iterations", optional_matrix(r.mean_iterations)},
          {"row_means", optional_vector(r.row_means())},
          {"column_means", optional_vector(r.column_means())},
          {"misclassified_skipped", r.misclassified_skipped},
          {"insufficient_classes", r.insufficient_classes}};
}

std::string sweep_matrix_csv(const PairSweepReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "source";
  for (std::size_t t = 0; t < r.classes; ++t) os << ",target_" << t;
  os << '\n';
  for (std::size_t s = 0; s < r.classes; ++s) {
    os << s;
    for (std::size_t t = 0; t < r.classes; ++t) {
      os << ',';
      if (s == t)
        os << "degenerate";
      else if (auto v = r.rate(s, t))
        os << *v;
    }
    os << '\n';
  }
  return os.str();
}

json to_json(const TransformReport& r) {
  json transforms = json::object();
  for (const auto& c : r.transforms)
    transforms[transform_name(c.transform)] = {{"reverted", c.reverted},
                                               {"stayed_target", c.stayed_target},
                                               {"other", c.other},
                                               {"stay_fraction", c.stay_fraction()}};
  return {{"samples", r.samples},
          {"crop_fraction", 0.8},
          {"translate_pixels", 2},
          {"transforms", transforms}};
}

json to_json(const TransferReport& r) {
  return {{"requested", r.requested},
          {"built", r.built},
          {"attempted", r.attempted},
          {"still_target", r.still_target},
          {"original", r.original},
          {"other", r.other},
          {"clean_accuracy_b", r.clean_accuracy_b},
          {"test_accuracy_b", optional_number(r.test_accuracy_b)}};
}

json to_json(const StepControlReport& r) {
  return {{"pairs", r.pairs},
          {"skipped", r.skipped},
          {"iterative_successes", r.iterative_successes},
          {"single_step_successes", r.single_step_successes},
          {"single_step_misclassified", r.single_step_misclassified},
          {"single_step_over_cap", r.single_step_over_cap},
          {"iterative_rate", r.iterative_rate},
          {"single_step_rate", r.single_step_rate},
          {"untargeted_rate", r.untargeted_rate}};
}

json to_json(const SynthesisReport& r) {
  json runs = json::array();
  for (const auto& res : r.results) runs.push_back(to_json(res));
  return {{"reached", r.reached},
          {"targets", r.results.size()},
          {"mean_distortion", optional_number(r.mean_distortion)},
          {"runs", runs}};
}

json to_json(const ConfidenceSummary& s) {
  return {{"successes", s.successes},
          {"at_least_half", s.at_least_half},
          {"target_rank_one", s.target_rank_one},
          {"median_target_probability", optional_number(s.median_target_probability)}};
}

json to_json(const ImpostorReport& r) {
  json repeats = json::array();
  for (const auto& x : r.repeats)
    repeats.push_back({{"repeat", x.repeat},
                       {"target", x.target},
                       {"skipped", x.skipped},
                       {"skip_reason", x.skip_reason},
                       {"attacks_run", x.attacks_run},
                       {"tested", x.tested},
                       {"correct", x.correct},
                       {"accuracy", x.accuracy},
                       {"gamma", x.gamma},
                       {"mean_cross_distance", x.mean_cross_distance},
                       {"kkt_violation", x.kkt_violation}});
  return {{"repeats", repeats}, {"completed", r.completed}, {"mean_accuracy", optional_number(r.mean_accuracy)}};
}

json to_json(const ImpostorConfig& c) {
  return {{"target_class", c.target_class ? json(*c.target_class) : json(nullptr)},
          {"repeats", c.repeats},
          {"relabelled", c.relabelled},
          {"genuine", c.genuine},
          {"train_per_origin", c.train_per_origin},
          {"svm_c", c.svm.c},
          {"svm_gamma", c.svm.gamma ? json(*c.svm.gamma) : json(nullptr)},
          {"svm_tolerance", c.svm.tolerance},
          {"standardize", c.standardize},
          {"features", feature_source_name(c.features)},
          {"shuffle_labels", c.shuffle_labels}};
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

void write_json(const json& j, const std::filesystem::path& path) { write_text(j.dump(2) + "\n", path); }

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

}  // namespace advrl
