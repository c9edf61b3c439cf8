#include "advrl/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "advrl/checkpoint.hpp"
#include "advrl/dataset.hpp"
#include "advrl/impostor.hpp"
#include "advrl/metrics.hpp"
#include "advrl/pgm.hpp"
#include "advrl/robustness.hpp"
#include "advrl/serialize.hpp"

namespace advrl::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Raised for any condition that ends a command with a specific exit code.
struct Failure {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, std::string message) { throw Failure{code, std::move(message)}; }

const char* const kCommands[] = {"train", "attack", "synth", "sweep", "transforms", "transfer", "detect"};

// Rejects keys that the default configuration does not define.
void check_keys(const json& user, const json& defaults, const std::string& where) {
  if (!user.is_object()) fail(kUsage, "config: " + (where.empty() ? "top level" : where) + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!defaults.contains(key)) fail(kUsage, "config: unknown field '" + path + "'");
    // Objects with fixed fields are checked recursively; the architecture
    // block is free-form and validated when parsed.
    if (defaults.at(key).is_object() && key != "architecture") check_keys(value, defaults.at(key), path);
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(kUsage, "config: field '" + where + "." + key + "' has the wrong type");
  }
}

// ----------------------------------------------------------------- inputs

Model load_model(const std::string& path, const char* what) {
  if (path.empty()) fail(kUsage, std::string("config: ") + what + " path is not set");
  try {
    return load_checkpoint(path);
  } catch (const CheckpointError& e) {
    fail(e.kind() == CheckpointError::Kind::Io ? kUsage : kCorruptInput, e.what());
  }
}

Dataset load_split(const json& cfg, Split split) {
  const json& d = cfg.at("dataset");
  const auto source = field<std::string>(d, "source", "dataset");
  if (source == "shapes") {
    ShapesConfig sc;
    sc.seed = field<std::uint64_t>(d, "seed", "dataset");
    sc.classes = field<std::size_t>(d, "classes", "dataset");
    sc.per_class = field<std::size_t>(d, split == Split::Train ? "train_per_class" : "test_per_class", "dataset");
    sc.size = field<std::size_t>(d, "size", "dataset");
    sc.split = split;
    try {
      return generate_shapes(sc);
    } catch (const std::invalid_argument& e) {
      fail(kUsage, std::string("config: ") + e.what());
    }
  }
  if (source == "idx") {
    const std::string prefix = split == Split::Train ? "train" : "test";
    const auto images = field<std::string>(d, (prefix + "_images").c_str(), "dataset");
    const auto labels = field<std::string>(d, (prefix + "_labels").c_str(), "dataset");
    if (images.empty() || labels.empty()) fail(kUsage, "config: dataset." + prefix + "_images/_labels not set");
    try {
      return load_idx(images, labels, split);
    } catch (const IdxError& e) {
      fail(e.kind() == IdxError::Kind::Io ? kUsage : kCorruptInput, e.what());
    }
  }
  fail(kUsage, "config: dataset.source must be 'shapes' or 'idx', got '" + source + "'");
}

AttackConfig attack_config(const json& cfg) {
  AttackConfig a;
  try {
    update_from_json(a, cfg.at("attack"));
    a.validate();
  } catch (const json::exception& e) {
    fail(kUsage, std::string("config: attack: ") + e.what());
  } catch (const std::invalid_argument& e) {
    fail(kUsage, std::string("config: ") + e.what());
  }
  return a;
}

void check_dataset_matches(const Model& model, const Dataset& ds) {
  if (ds.images.empty()) fail(kUsage, "dataset is empty");
  if (ds.image_shape() != model.architecture().input)
    fail(kUsage, "dataset image shape " + to_string(ds.image_shape()) + " does not match the model input " +
                     to_string(model.architecture().input));
  if (ds.classes > model.classes())
    fail(kUsage, "dataset has " + std::to_string(ds.classes) + " classes, model has " +
                     std::to_string(model.classes()));
}

// ---------------------------------------------------------------- outputs

struct Run {
  json cfg;
  fs::path out;
  std::uint64_t seed;
  std::size_t workers;
};

void emit(const Run& run, const std::string& name, const json& j) {
  try {
    write_json(j, run.out / name);
  } catch (const std::exception& e) {
    fail(kCorruptInput, e.what());
  }
}

void emit(const Run& run, const std::string& name, const std::string& text) {
  try {
    write_text(text, run.out / name);
  } catch (const std::exception& e) {
    fail(kCorruptInput, e.what());
  }
}

void emit_pgm(const Run& run, const std::string& name, const Tensor& image) {
  try {
    write_pgm(image, run.out / name);
  } catch (const std::exception& e) {
    fail(kCorruptInput, e.what());
  }
}

// --------------------------------------------------------------- commands

int cmd_train(const Run& run) {
  const json& t = run.cfg.at("training");
  TrainConfig tc;
  tc.seed = run.seed;
  tc.epochs = field<std::size_t>(t, "epochs", "training");
  tc.learning_rate = field<double>(t, "learning_rate", "training");
  tc.batch_size = field<std::size_t>(t, "batch_size", "training");
  if (!(tc.learning_rate > 0.0) || tc.batch_size == 0) fail(kUsage, "config: training needs learning_rate > 0, batch_size > 0");

  Architecture arch;
  try {
    arch = architecture_from_json(run.cfg.at("architecture"));
  } catch (const std::exception& e) {
    fail(kUsage, std::string("config: architecture: ") + e.what());
  }
  const Dataset train_set = load_split(run.cfg, Split::Train);
  const Dataset test_set = load_split(run.cfg, Split::Test);
  if (train_set.images.empty()) fail(kUsage, "training set is empty");
  if (train_set.image_shape() != arch.input)
    fail(kUsage, "dataset image shape " + to_string(train_set.image_shape()) + " does not match architecture input " +
                     to_string(arch.input));
  if (train_set.classes > arch.classes)
    fail(kUsage, "dataset has more classes than the architecture outputs");

  const Model model = train(arch, train_set, test_set.images.empty() ? nullptr : &test_set, tc);
  try {
    save_checkpoint(model, run.out / "model.ckpt");
  } catch (const std::exception& e) {
    fail(kCorruptInput, e.what());
  }
  json metrics = to_json(model.metadata());
  metrics["train_accuracy"] = accuracy(model, train_set);
  metrics["test_examples"] = test_set.size();
  emit(run, "metrics.json", metrics);
  std::cout << "train: test accuracy "
            << (model.metadata().test_accuracy ? std::to_string(*model.metadata().test_accuracy) : "n/a") << "\n";
  return kOk;
}

int cmd_attack(const Run& run) {
  const Model model = load_model(field<std::string>(run.cfg, "checkpoint", ""), "checkpoint");
  const AttackConfig ac = attack_config(run.cfg);
  const json& a = run.cfg.at("attack_run");
  const auto target = field<std::size_t>(a, "target", "attack_run");
  const auto image_path = field<std::string>(a, "image", "attack_run");
  const auto top_k = field<std::size_t>(a, "top_k", "attack_run");
  if (target >= model.classes())
    fail(kUsage, "target " + std::to_string(target) + " outside [0, " + std::to_string(model.classes()) + ")");
  if (top_k == 0 || top_k > model.classes()) fail(kUsage, "config: attack_run.top_k must be in [1, K]");

  Tensor image;
  json source;
  if (!image_path.empty()) {
    try {
      image = read_pgm(image_path);
    } catch (const PgmError& e) {
      fail(e.kind() == PgmError::Kind::Io ? kUsage : kCorruptInput, e.what());
    }
    source = {{"image", image_path}};
  } else {
    const Dataset ds = load_split(run.cfg, Split::Test);
    const auto index = field<std::size_t>(a, "image_index", "attack_run");
    if (index >= ds.size())
      fail(kUsage, "image_index " + std::to_string(index) + " outside the test split of " + std::to_string(ds.size()));
    image = ds.images[index].pixels;
    source = {{"dataset", ds.provenance}, {"index", index}, {"label", ds.images[index].label}};
  }
  if (image.shape() != model.architecture().input)
    fail(kUsage, "image shape " + to_string(image.shape()) + " does not match the model input " +
                     to_string(model.architecture().input));

  const AttackResult r = relabel(model, image, target, ac);
  json report = to_json(r);
  report["source"] = source;
  report["distortion_report"] = to_json(distortion(r.perturbed, r.original));
  report["original_top"] = to_json(probability_report(model.predict_probabilities(r.original), top_k));
  report["perturbed_top"] = to_json(probability_report(r.final_probabilities, top_k));
  emit(run, "result.json", report);
  emit_pgm(run, "original.pgm", r.original);
  emit_pgm(run, "perturbed.pgm", r.perturbed);
  emit_pgm(run, "difference.pgm", difference_image(r.perturbed, r.original));
  emit(run, "trace.csv", trace_csv(r.trace));
  std::cout << "attack: " << (r.success ? "success" : "failure") << (r.degenerate ? " (degenerate)" : "")
            << " after " << r.iterations_used << " iterations, distortion " << r.distortion << "\n";
  return r.success ? kOk : kExperimentFailure;
}

int cmd_synth(const Run& run) {
  const Model model = load_model(field<std::string>(run.cfg, "checkpoint", ""), "checkpoint");
  AttackConfig ac = attack_config(run.cfg);
  ac.distortion_cap = field<double>(run.cfg.at("synth"), "distortion_cap", "synth");
  ac.rng_seed = run.seed;
  try {
    ac.validate();
  } catch (const std::invalid_argument& e) {
    fail(kUsage, std::string("config: ") + e.what());
  }
  const SynthesisReport rep = synthesis_sweep(model, ac, run.workers);
  emit(run, "synthesis.json", to_json(rep));
  for (std::size_t t = 0; t < rep.results.size(); ++t) {
    emit_pgm(run, "noise_" + std::to_string(t) + ".pgm", rep.results[t].original);
    emit_pgm(run, "synth_" + std::to_string(t) + ".pgm", rep.results[t].perturbed);
  }
  std::cout << "synth: reached " << rep.reached << "/" << rep.results.size() << " targets\n";
  return rep.reached > 0 ? kOk : kExperimentFailure;
}

SweepOutcome sweep_from(const Run& run, const Model& model, const Dataset& ds, const AttackConfig& ac,
                        const char* section) {
  const auto m = field<std::size_t>(run.cfg.at(section), "exemplars_per_class", section);
  if (m == 0) fail(kUsage, std::string("config: ") + section + ".exemplars_per_class must be positive");
  return pair_sweep(model, ds, m, ac, run.seed, run.workers);
}

int cmd_sweep(const Run& run) {
  const Model model = load_model(field<std::string>(run.cfg, "checkpoint", ""), "checkpoint");
  const AttackConfig ac = attack_config(run.cfg);
  const Dataset ds = load_split(run.cfg, Split::Test);
  check_dataset_matches(model, ds);
  const SweepOutcome sw = sweep_from(run, model, ds, ac, "sweep");

  std::vector<AttackResult> results;
  for (const auto& a : sw.attempts) results.push_back(a.result);
  json report = to_json(sw.report);
  report["confidence"] = to_json(confidence_summary(results));
  if (field<bool>(run.cfg.at("sweep"), "step_control", "sweep"))
    report["step_control"] = to_json(single_step_comparison(model, results, ac, run.workers));
  emit(run, "sweep.json", report);
  emit(run, "sweep_matrix.csv", sweep_matrix_csv(sw.report));
  std::cout << "sweep: " << sw.report.total_successes << "/" << sw.report.total_attempts << " pairs relabelled\n";
  return sw.report.total_attempts > 0 ? kOk : kExperimentFailure;
}

int cmd_transforms(const Run& run) {
  const Model model = load_model(field<std::string>(run.cfg, "checkpoint", ""), "checkpoint");
  const AttackConfig ac = attack_config(run.cfg);
  const Dataset ds = load_split(run.cfg, Split::Test);
  check_dataset_matches(model, ds);
  const SweepOutcome sw = sweep_from(run, model, ds, ac, "transforms");
  std::vector<AttackResult> successes;
  for (const auto& a : sw.attempts)
    if (a.result.success && !a.result.degenerate) successes.push_back(a.result);
  if (successes.empty()) fail(kExperimentFailure, "transforms: no successful relabellings to transform");
  json report = to_json(transform_suite(model, successes));
  report["attacks_run"] = sw.report.total_attempts;
  emit(run, "transforms.json", report);
  std::cout << "transforms: " << successes.size() << " adversarials evaluated\n";
  return kOk;
}

int cmd_transfer(const Run& run) {
  const Model source = load_model(field<std::string>(run.cfg, "checkpoint", ""), "checkpoint");
  const Model victim = load_model(field<std::string>(run.cfg, "victim_checkpoint", ""), "victim_checkpoint");
  if (source.architecture().input != victim.architecture().input || source.classes() != victim.classes())
    fail(kUsage, "transfer: source and victim models disagree on input shape or class count");
  const AttackConfig ac = attack_config(run.cfg);
  const Dataset ds = load_split(run.cfg, Split::Test);
  check_dataset_matches(source, ds);
  const auto n = field<std::size_t>(run.cfg.at("transfer"), "count", "transfer");
  if (n == 0) fail(kUsage, "config: transfer.count must be positive");
  const TransferReport rep = transfer_check(source, victim, ds, n, ac, run.seed, run.workers);
  emit(run, "transfer.json", to_json(rep));
  std::cout << "transfer: " << rep.built << " adversarials, still-target fraction on victim " << rep.still_target
            << "\n";
  return rep.built > 0 ? kOk : kExperimentFailure;
}

ImpostorConfig impostor_config(const json& cfg, const AttackConfig& ac) {
  const json& d = cfg.at("detect");
  ImpostorConfig ic;
  ic.attack = ac;
  if (!d.at("target_class").is_null()) ic.target_class = field<std::size_t>(d, "target_class", "detect");
  ic.repeats = field<std::size_t>(d, "repeats", "detect");
  ic.relabelled = field<std::size_t>(d, "relabelled", "detect");
  ic.genuine = field<std::size_t>(d, "genuine", "detect");
  ic.train_per_origin = field<std::size_t>(d, "train_per_origin", "detect");
  ic.svm.c = field<double>(d, "svm_c", "detect");
  if (!d.at("svm_gamma").is_null()) ic.svm.gamma = field<double>(d, "svm_gamma", "detect");
  ic.svm.tolerance = field<double>(d, "svm_tolerance", "detect");
  ic.standardize = field<bool>(d, "standardize", "detect");
  ic.shuffle_labels = field<bool>(d, "shuffle_labels", "detect");
  try {
    ic.features = parse_feature_source(field<std::string>(d, "features", "detect"));
  } catch (const std::invalid_argument& e) {
    fail(kUsage, std::string("config: detect: ") + e.what());
  }
  return ic;
}

int cmd_detect(const Run& run) {
  const Model model = load_model(field<std::string>(run.cfg, "checkpoint", ""), "checkpoint");
  const ImpostorConfig ic = impostor_config(run.cfg, attack_config(run.cfg));
  const Dataset ds = load_split(run.cfg, Split::Test);
  check_dataset_matches(model, ds);
  ImpostorReport rep;
  try {
    rep = impostor_experiment(model, ds, ic, run.seed, run.workers);
  } catch (const std::logic_error& e) {
    fail(kUsage, std::string("config: detect: ") + e.what());
  }
  emit(run, "detect.json", to_json(rep));
  std::ostringstream csv;
  csv.precision(17);
  csv << "repeat,target,skipped,accuracy\n";
  for (const auto& r : rep.repeats) csv << r.repeat << ',' << r.target << ',' << r.skipped << ',' << r.accuracy << '\n';
  emit(run, "accuracies.csv", csv.str());
  std::cout << "detect: " << rep.completed << " repeats, mean accuracy "
            << (rep.mean_accuracy ? std::to_string(*rep.mean_accuracy) : "n/a") << "\n";
  return rep.completed > 0 ? kOk : kExperimentFailure;
}

int dispatch(const std::string& command, const Run& run) {
  if (command == "train") return cmd_train(run);
  if (command == "attack") return cmd_attack(run);
  if (command == "synth") return cmd_synth(run);
  if (command == "sweep") return cmd_sweep(run);
  if (command == "transforms") return cmd_transforms(run);
  if (command == "transfer") return cmd_transfer(run);
  return cmd_detect(run);
}

}  // namespace

json default_config() {
  AttackConfig attack;
  ImpostorConfig detect;
  json detect_json = to_json(detect);
  return {
      {"seed", 1},
      {"workers", 1},
      {"out", "out"},
      {"checkpoint", ""},
      {"victim_checkpoint", ""},
      {"dataset",
       {{"source", "shapes"},
        {"seed", 1},
        {"classes", 10},
        {"train_per_class", 500},
        {"test_per_class", 100},
        {"size", 28},
        {"train_images", ""},
        {"train_labels", ""},
        {"test_images", ""},
        {"test_labels", ""}}},
      {"architecture", to_json(Architecture::reference())},
      {"training", {{"epochs", TrainConfig{}.epochs}, {"learning_rate", TrainConfig{}.learning_rate},
                    {"batch_size", TrainConfig{}.batch_size}}},
      {"attack", to_json(attack)},
      {"attack_run", {{"target", 1}, {"image_index", 0}, {"image", ""}, {"top_k", 5}}},
      {"sweep", {{"exemplars_per_class", 2}, {"step_control", true}}},
      {"transforms", {{"exemplars_per_class", 2}}},
      {"transfer", {{"count", 50}}},
      {"synth", {{"distortion_cap", 0.3}}},
      {"detect", detect_json},
  };
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Targeted adversarial relabelling experiments", "advrl"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir, checkpoint, victim, image;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers, target, image_index;
  for (const char* name : kCommands) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " command");
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--seed", seed, "global seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "maximum parallel workers")->check(CLI::PositiveNumber);
    if (std::string(name) != "train") sub->add_option("--checkpoint", checkpoint, "model checkpoint");
    if (std::string(name) == "transfer") sub->add_option("--victim", victim, "victim model checkpoint");
    if (std::string(name) == "attack") {
      sub->add_option("--target", target, "target class");
      sub->add_option("--image-index", image_index, "index into the test split");
      sub->add_option("--image", image, "PGM image to attack instead of a dataset image");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    json cfg = default_config();
    if (!config_path.empty()) {
      json user;
      try {
        user = read_json(config_path);
      } catch (const json::exception& e) {
        fail(kUsage, "config " + config_path + ": " + e.what());
      } catch (const std::exception& e) {
        fail(kUsage, std::string(e.what()));
      }
      check_keys(user, cfg, "");
      cfg.merge_patch(user);
      if (user.contains("architecture")) cfg["architecture"] = user["architecture"];
    }
    if (seed) cfg["seed"] = *seed;
    if (workers) cfg["workers"] = *workers;
    if (!out_dir.empty()) cfg["out"] = out_dir;
    if (!checkpoint.empty()) cfg["checkpoint"] = checkpoint;
    if (!victim.empty()) cfg["victim_checkpoint"] = victim;
    if (target) cfg["attack_run"]["target"] = *target;
    if (image_index) cfg["attack_run"]["image_index"] = *image_index;
    if (!image.empty()) cfg["attack_run"]["image"] = image;

    Run run{cfg, field<std::string>(cfg, "out", ""), field<std::uint64_t>(cfg, "seed", ""),
            field<std::size_t>(cfg, "workers", "")};
    if (run.workers == 0) fail(kUsage, "config: workers must be positive");
    std::error_code ec;
    fs::create_directories(run.out, ec);
    if (ec || !fs::is_directory(run.out)) fail(kUsage, "cannot create output directory " + run.out.string());
    json resolved = cfg;
    resolved["command"] = command;
    emit(run, "config.json", resolved);
    return dispatch(command, run);
  } catch (const Failure& f) {
    std::cerr << "advrl " << command << ": " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "advrl " << command << ": " << e.what() << "\n";
    return kExperimentFailure;
  }
}

}  // namespace advrl::cli
