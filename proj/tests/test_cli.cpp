#include <doctest.h>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "advrl/checkpoint.hpp"
#include "advrl/cli.hpp"
#include "advrl/dataset.hpp"
#include "advrl/metrics.hpp"
#include "advrl/pgm.hpp"
#include "advrl/serialize.hpp"
#include "support.hpp"

using namespace advrl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "advrl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream err, out;
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old_err);
  std::cout.rdbuf(old_out);
  return {code, err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = slurp(e.path());
  return files;
}

// Small workload shared by every test; trained once per process.
struct Fixture {
  testing::TempDir dir{"cli"};
  fs::path config, checkpoint, victim;

  Fixture() {
    config = dir / "small.json";
    std::ofstream(config) << R"({
      "dataset": {"train_per_class": 30, "test_per_class": 10},
      "training": {"epochs": 5, "batch_size": 2},
      "detect": {"repeats": 2, "relabelled": 8, "genuine": 8, "train_per_origin": 4},
      "transfer": {"count": 5},
      "sweep": {"exemplars_per_class": 1},
      "transforms": {"exemplars_per_class": 1}
    })";
    REQUIRE(invoke({"train", "--config", config.string(), "--out", (dir / "a").string()}).code == cli::kOk);
    REQUIRE(invoke({"train", "--config", config.string(), "--seed", "2", "--out", (dir / "b").string()}).code ==
            cli::kOk);
    checkpoint = dir / "a" / "model.ckpt";
    victim = dir / "b" / "model.ckpt";
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("cli usage errors") {
  Fixture& f = fixture();
  CHECK(invoke({}).code == cli::kUsage);
  CHECK(invoke({"explode"}).code == cli::kUsage);
  CHECK(invoke({"attack", "--bogus"}).code == cli::kUsage);
  CHECK(invoke({"sweep", "--workers", "0"}).code == cli::kUsage);

  const fs::path bad = f.dir / "bad.json";
  std::ofstream(bad) << R"({"attack": {"alpha": 1.0, "colour": 3}})";
  const Outcome unknown = invoke({"sweep", "--config", bad.string(), "--out", (f.dir / "u").string()});
  CHECK(unknown.code == cli::kUsage);
  CHECK(unknown.err.find("attack.colour") != std::string::npos);

  std::ofstream(f.dir / "typed.json") << R"({"training": {"epochs": "ten"}})";
  CHECK(invoke({"train", "--config", (f.dir / "typed.json").string(), "--out", (f.dir / "u").string()}).code ==
        cli::kUsage);

  const std::string missing = (f.dir / "nope.ckpt").string();
  const Outcome no_ckpt = invoke({"attack", "--checkpoint", missing, "--out", (f.dir / "u").string()});
  CHECK(no_ckpt.code == cli::kUsage);
  CHECK(no_ckpt.err.find(missing) != std::string::npos);

  CHECK(invoke({"attack", "--config", f.config.string(), "--checkpoint", f.checkpoint.string(), "--target", "10",
                "--out", (f.dir / "u").string()})
            .code == cli::kUsage);

  const fs::path idx = f.dir / "idx.json";
  const std::string images = (f.dir / "absent-images.idx").string();
  std::ofstream(idx) << nlohmann::json{{"dataset",
                                        {{"source", "idx"},
                                         {"test_images", images},
                                         {"test_labels", (f.dir / "absent-labels.idx").string()}}}}
                            .dump();
  const Outcome no_idx = invoke({"sweep", "--config", idx.string(), "--checkpoint", f.checkpoint.string(), "--out",
                                 (f.dir / "u").string()});
  CHECK(no_idx.code == cli::kUsage);
  CHECK(no_idx.err.find(images) != std::string::npos);
}

TEST_CASE("cli corrupt inputs") {
  Fixture& f = fixture();
  std::string bytes = slurp(f.checkpoint);
  bytes[bytes.size() / 2] ^= 0x40;
  const fs::path broken = f.dir / "broken.ckpt";
  std::ofstream(broken, std::ios::binary) << bytes;
  CHECK(invoke({"attack", "--checkpoint", broken.string(), "--out", (f.dir / "c").string()}).code ==
        cli::kCorruptInput);

  const fs::path pgm = f.dir / "broken.pgm";
  std::ofstream(pgm, std::ios::binary) << "P5\n28 28\n255\nshort";
  CHECK(invoke({"attack", "--config", f.config.string(), "--checkpoint", f.checkpoint.string(), "--image",
                pgm.string(), "--out", (f.dir / "c").string()})
            .code == cli::kCorruptInput);
}

TEST_CASE("cli attack outputs") {
  Fixture& f = fixture();
  const Model model = load_checkpoint(f.checkpoint);
  ShapesConfig sc;
  sc.per_class = 10;
  sc.split = Split::Test;
  const Dataset test = generate_shapes(sc);
  const std::size_t predicted = model.predict(test.images[0].pixels);
  const std::size_t target = (predicted + 1) % 10;

  const fs::path out = f.dir / "attack";
  const Outcome o = invoke({"attack", "--config", f.config.string(), "--checkpoint", f.checkpoint.string(),
                            "--target", std::to_string(target), "--image-index", "0", "--out", out.string()});
  CHECK((o.code == cli::kOk || o.code == cli::kExperimentFailure));
  for (const char* name : {"config.json", "result.json", "original.pgm", "perturbed.pgm", "difference.pgm", "trace.csv"})
    CHECK(fs::exists(out / name));
  const nlohmann::json result = read_json(out / "result.json");
  CHECK(result.at("success").get<bool>() == (o.code == cli::kOk));
  CHECK(read_json(out / "config.json").at("command") == "attack");

  // Distortion recomputed from the quantized images stays within one grey level.
  const DistortionReport d = distortion(read_pgm(out / "perturbed.pgm"), read_pgm(out / "original.pgm"));
  CHECK(std::abs(d.rms - result.at("distortion").get<double>()) <= 1.0 / 255.0);

  const fs::path degenerate = f.dir / "degenerate";
  const int code = invoke({"attack", "--config", f.config.string(), "--checkpoint", f.checkpoint.string(),
                           "--target", std::to_string(predicted), "--out", degenerate.string()})
                       .code;
  if (model.predict_probabilities(test.images[0].pixels)[predicted] >= 0.5) {
    CHECK(code == cli::kOk);
    const nlohmann::json deg = read_json(degenerate / "result.json");
    CHECK(deg.at("degenerate").get<bool>());
    CHECK(deg.at("distortion").get<double>() == 0.0);
    CHECK(deg.at("iterations_used").get<std::size_t>() == 0);
  }
}

TEST_CASE("cli commands rerun byte-identically") {
  Fixture& f = fixture();
  const std::string ckpt = f.checkpoint.string(), cfg = f.config.string();
  const std::vector<std::vector<std::string>> commands = {
      {"train", "--config", cfg},
      {"attack", "--config", cfg, "--checkpoint", ckpt},
      {"synth", "--config", cfg, "--checkpoint", ckpt},
      {"sweep", "--config", cfg, "--checkpoint", ckpt, "--workers", "2"},
      {"transforms", "--config", cfg, "--checkpoint", ckpt},
      {"transfer", "--config", cfg, "--checkpoint", ckpt, "--victim", f.victim.string()},
      {"detect", "--config", cfg, "--checkpoint", ckpt},
  };
  for (auto args : commands) {
    CAPTURE(args[0]);
    const fs::path out = f.dir / ("rerun-" + args[0]);
    args.insert(args.end(), {"--out", out.string()});
    const int first = invoke(args).code;
    const auto before = snapshot(out);
    CHECK(before.size() > 1);
    CHECK(invoke(args).code == first);
    CHECK(snapshot(out) == before);
  }

  const auto matrix = slurp(f.dir / "rerun-sweep" / "sweep_matrix.csv");
  CHECK(std::count(matrix.begin(), matrix.end(), '\n') == 11);
  const auto sweep = read_json(f.dir / "rerun-sweep" / "sweep.json");
  CHECK(sweep.contains("step_control"));
  CHECK(sweep.contains("confidence"));

  const auto detect = read_json(f.dir / "rerun-detect" / "detect.json");
  const auto csv = slurp(f.dir / "rerun-detect" / "accuracies.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(detect.at("repeats").size() == 2);

  // Worker count does not change the results.
  const fs::path serial = f.dir / "sweep-serial";
  invoke({"sweep", "--config", cfg, "--checkpoint", ckpt, "--out", serial.string()});
  CHECK(slurp(serial / "sweep.json") == slurp(f.dir / "rerun-sweep" / "sweep.json"));
}
