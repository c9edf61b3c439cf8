#include <doctest.h>

#include <random>
#include <sstream>

#include "advrl/robustness.hpp"
#include "advrl/serialize.hpp"
#include "support.hpp"

using namespace advrl;
using testing::random_tensor;
using testing::tiny_architecture;

namespace {

// Random images labelled by the model itself, so every image is "correct".
Dataset self_labelled(const Model& m, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset ds;
  ds.classes = m.classes();
  ds.split = Split::Test;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor x = random_tensor(m.architecture().input, rng, 0, 1);
    const std::size_t label = m.predict(x);
    ds.images.push_back({std::move(x), label});
  }
  return ds;
}

AttackConfig easy_config() {
  AttackConfig cfg;
  cfg.distortion_cap = 0.3;
  cfg.max_iterations = 200;
  return cfg;
}

}  // namespace

TEST_CASE("exemplar selection") {
  const Model m = Model::initialize(tiny_architecture(3), 1);
  Dataset ds = self_labelled(m, 60, 1);
  ds.images[0].label = (ds.images[0].label + 1) % 3;  // one wrong label
  const ExemplarSelection sel = select_exemplars(m, ds, 2, 5);
  REQUIRE(sel.per_class.size() == 3);
  std::size_t wrong = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    wrong += sel.misclassified[c];
    for (std::size_t idx : sel.per_class[c]) {
      CHECK(ds.images[idx].label == c);
      CHECK(m.predict(ds.images[idx].pixels) == c);
    }
  }
  CHECK(wrong == 1);
  const ExemplarSelection again = select_exemplars(m, ds, 2, 5);
  CHECK(again.per_class == sel.per_class);
  const ExemplarSelection greedy = select_exemplars(m, ds, 1000, 5);
  CHECK(greedy.insufficient.size() == 3);
}

TEST_CASE("pair sweep") {
  const Model m = Model::initialize(tiny_architecture(3), 2);
  const Dataset ds = self_labelled(m, 90, 2);
  const AttackConfig cfg = easy_config();
  const SweepOutcome a = pair_sweep(m, ds, 2, cfg, 7, 1);
  const PairSweepReport& r = a.report;

  CHECK(r.classes == 3);
  std::size_t attempts = 0, successes = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(r.attempts[s][s] == 0);
    CHECK(!r.rate(s, s));
    for (std::size_t t = 0; t < 3; ++t) {
      attempts += r.attempts[s][t];
      successes += r.successes[s][t];
      if (s != t && r.attempts[s][t] > 0) CHECK(r.attempts[s][t] == 2);
    }
  }
  CHECK(attempts == r.total_attempts);
  CHECK(successes == r.total_successes);
  CHECK(a.attempts.size() == r.total_attempts);
  REQUIRE(r.total_attempts > 0);
  CHECK(r.overall_success_rate == doctest::Approx(static_cast<double>(successes) / attempts));
  CHECK(r.total_successes > 0);
  for (const auto& at : a.attempts) {
    CHECK(at.source != at.target);
    CHECK(at.verified == at.result.success);
    CHECK(at.result.distortion <= cfg.distortion_cap);
  }

  const SweepOutcome b = pair_sweep(m, ds, 2, cfg, 7, 3);
  CHECK(b.report == r);
  CHECK(to_json(b.report).dump() == to_json(r).dump());

  const std::string csv = sweep_matrix_csv(r);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "source,target_0,target_1,target_2");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    CHECK(line.find("degenerate") != std::string::npos);
    ++rows;
  }
  CHECK(rows == 3);

  CHECK_THROWS(pair_sweep(m, ds, 0, cfg, 7));
}

TEST_CASE("pair sweep rejects an empty dataset") {
  const Model m = Model::initialize(tiny_architecture(3), 2);
  Dataset empty;
  empty.classes = 3;
  CHECK_THROWS(pair_sweep(m, empty, 2, easy_config(), 1));
}

TEST_CASE("image transforms") {
  std::mt19937_64 rng(3);
  const Tensor img = random_tensor({1, 10, 10}, rng, 0, 1);
  CHECK(apply_transform(img, ImageTransform::Identity) == img);
  CHECK(mirror_horizontal(mirror_horizontal(img)) == img);
  CHECK(mirror_horizontal(img)[9] == img[0]);

  const Tensor shifted = translate_right(img, 2);
  CHECK(shifted[0] == 0.0);
  CHECK(shifted[1] == 0.0);
  CHECK(shifted[2] == img[0]);
  CHECK(shifted[10 + 9] == img[10 + 7]);

  const Tensor flat(Shape{1, 10, 10}, 0.3);
  CHECK(center_crop_rescale(flat) == flat);
  CHECK(mirror_horizontal(flat) == flat);
  CHECK(center_crop_rescale(img).shape() == img.shape());

  // A blank image is unchanged by translation with a matching zero fill.
  const Model m = Model::initialize(tiny_architecture(3), 4);
  const Tensor blank(Shape{1, 8, 8}, 0.0);
  CHECK(translate_right(blank) == blank);
  CHECK(m.predict(translate_right(blank)) == m.predict(blank));
}

TEST_CASE("transform suite") {
  const Model m = Model::initialize(tiny_architecture(3), 6);
  const Dataset ds = self_labelled(m, 60, 6);
  const SweepOutcome sw = pair_sweep(m, ds, 2, easy_config(), 1);
  std::vector<AttackResult> ok;
  for (const auto& a : sw.attempts)
    if (a.result.success) ok.push_back(a.result);
  REQUIRE(!ok.empty());
  const TransformReport rep = transform_suite(m, ok);
  CHECK(rep.samples == ok.size());
  REQUIRE(rep.transforms.size() == 4);
  CHECK(rep.at(ImageTransform::Identity).stayed_target == ok.size());
  CHECK(rep.at(ImageTransform::Identity).stay_fraction() == 1.0);
  for (const auto& c : rep.transforms) CHECK(c.total() == ok.size());

  std::vector<AttackResult> bad = ok;
  bad[0].success = false;
  CHECK_THROWS(transform_suite(m, bad));
}

TEST_CASE("transfer to the same model keeps every target") {
  const Model m = Model::initialize(tiny_architecture(3), 8);
  const Dataset ds = self_labelled(m, 40, 8);
  const TransferReport rep = transfer_check(m, m, ds, 6, easy_config(), 3);
  REQUIRE(rep.built > 0);
  CHECK(rep.still_target == 1.0);
  CHECK(rep.original == 0.0);
  CHECK(rep.clean_accuracy_b == 1.0);
  CHECK(rep.built <= 6);

  const Model other = Model::initialize(tiny_architecture(4), 8);
  CHECK_THROWS(transfer_check(m, other, ds, 6, easy_config(), 3));
}

TEST_CASE("single-step comparison bookkeeping") {
  const Model m = Model::initialize(tiny_architecture(3), 10);
  const Dataset ds = self_labelled(m, 60, 10);
  const AttackConfig cfg = easy_config();
  const SweepOutcome sw = pair_sweep(m, ds, 2, cfg, 1);
  std::vector<AttackResult> results;
  for (const auto& a : sw.attempts) results.push_back(a.result);
  const StepControlReport rep = single_step_comparison(m, results, cfg);
  CHECK(rep.pairs == results.size());
  CHECK(rep.iterative_successes == sw.report.total_successes);
  CHECK(rep.skipped == rep.pairs - rep.iterative_successes);
  CHECK(rep.single_step_successes <= rep.iterative_successes);
  CHECK(rep.iterative_rate == doctest::Approx(sw.report.overall_success_rate));
  CHECK(single_step_comparison(m, results, cfg, 4).single_step_successes == rep.single_step_successes);
}

TEST_CASE("synthesis sweep") {
  const Model m = Model::initialize(tiny_architecture(3), 12);
  AttackConfig cfg = easy_config();
  cfg.rng_seed = 40;
  const SynthesisReport rep = synthesis_sweep(m, cfg, 2);
  REQUIRE(rep.results.size() == 3);
  std::size_t reached = 0;
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(rep.results[t].target_label == t);
    CHECK(rep.results[t].original == gaussian_noise_image({1, 8, 8}, 40 + t));
    reached += rep.results[t].success;
  }
  CHECK(reached == rep.reached);
  const SynthesisReport again = synthesis_sweep(m, cfg, 1);
  CHECK(to_json(again).dump() == to_json(rep).dump());
}

TEST_CASE("confidence summary") {
  auto result = [](bool success, std::vector<double> probs, std::size_t target) {
    AttackResult r;
    r.success = success;
    r.final_probabilities = std::move(probs);
    r.target_label = target;
    return r;
  };
  const ConfidenceSummary s = confidence_summary({result(true, {0.1, 0.9}, 1), result(true, {0.4, 0.6}, 1),
                                                  result(false, {0.8, 0.2}, 1), result(true, {0.3, 0.7}, 1)});
  CHECK(s.successes == 3);
  CHECK(s.at_least_half == 3);
  CHECK(s.target_rank_one == 3);
  REQUIRE(s.median_target_probability);
  CHECK(*s.median_target_probability == doctest::Approx(0.7));
  CHECK(!confidence_summary({}).median_target_probability);
}

TEST_CASE("verify_success rejects tampered results") {
  const Model m = Model::initialize(tiny_architecture(3), 14);
  const Dataset ds = self_labelled(m, 30, 14);
  const SweepOutcome sw = pair_sweep(m, ds, 1, easy_config(), 2);
  for (const auto& a : sw.attempts) {
    if (!a.result.success) continue;
    CHECK(verify_success(m, a.result, easy_config()));
    AttackResult tampered = a.result;
    tampered.distortion += 1e-6;
    CHECK(!verify_success(m, tampered, easy_config()));
    tampered = a.result;
    tampered.perturbed = tampered.original;
    CHECK(!verify_success(m, tampered, easy_config()));
    break;
  }
}
