#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "advrl/attack.hpp"
#include "advrl/dataset.hpp"
#include "advrl/model.hpp"

namespace advrl {

/// Re-derives the success condition from the model and the stored images
/// instead of trusting the flags recorded by the attack.
bool verify_success(const Model& model, const AttackResult& result, const AttackConfig& config);

struct ExemplarSelection {
  /// Dataset indices per class, at most the requested count.
  std::vector<std::vector<std::size_t>> per_class;
  /// Test images of each class that the model gets wrong (never selected).
  std::vector<std::size_t> misclassified;
  /// Classes with fewer correctly classified images than requested.
  std::vector<std::size_t> insufficient;
};

/// Picks `per_class` correctly classified images per class, shuffled by seed.
ExemplarSelection select_exemplars(const Model& model, const Dataset& dataset,
                                   std::size_t per_class, std::uint64_t seed);

// ---------------------------------------------------------------- pair sweep

struct SweepAttempt {
  std::size_t source = 0;
  std::size_t target = 0;
  std::size_t dataset_index = 0;
  bool verified = false;
  AttackResult result;
};

struct PairSweepReport {
  std::size_t classes = 0;
  std::size_t exemplars_per_class = 0;
  double distortion_cap = 0.0;
  std::uint64_t seed = 0;
  /// Indexed [source][target]; the diagonal is degenerate and never attempted.
  std::vector<std::vector<std::size_t>> attempts;
  std::vector<std::vector<std::size_t>> successes;
  /// Means over successful attempts; absent when a pair has none.
  std::vector<std::vector<std::optional<double>>> mean_distortion;
  std::vector<std::vector<std::optional<double>>> mean_iterations;
  std::size_t total_attempts = 0;
  std::size_t total_successes = 0;
  double overall_success_rate = 0.0;
  std::vector<std::size_t> misclassified_skipped;
  std::vector<std::size_t> insufficient_classes;

  std::optional<double> rate(std::size_t source, std::size_t target) const;
  /// Off-diagonal mean success rate per source class (rows) or target class.
  std::vector<std::optional<double>> row_means() const;
  std::vector<std::optional<double>> column_means() const;
  /// Smallest off-diagonal pair rate.
  std::optional<double> min_pair_rate() const;

  friend bool operator==(const PairSweepReport&, const PairSweepReport&) = default;
};

struct SweepOutcome {
  PairSweepReport report;
  std::vector<SweepAttempt> attempts;
};

/// Relabels m exemplars of every class to every other class.
SweepOutcome pair_sweep(const Model& model, const Dataset& dataset, std::size_t exemplars_per_class,
                        const AttackConfig& config, std::uint64_t seed, std::size_t workers = 1);

// --------------------------------------------------------- transformations

enum class ImageTransform { Identity, Crop, Translate, Mirror };

const char* transform_name(ImageTransform t);

/// Central crop keeping `fraction` of each side, rescaled back by nearest neighbour.
Tensor center_crop_rescale(const Tensor& image, double fraction = 0.8);
/// Shift right by `pixels`, filling the vacated columns with zeros.
Tensor translate_right(const Tensor& image, std::size_t pixels = 2);
Tensor mirror_horizontal(const Tensor& image);
Tensor apply_transform(const Tensor& image, ImageTransform t);

struct TransformCounts {
  ImageTransform transform = ImageTransform::Identity;
  std::size_t reverted = 0;       // back to the original label
  std::size_t stayed_target = 0;  // still the adversarial target
  std::size_t other = 0;

  std::size_t total() const { return reverted + stayed_target + other; }
  double stay_fraction() const;
};

struct TransformReport {
  std::size_t samples = 0;
  /// Identity control first, then crop, translate, mirror.
  std::vector<TransformCounts> transforms;

  const TransformCounts& at(ImageTransform t) const;
};

/// Re-classifies every adversarial after each transform. All inputs must be
/// successful attacks.
TransformReport transform_suite(const Model& model, const std::vector<AttackResult>& adversarials);

// ----------------------------------------------------------------- transfer

struct TransferReport {
  std::size_t requested = 0;
  std::size_t built = 0;      // successful adversarials on model A
  std::size_t attempted = 0;  // attacks run on model A
  double still_target = 0.0;  // fractions over `built`, as classified by model B
  double original = 0.0;
  double other = 0.0;
  /// Model B accuracy on the unperturbed originals of the built adversarials.
  double clean_accuracy_b = 0.0;
  std::optional<double> test_accuracy_b;
};

/// Builds up to n successful adversarials on `source` (random target per
/// image, drawn from the seed) and classifies them with `victim`.
TransferReport transfer_check(const Model& source, const Model& victim, const Dataset& dataset,
                              std::size_t n, const AttackConfig& config, std::uint64_t seed,
                              std::size_t workers = 1);

// --------------------------------------------------- single-step control

struct StepControlReport {
  std::size_t pairs = 0;
  std::size_t skipped = 0;  // iterative run failed, control not applicable
  std::size_t iterative_successes = 0;
  std::size_t single_step_successes = 0;
  std::size_t single_step_misclassified = 0;  // label moved off the original
  std::size_t single_step_over_cap = 0;
  double iterative_rate = 0.0;  // all three rates are over `pairs`
  double single_step_rate = 0.0;
  double untargeted_rate = 0.0;
};

/// Pairs every iterative attack with one sign step of length
/// alpha * iterations_used along the first gradient.
StepControlReport single_step_comparison(const Model& model, const std::vector<AttackResult>& iterative,
                                         const AttackConfig& config, std::size_t workers = 1);

// ---------------------------------------------------------------- synthesis

struct SynthesisReport {
  /// One run per target class, each from noise seeded with rng_seed + target.
  std::vector<AttackResult> results;
  std::size_t reached = 0;
  /// Mean over successful runs that needed at least one step.
  std::optional<double> mean_distortion;
};

SynthesisReport synthesis_sweep(const Model& model, const AttackConfig& config, std::size_t workers = 1);

// ---------------------------------------------------------------- confidence

struct ConfidenceSummary {
  std::size_t successes = 0;
  std::size_t at_least_half = 0;
  std::optional<double> median_target_probability;
  /// Successful attacks whose target class ranks first after the attack.
  std::size_t target_rank_one = 0;
};

ConfidenceSummary confidence_summary(const std::vector<AttackResult>& results);

}  // namespace advrl
