#include "advrl/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "advrl/metrics.hpp"
#include "advrl/parallel.hpp"

namespace advrl {

bool verify_success(const Model& model, const AttackResult& result, const AttackConfig& config) {
  const auto probs = model.predict_probabilities(result.perturbed);
  const auto d = distortion(result.perturbed, result.original);
  return meets_success(probs, result.target_label, d.rms, config) &&
         std::abs(d.rms - result.distortion) <= 1e-12;
}

ExemplarSelection select_exemplars(const Model& model, const Dataset& dataset,
                                   std::size_t per_class, std::uint64_t seed) {
  ExemplarSelection sel;
  sel.per_class.resize(dataset.classes);
  sel.misclassified.assign(dataset.classes, 0);
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < dataset.classes; ++c) {
    std::vector<std::size_t> correct;
    for (std::size_t idx : dataset.indices_of(c)) {
      if (model.predict(dataset.images[idx].pixels) == c)
        correct.push_back(idx);
      else
        ++sel.misclassified[c];
    }
    std::shuffle(correct.begin(), correct.end(), rng);
    if (correct.size() < per_class) sel.insufficient.push_back(c);
    correct.resize(std::min(correct.size(), per_class));
    sel.per_class[c] = std::move(correct);
  }
  return sel;
}

// ---------------------------------------------------------------- pair sweep

std::optional<double> PairSweepReport::rate(std::size_t source, std::size_t target) const {
  if (source == target || attempts[source][target] == 0) return std::nullopt;
  return static_cast<double>(successes[source][target]) / static_cast<double>(attempts[source][target]);
}

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<std::optional<double>> PairSweepReport::row_means() const {
  std::vector<std::optional<double>> out;
  for (std::size_t s = 0; s < classes; ++s) {
    std::vector<double> rates;
    for (std::size_t t = 0; t < classes; ++t)
      if (auto r = rate(s, t)) rates.push_back(*r);
    out.push_back(mean_of(rates));
  }
  return out;
}

std::vector<std::optional<double>> PairSweepReport::column_means() const {
  std::vector<std::optional<double>> out;
  for (std::size_t t = 0; t < classes; ++t) {
    std::vector<double> rates;
    for (std::size_t s = 0; s < classes; ++s)
      if (auto r = rate(s, t)) rates.push_back(*r);
    out.push_back(mean_of(rates));
  }
  return out;
}

std::optional<double> PairSweepReport::min_pair_rate() const {
  std::optional<double> lo;
  for (std::size_t s = 0; s < classes; ++s)
    for (std::size_t t = 0; t < classes; ++t)
      if (auto r = rate(s, t)) lo = lo ? std::min(*lo, *r) : *r;
  return lo;
}

SweepOutcome pair_sweep(const Model& model, const Dataset& dataset, std::size_t exemplars_per_class,
                        const AttackConfig& config, std::uint64_t seed, std::size_t workers) {
  config.validate();
  if (dataset.classes != model.classes())
    throw std::invalid_argument("pair_sweep: dataset has " + std::to_string(dataset.classes) +
                                " classes, model has " + std::to_string(model.classes()));
  if (exemplars_per_class == 0) throw std::invalid_argument("pair_sweep: need at least one exemplar per class");
  if (dataset.empty()) throw std::invalid_argument("pair_sweep: dataset is empty");
  const std::size_t k = dataset.classes;
  const ExemplarSelection sel = select_exemplars(model, dataset, exemplars_per_class, seed);

  SweepOutcome out;
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t idx : sel.per_class[s])
      for (std::size_t t = 0; t < k; ++t)
        if (t != s) out.attempts.push_back({s, t, idx, false, {}});

  parallel_for(out.attempts.size(), workers, [&](std::size_t i) {
    auto& a = out.attempts[i];
    a.result = relabel(model, dataset.images[a.dataset_index].pixels, a.target, config);
    a.verified = a.result.success && verify_success(model, a.result, config);
  });

  PairSweepReport& r = out.report;
  r.classes = k;
  r.exemplars_per_class = exemplars_per_class;
  r.distortion_cap = config.distortion_cap;
  r.seed = seed;
  r.attempts.assign(k, std::vector<std::size_t>(k, 0));
  r.successes.assign(k, std::vector<std::size_t>(k, 0));
  r.mean_distortion.assign(k, std::vector<std::optional<double>>(k));
  r.mean_iterations.assign(k, std::vector<std::optional<double>>(k));
  std::vector<std::vector<std::vector<double>>> dist(k, std::vector<std::vector<double>>(k));
  std::vector<std::vector<std::vector<double>>> iters(k, std::vector<std::vector<double>>(k));
  for (const auto& a : out.attempts) {
    ++r.attempts[a.source][a.target];
    ++r.total_attempts;
    if (!a.verified) continue;
    ++r.successes[a.source][a.target];
    ++r.total_successes;
    dist[a.source][a.target].push_back(a.result.distortion);
    iters[a.source][a.target].push_back(static_cast<double>(a.result.iterations_used));
  }
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t t = 0; t < k; ++t) {
      r.mean_distortion[s][t] = mean_of(dist[s][t]);
      r.mean_iterations[s][t] = mean_of(iters[s][t]);
    }
  r.overall_success_rate = r.total_attempts
                               ? static_cast<double>(r.total_successes) / static_cast<double>(r.total_attempts)
                               : 0.0;
  r.misclassified_skipped = sel.misclassified;
  r.insufficient_classes = sel.insufficient;
  return out;
}

// --------------------------------------------------------- transformations

const char* transform_name(ImageTransform t) {
  switch (t) {
    case ImageTransform::Identity: return "identity";
    case ImageTransform::Crop: return "crop";
    case ImageTransform::Translate: return "translate";
    case ImageTransform::Mirror: return "mirror";
  }
  return "unknown";
}

namespace {

void require_chw(const Tensor& image, const char* op) {
  if (image.rank() != 3) throw ShapeError(std::string(op) + ": expected [C,H,W], got " + to_string(image.shape()));
}

}  // namespace

Tensor center_crop_rescale(const Tensor& image, double fraction) {
  require_chw(image, "center_crop_rescale");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("center_crop_rescale: fraction must lie in (0,1]");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto ch = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(h))));
  const auto cw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(w))));
  const std::size_t oy = (h - ch) / 2, ox = (w - cw) / 2;
  Tensor out(image.shape());
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t sy = oy + std::min(ch - 1, static_cast<std::size_t>((static_cast<double>(y) + 0.5) * static_cast<double>(ch) / static_cast<double>(h)));
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t sx = ox + std::min(cw - 1, static_cast<std::size_t>((static_cast<double>(x) + 0.5) * static_cast<double>(cw) / static_cast<double>(w)));
        out[(k * h + y) * w + x] = image[(k * h + sy) * w + sx];
      }
    }
  return out;
}

Tensor translate_right(const Tensor& image, std::size_t pixels) {
  require_chw(image, "translate_right");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = pixels; x < w; ++x) out[(k * h + y) * w + x] = image[(k * h + y) * w + x - pixels];
  return out;
}

Tensor mirror_horizontal(const Tensor& image) {
  require_chw(image, "mirror_horizontal");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out[(k * h + y) * w + x] = image[(k * h + y) * w + (w - 1 - x)];
  return out;
}

Tensor apply_transform(const Tensor& image, ImageTransform t) {
  switch (t) {
    case ImageTransform::Identity: return image;
    case ImageTransform::Crop: return center_crop_rescale(image);
    case ImageTransform::Translate: return translate_right(image);
    case ImageTransform::Mirror: return mirror_horizontal(image);
  }
  return image;
}

double TransformCounts::stay_fraction() const {
  return total() ? static_cast<double>(stayed_target) / static_cast<double>(total()) : 0.0;
}

const TransformCounts& TransformReport::at(ImageTransform t) const {
  for (const auto& c : transforms)
    if (c.transform == t) return c;
  throw std::out_of_range(std::string("transform not in report: ") + transform_name(t));
}

TransformReport transform_suite(const Model& model, const std::vector<AttackResult>& adversarials) {
  for (const auto& a : adversarials)
    if (!a.success) throw std::invalid_argument("transform_suite: every adversarial must be successful");
  TransformReport report;
  report.samples = adversarials.size();
  for (auto t : {ImageTransform::Identity, ImageTransform::Crop, ImageTransform::Translate,
                 ImageTransform::Mirror}) {
    TransformCounts counts;
    counts.transform = t;
    for (const auto& a : adversarials) {
      const std::size_t label = model.predict(apply_transform(a.perturbed, t));
      if (label == a.target_label)
        ++counts.stayed_target;
      else if (label == a.original_label)
        ++counts.reverted;
      else
        ++counts.other;
    }
    report.transforms.push_back(counts);
  }
  return report;
}

// ----------------------------------------------------------------- transfer

TransferReport transfer_check(const Model& source, const Model& victim, const Dataset& dataset,
                              std::size_t n, const AttackConfig& config, std::uint64_t seed,
                              std::size_t workers) {
  config.validate();
  if (source.architecture().input != victim.architecture().input || source.classes() != victim.classes())
    throw std::invalid_argument("transfer_check: models disagree on input shape or class count");

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (source.predict(dataset.images[i].pixels) == dataset.images[i].label) pool.push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<std::size_t> targets(pool.size());
  std::uniform_int_distribution<std::size_t> pick(1, source.classes() - 1);
  for (std::size_t i = 0; i < pool.size(); ++i)
    targets[i] = (dataset.images[pool[i]].label + pick(rng)) % source.classes();

  TransferReport report;
  report.requested = n;
  report.test_accuracy_b = victim.metadata().test_accuracy;
  std::vector<const AttackResult*> built;
  std::vector<AttackResult> results(pool.size());
  std::size_t cursor = 0;
  while (built.size() < n && cursor < pool.size()) {
    const std::size_t batch = std::min(n - built.size(), pool.size() - cursor);
    parallel_for(batch, workers, [&](std::size_t i) {
      results[cursor + i] = relabel(source, dataset.images[pool[cursor + i]].pixels, targets[cursor + i], config);
    });
    for (std::size_t i = cursor; i < cursor + batch; ++i)
      if (results[i].success && built.size() < n) built.push_back(&results[i]);
    cursor += batch;
  }
  report.attempted = cursor;
  report.built = built.size();
  if (built.empty()) return report;

  std::size_t target = 0, original = 0, other = 0, clean_correct = 0;
  for (const AttackResult* r : built) {
    const std::size_t label = victim.predict(r->perturbed);
    if (label == r->target_label)
      ++target;
    else if (label == r->original_label)
      ++original;
    else
      ++other;
    clean_correct += victim.predict(r->original) == r->original_label;
  }
  const auto total = static_cast<double>(built.size());
  report.still_target = static_cast<double>(target) / total;
  report.original = static_cast<double>(original) / total;
  report.other = static_cast<double>(other) / total;
  report.clean_accuracy_b = static_cast<double>(clean_correct) / total;
  return report;
}

// --------------------------------------------------- single-step control

StepControlReport single_step_comparison(const Model& model, const std::vector<AttackResult>& iterative,
                                         const AttackConfig& config, std::size_t workers) {
  StepControlReport report;
  report.pairs = iterative.size();
  std::vector<std::optional<AttackResult>> controls(iterative.size());
  parallel_for(iterative.size(), workers, [&](std::size_t i) {
    const auto& it = iterative[i];
    if (!it.success) return;
    controls[i] = single_step_control(model, it.original, it.target_label,
                                      config.alpha * static_cast<double>(it.iterations_used), config);
  });
  for (std::size_t i = 0; i < iterative.size(); ++i) {
    if (!controls[i]) {
      ++report.skipped;
      continue;
    }
    ++report.iterative_successes;
    const auto& c = *controls[i];
    report.single_step_successes += c.success;
    report.single_step_misclassified += argmax(c.final_probabilities) != c.original_label;
    report.single_step_over_cap += c.distortion > config.distortion_cap;
  }
  if (report.pairs) {
    const auto n = static_cast<double>(report.pairs);
    report.iterative_rate = static_cast<double>(report.iterative_successes) / n;
    report.single_step_rate = static_cast<double>(report.single_step_successes) / n;
    report.untargeted_rate = static_cast<double>(report.single_step_misclassified) / n;
  }
  return report;
}

// ---------------------------------------------------------------- synthesis

SynthesisReport synthesis_sweep(const Model& model, const AttackConfig& config, std::size_t workers) {
  SynthesisReport report;
  report.results.resize(model.classes());
  parallel_for(model.classes(), workers, [&](std::size_t t) {
    AttackConfig c = config;
    c.rng_seed = config.rng_seed + t;
    report.results[t] = synthesize_from_noise(model, t, c);
  });
  std::vector<double> dist;
  for (const auto& r : report.results) {
    if (!r.success) continue;
    ++report.reached;
    if (r.iterations_used > 0) dist.push_back(r.distortion);
  }
  report.mean_distortion = mean_of(dist);
  return report;
}

// ---------------------------------------------------------------- confidence

ConfidenceSummary confidence_summary(const std::vector<AttackResult>& results) {
  ConfidenceSummary s;
  std::vector<double> probs;
  for (const auto& r : results) {
    if (!r.success) continue;
    ++s.successes;
    const double p = r.final_probabilities[r.target_label];
    s.at_least_half += p >= 0.5;
    s.target_rank_one += probability_rank(r.final_probabilities, r.target_label) == 1;
    probs.push_back(p);
  }
  if (!probs.empty()) s.median_target_probability = median(probs);
  return s;
}

}  // namespace advrl
