#include "advrl/impostor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "advrl/parallel.hpp"

namespace advrl {

const char* feature_source_name(FeatureSource source) {
  return source == FeatureSource::Penultimate ? "penultimate" : "probabilities";
}

FeatureSource parse_feature_source(const std::string& name) {
  if (name == "penultimate") return FeatureSource::Penultimate;
  if (name == "probabilities") return FeatureSource::Probabilities;
  throw std::invalid_argument("unknown feature source '" + name + "'");
}

FeatureValues extract_features(const Model& model, const Tensor& image, FeatureSource source) {
  return source == FeatureSource::Penultimate ? model.penultimate_features(image)
                                              : model.predict_probabilities(image);
}

namespace {

double euclidean(const FeatureValues& a, const FeatureValues& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// z-scores every coordinate with statistics of the training rows.
void standardize(std::vector<FeatureValues>& train, std::vector<FeatureValues>& test) {
  const std::size_t d = train.front().size();
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0, sq = 0.0;
    for (const auto& x : train) mean += x[k], sq += x[k] * x[k];
    mean /= static_cast<double>(train.size());
    const double var = sq / static_cast<double>(train.size()) - mean * mean;
    const double scale = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
    for (auto* set : {&train, &test})
      for (auto& x : *set) x[k] = (x[k] - mean) * scale;
  }
}

ImpostorRepeat run_repeat(const Model& model, const Dataset& dataset, const ImpostorConfig& config,
                          std::uint64_t seed, std::size_t repeat, std::size_t workers) {
  ImpostorRepeat out;
  out.repeat = repeat;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(repeat)};
  std::mt19937_64 rng(seq);
  out.target = config.target_class
                   ? *config.target_class
                   : std::uniform_int_distribution<std::size_t>(0, model.classes() - 1)(rng);

  std::vector<std::size_t> genuine_pool, impostor_pool;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& item = dataset.images[i];
    if (model.predict(item.pixels) != item.label) continue;
    (item.label == out.target ? genuine_pool : impostor_pool).push_back(i);
  }
  std::shuffle(genuine_pool.begin(), genuine_pool.end(), rng);
  std::shuffle(impostor_pool.begin(), impostor_pool.end(), rng);
  if (genuine_pool.size() < config.genuine) {
    out.skipped = true;
    out.skip_reason = "only " + std::to_string(genuine_pool.size()) + " genuine exemplars";
    return out;
  }

  // Attack the shuffled pool in order until enough relabellings succeed.
  std::vector<Tensor> impostors;
  std::size_t cursor = 0;
  while (impostors.size() < config.relabelled && cursor < impostor_pool.size()) {
    const std::size_t batch = std::min(config.relabelled - impostors.size(), impostor_pool.size() - cursor);
    std::vector<AttackResult> results(batch);
    parallel_for(batch, workers, [&](std::size_t i) {
      results[i] = relabel(model, dataset.images[impostor_pool[cursor + i]].pixels, out.target, config.attack);
    });
    for (auto& r : results)
      if (r.success && impostors.size() < config.relabelled) impostors.push_back(std::move(r.perturbed));
    cursor += batch;
  }
  out.attacks_run = cursor;
  if (impostors.size() < config.relabelled) {
    out.skipped = true;
    out.skip_reason = "only " + std::to_string(impostors.size()) + " successful relabellings";
    return out;
  }

  std::vector<FeatureVector> features;
  for (const auto& img : impostors)
    features.push_back({extract_features(model, img, config.features), FeatureOrigin::Relabelled, out.target});
  for (std::size_t i = 0; i < config.genuine; ++i)
    features.push_back({extract_features(model, dataset.images[genuine_pool[i]].pixels, config.features),
                        FeatureOrigin::Genuine, out.target});

  double dist = 0.0;
  for (std::size_t a = 0; a < config.relabelled; ++a)
    for (std::size_t b = config.relabelled; b < features.size(); ++b)
      dist += euclidean(features[a].values, features[b].values);
  out.mean_cross_distance = dist / static_cast<double>(config.relabelled * config.genuine);

  if (config.shuffle_labels) {
    std::vector<FeatureOrigin> origins;
    for (const auto& f : features) origins.push_back(f.origin);
    std::shuffle(origins.begin(), origins.end(), rng);
    for (std::size_t i = 0; i < features.size(); ++i) features[i].origin = origins[i];
  }

  std::vector<FeatureValues> relabelled, genuine;
  for (const auto& f : features)
    (f.origin == FeatureOrigin::Relabelled ? relabelled : genuine).push_back(f.values);
  std::shuffle(relabelled.begin(), relabelled.end(), rng);
  std::shuffle(genuine.begin(), genuine.end(), rng);
  const std::size_t k = config.train_per_origin;
  if (relabelled.size() <= k || genuine.size() <= k) {
    out.skipped = true;
    out.skip_reason = "no held-out samples after the training split";
    return out;
  }

  std::vector<FeatureValues> train_pos(relabelled.begin(), relabelled.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<FeatureValues> train_neg(genuine.begin(), genuine.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<FeatureValues> test_pos(relabelled.begin() + static_cast<std::ptrdiff_t>(k), relabelled.end());
  std::vector<FeatureValues> test_neg(genuine.begin() + static_cast<std::ptrdiff_t>(k), genuine.end());
  if (config.standardize) {
    std::vector<FeatureValues> train = train_pos;
    train.insert(train.end(), train_neg.begin(), train_neg.end());
    std::vector<FeatureValues> test = test_pos;
    test.insert(test.end(), test_neg.begin(), test_neg.end());
    standardize(train, test);
    std::copy(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(k), train_pos.begin());
    std::copy(train.begin() + static_cast<std::ptrdiff_t>(k), train.end(), train_neg.begin());
    std::copy(test.begin(), test.begin() + static_cast<std::ptrdiff_t>(test_pos.size()), test_pos.begin());
    std::copy(test.begin() + static_cast<std::ptrdiff_t>(test_pos.size()), test.end(), test_neg.begin());
  }

  const SvmModel svm = svm_train(train_pos, train_neg, config.svm);
  out.gamma = svm.gamma;
  out.kkt_violation = kkt_violation(svm, train_pos, train_neg);
  for (const auto& x : test_pos) out.correct += svm.predict(x);
  for (const auto& x : test_neg) out.correct += !svm.predict(x);
  out.tested = test_pos.size() + test_neg.size();
  out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.tested);
  return out;
}

}  // namespace

ImpostorReport impostor_experiment(const Model& model, const Dataset& dataset, const ImpostorConfig& config,
                                   std::uint64_t seed, std::size_t workers) {
  config.attack.validate();
  if (config.target_class && *config.target_class >= model.classes())
    throw std::out_of_range("impostor_experiment: target class outside the model's range");
  if (config.train_per_origin == 0) throw std::invalid_argument("impostor_experiment: empty training split");

  ImpostorReport report;
  double total = 0.0;
  for (std::size_t r = 0; r < config.repeats; ++r) {
    report.repeats.push_back(run_repeat(model, dataset, config, seed, r, workers));
    if (!report.repeats.back().skipped) {
      ++report.completed;
      total += report.repeats.back().accuracy;
    }
  }
  if (report.completed) report.mean_accuracy = total / static_cast<double>(report.completed);
  return report;
}

}  // namespace advrl
