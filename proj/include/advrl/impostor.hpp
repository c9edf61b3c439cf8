#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "advrl/attack.hpp"
#include "advrl/dataset.hpp"
#include "advrl/model.hpp"
#include "advrl/svm.hpp"

namespace advrl {

enum class FeatureOrigin { Genuine, Relabelled };

struct FeatureVector {
  FeatureValues values;
  FeatureOrigin origin = FeatureOrigin::Genuine;
  std::size_t target_class = 0;
};

enum class FeatureSource {
  Penultimate,    // activations feeding the final dense layer
  Probabilities,  // softmax output, a control that should carry little signal
};

const char* feature_source_name(FeatureSource source);
FeatureSource parse_feature_source(const std::string& name);

struct ImpostorConfig {
  /// Drawn uniformly per repeat when unset.
  std::optional<std::size_t> target_class;
  std::size_t repeats = 10;
  std::size_t relabelled = 50;
  std::size_t genuine = 50;
  std::size_t train_per_origin = 20;
  AttackConfig attack;
  SvmConfig svm;
  bool standardize = false;
  FeatureSource features = FeatureSource::Penultimate;
  /// Control: permute origin labels before splitting.
  bool shuffle_labels = false;
};

struct ImpostorRepeat {
  std::size_t repeat = 0;
  std::size_t target = 0;
  bool skipped = false;
  std::string skip_reason;
  std::size_t attacks_run = 0;
  std::size_t tested = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double gamma = 0.0;
  /// Mean Euclidean distance between relabelled and genuine feature vectors.
  double mean_cross_distance = 0.0;
  double kkt_violation = 0.0;
};

struct ImpostorReport {
  std::vector<ImpostorRepeat> repeats;
  std::optional<double> mean_accuracy;
  std::size_t completed = 0;
};

FeatureValues extract_features(const Model& model, const Tensor& image, FeatureSource source);

/// Relabels non-target images to the target class and trains an RBF SVM to
/// tell them apart from genuine target-class images by their features.
/// Per repeat: `relabelled` impostors and `genuine` exemplars; the first
/// train_per_origin of each train the detector, the rest test it.
ImpostorReport impostor_experiment(const Model& model, const Dataset& dataset, const ImpostorConfig& config,
                                   std::uint64_t seed, std::size_t workers = 1);

}  // namespace advrl
