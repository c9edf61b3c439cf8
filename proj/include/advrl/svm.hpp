#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace advrl {

using FeatureValues = std::vector<double>;

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma);

/// gamma = 1 / (d * mean per-coordinate variance) over the pooled inputs.
/// Falls back to 1/d when every coordinate is constant.
double default_gamma(std::span<const FeatureValues> positives, std::span<const FeatureValues> negatives);

struct SvmConfig {
  double c = 1.0;
  std::optional<double> gamma;  // default_gamma() when unset
  double tolerance = 1e-3;      // KKT gap at which optimization stops
  std::size_t max_iterations = 1'000'000;
};

/// Soft-margin RBF classifier. Label +1 is the positive class.
struct SvmModel {
  std::vector<FeatureValues> support_vectors;
  std::vector<double> alphas;  // dual coefficients in [0, C], one per support vector
  std::vector<int> labels;     // +1 / -1, one per support vector
  /// Position of each support vector in the training order (positives first).
  std::vector<std::size_t> support_indices;
  double bias = 0.0;
  double gamma = 1.0;
  double c = 1.0;
  std::size_t dimension = 0;
  std::size_t iterations = 0;
  double final_gap = 0.0;

  /// sum_i alpha_i y_i K(s_i, x) + b
  double decision(std::span<const double> x) const;
  bool predict(std::span<const double> x) const { return decision(x) > 0.0; }
};

/// Sequential minimal optimization of the dual, choosing the maximal
/// violating pair each step. Deterministic for a given input order.
SvmModel svm_train(std::span<const FeatureValues> positives, std::span<const FeatureValues> negatives,
                   const SvmConfig& config = {});

/// Largest pointwise KKT violation of the trained model on its training set,
/// evaluated from decision values rather than solver state.
double kkt_violation(const SvmModel& model, std::span<const FeatureValues> positives,
                     std::span<const FeatureValues> negatives);

}  // namespace advrl
