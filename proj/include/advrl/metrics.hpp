#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "advrl/tensor.hpp"

namespace advrl {

class Model;

struct DistortionReport {
  double rms = 0.0;   // sqrt(sum (x' - x)^2 / n)
  double linf = 0.0;  // max |x' - x|
  std::size_t n = 0;  // every element, all channels included
};

/// Root-mean-square and max-abs difference between two same-shaped tensors.
DistortionReport distortion(const Tensor& x_prime, const Tensor& x);

struct ClassProbability {
  std::size_t label = 0;
  double probability = 0.0;
};

/// Top-k entries sorted by descending probability, ties by ascending class.
std::vector<ClassProbability> probability_report(const std::vector<double>& probabilities,
                                                 std::size_t top_k);
std::vector<ClassProbability> probability_report(const Model& model, const Tensor& image,
                                                 std::size_t top_k);

/// 1-based rank of `label` in the full probability ordering.
std::size_t probability_rank(const std::vector<double>& probabilities, std::size_t label);

double median(std::vector<double> values);

}  // namespace advrl
