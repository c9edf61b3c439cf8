#include "advrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advrl/model.hpp"

namespace advrl {

DistortionReport distortion(const Tensor& x_prime, const Tensor& x) {
  if (x_prime.shape() != x.shape())
    throw ShapeError("distortion: shapes " + to_string(x_prime.shape()) + " and " +
                     to_string(x.shape()) + " differ");
  DistortionReport r;
  r.n = x.size();
  double squares = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x_prime[i] - x[i];
    squares += d * d;
    r.linf = std::max(r.linf, std::abs(d));
  }
  r.rms = std::sqrt(squares / static_cast<double>(r.n));
  return r;
}

namespace {

std::vector<std::size_t> ranked(const std::vector<double>& p) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  return order;
}

}  // namespace

std::vector<ClassProbability> probability_report(const std::vector<double>& probabilities,
                                                 std::size_t top_k) {
  if (top_k > probabilities.size())
    throw std::invalid_argument("probability_report: top_k " + std::to_string(top_k) +
                                " exceeds class count " + std::to_string(probabilities.size()));
  const auto order = ranked(probabilities);
  std::vector<ClassProbability> out;
  for (std::size_t i = 0; i < top_k; ++i) out.push_back({order[i], probabilities[order[i]]});
  return out;
}

std::vector<ClassProbability> probability_report(const Model& model, const Tensor& image,
                                                 std::size_t top_k) {
  return probability_report(model.predict_probabilities(image), top_k);
}

std::size_t probability_rank(const std::vector<double>& probabilities, std::size_t label) {
  const auto order = ranked(probabilities);
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), label) - order.begin()) + 1;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace advrl
