#include "advrl/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace advrl {

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

double default_gamma(std::span<const FeatureValues> positives, std::span<const FeatureValues> negatives) {
  const std::size_t n = positives.size() + negatives.size();
  if (n == 0) throw std::invalid_argument("default_gamma: no samples");
  const std::size_t d = positives.empty() ? negatives.front().size() : positives.front().size();
  std::vector<double> mean(d, 0.0), sq(d, 0.0);
  auto accumulate = [&](std::span<const FeatureValues> set) {
    for (const auto& x : set)
      for (std::size_t k = 0; k < d; ++k) {
        mean[k] += x[k];
        sq[k] += x[k] * x[k];
      }
  };
  accumulate(positives);
  accumulate(negatives);
  double variance = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double m = mean[k] / static_cast<double>(n);
    variance += std::max(0.0, sq[k] / static_cast<double>(n) - m * m);
  }
  variance /= static_cast<double>(d);
  return variance > 0.0 ? 1.0 / (static_cast<double>(d) * variance) : 1.0 / static_cast<double>(d);
}

double SvmModel::decision(std::span<const double> x) const {
  if (x.size() != dimension)
    throw std::invalid_argument("svm: input dimension " + std::to_string(x.size()) + ", model expects " +
                                std::to_string(dimension));
  double f = bias;
  for (std::size_t i = 0; i < support_vectors.size(); ++i)
    f += alphas[i] * labels[i] * rbf_kernel(support_vectors[i], x, gamma);
  return f;
}

namespace {

constexpr double kTau = 1e-12;

std::size_t check_inputs(std::span<const FeatureValues> positives, std::span<const FeatureValues> negatives) {
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("svm_train: both classes need at least one sample");
  const std::size_t d = positives.front().size();
  if (d == 0) throw std::invalid_argument("svm_train: zero-dimensional features");
  for (auto set : {positives, negatives})
    for (const auto& x : set)
      if (x.size() != d)
        throw std::invalid_argument("svm_train: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                                    std::to_string(d) + ")");
  return d;
}

}  // namespace

SvmModel svm_train(std::span<const FeatureValues> positives, std::span<const FeatureValues> negatives,
                   const SvmConfig& config) {
  const std::size_t d = check_inputs(positives, negatives);
  if (!(config.c > 0.0)) throw std::invalid_argument("svm_train: C must be positive");
  const double gamma = config.gamma ? *config.gamma : default_gamma(positives, negatives);
  if (!(gamma > 0.0)) throw std::invalid_argument("svm_train: gamma must be positive");

  std::vector<const FeatureValues*> x;
  std::vector<int> y;
  for (const auto& p : positives) x.push_back(&p), y.push_back(+1);
  for (const auto& q : negatives) x.push_back(&q), y.push_back(-1);
  const std::size_t n = x.size();
  const double c = config.c;

  std::vector<double> kernel(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) kernel[i * n + j] = kernel[j * n + i] = rbf_kernel(*x[i], *x[j], gamma);
  auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * kernel[i * n + j]; };

  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < c) || (y[t] == -1 && alpha[t] > 0.0); };
  auto in_low = [&](std::size_t t) { return (y[t] == -1 && alpha[t] < c) || (y[t] == 1 && alpha[t] > 0.0); };

  SvmModel model;
  std::size_t iter = 0;
  double gap = 0.0;
  for (; iter < config.max_iterations; ++iter) {
    double up_max = -std::numeric_limits<double>::infinity();
    double low_min = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > up_max) up_max = v, i = t;
      if (in_low(t) && v < low_min) low_min = v, j = t;
    }
    gap = up_max - low_min;
    if (i == n || j == n || gap < config.tolerance) break;

    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = kernel[i * n + i] + kernel[j * n + j] + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) alpha[j] = 0.0, alpha[i] = diff;
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0, alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = c - diff;
      } else if (alpha[j] > c) {
        alpha[j] = c, alpha[i] = c + diff;
      }
    } else {
      double quad = kernel[i * n + i] + kernel[j * n + j] - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double total = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (total > c) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = total - c;
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0, alpha[i] = total;
      }
      if (total > c) {
        if (alpha[j] > c) alpha[j] = c, alpha[i] = total - c;
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0, alpha[j] = total;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(t, i) * di + q(t, j) * dj;
  }

  // Offset: average over free vectors, else the middle of the feasible range.
  double free_sum = 0.0, ub = std::numeric_limits<double>::infinity(), lb = -ub;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);

  model.bias = -rho;
  model.gamma = gamma;
  model.c = c;
  model.dimension = d;
  model.iterations = iter;
  model.final_gap = gap;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] <= 0.0) continue;
    model.support_vectors.push_back(*x[t]);
    model.alphas.push_back(alpha[t]);
    model.labels.push_back(y[t]);
    model.support_indices.push_back(t);
  }
  return model;
}

double kkt_violation(const SvmModel& model, std::span<const FeatureValues> positives,
                     std::span<const FeatureValues> negatives) {
  std::vector<double> alpha(positives.size() + negatives.size(), 0.0);
  for (std::size_t s = 0; s < model.support_indices.size(); ++s) alpha[model.support_indices[s]] = model.alphas[s];
  double worst = 0.0;
  std::size_t t = 0;
  for (auto [set, label] : {std::pair{positives, 1}, std::pair{negatives, -1}}) {
    for (const auto& x : set) {
      const double margin = label * model.decision(x);
      double v = 0.0;
      if (alpha[t] <= 0.0)
        v = std::max(0.0, 1.0 - margin);
      else if (alpha[t] >= model.c)
        v = std::max(0.0, margin - 1.0);
      else
        v = std::abs(margin - 1.0);
      worst = std::max(worst, v);
      ++t;
    }
  }
  return worst;
}

}  // namespace advrl
