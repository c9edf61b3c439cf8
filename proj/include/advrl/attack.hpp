#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "advrl/model.hpp"
#include "advrl/tensor.hpp"

namespace advrl {

/// How the input gradient is turned into an update direction.
enum class GradientMode {
  SignScaled,  // sign(g) / 255, with sign(0) = 0
  Raw,         // g unchanged
};

const char* gradient_mode_name(GradientMode mode);
GradientMode parse_gradient_mode(const std::string& name);

struct AttackConfig {
  double alpha = 1.0;
  std::size_t max_iterations = 500;
  double distortion_cap = 0.1;
  GradientMode gradient_mode = GradientMode::SignScaled;
  double success_confidence = 0.5;
  bool clamp_pixels = true;
  std::uint64_t rng_seed = 0;
  bool trace = false;

  /// Throws std::invalid_argument when alpha or the cap is not positive or
  /// the confidence lies outside (0,1).
  void validate() const;
};

struct TracePoint {
  std::size_t iteration = 0;
  double loss = 0.0;
  double target_probability = 0.0;
  double distortion = 0.0;
};

struct AttackResult {
  bool success = false;
  /// Target equals the label the model already assigned to the start image.
  bool degenerate = false;
  Tensor original;
  Tensor perturbed;
  std::size_t iterations_used = 0;
  double distortion = 0.0;
  double linf = 0.0;
  std::vector<double> final_probabilities;
  std::size_t original_label = 0;
  std::size_t target_label = 0;
  std::vector<TracePoint> trace;
};

/// Holds whenever `success` is set: target is the argmax, reaches the
/// confidence threshold, and distortion stays within the cap.
bool meets_success(const std::vector<double>& probabilities, std::size_t target, double distortion,
                   const AttackConfig& config);

Tensor scale_gradient(const Tensor& grad, GradientMode mode);

/// x - alpha * scale_gradient(grad), clamped to [0,1] when configured.
Tensor update_step(const Tensor& x, const Tensor& grad, const AttackConfig& config);

/// Descends the target-class loss from `image` until the success condition
/// holds, the next step would leave the distortion budget (the last
/// in-budget iterate is kept), or max_iterations is reached.
AttackResult relabel(const Model& model, const Tensor& image, std::size_t target,
                     const AttackConfig& config);

/// Gaussian image, mean 0.5 and standard deviation 0.15, clamped to [0,1].
Tensor gaussian_noise_image(const Shape& shape, std::uint64_t seed);

/// relabel() started from gaussian_noise_image(input shape, config.rng_seed).
AttackResult synthesize_from_noise(const Model& model, std::size_t target,
                                   const AttackConfig& config);

/// One step of length `budget` along the sign of the first gradient:
/// x - budget * sign(g0) / 255. Success requires the target to be the
/// argmax with at least the configured confidence; the distortion cap is
/// not applied, so `distortion` may exceed it.
AttackResult single_step_control(const Model& model, const Tensor& image, std::size_t target,
                                 double budget, const AttackConfig& config);

}  // namespace advrl
