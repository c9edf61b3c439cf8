#include "advrl/attack.hpp"

#include <algorithm>
#include <random>

#include "advrl/metrics.hpp"

namespace advrl {

const char* gradient_mode_name(GradientMode mode) {
  return mode == GradientMode::SignScaled ? "sign" : "raw";
}

GradientMode parse_gradient_mode(const std::string& name) {
  if (name == "sign") return GradientMode::SignScaled;
  if (name == "raw") return GradientMode::Raw;
  throw std::invalid_argument("unknown gradient mode '" + name + "' (expected sign or raw)");
}

void AttackConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("attack: alpha must be positive");
  if (!(distortion_cap > 0.0)) throw std::invalid_argument("attack: distortion cap must be positive");
  if (!(success_confidence > 0.0 && success_confidence < 1.0))
    throw std::invalid_argument("attack: success confidence must lie in (0,1)");
}

bool meets_success(const std::vector<double>& probabilities, std::size_t target, double distortion,
                   const AttackConfig& config) {
  return argmax(probabilities) == target && probabilities[target] >= config.success_confidence &&
         distortion <= config.distortion_cap;
}

Tensor scale_gradient(const Tensor& grad, GradientMode mode) {
  if (mode == GradientMode::Raw) return grad;
  Tensor out(grad.shape());
  for (std::size_t i = 0; i < grad.size(); ++i)
    out[i] = grad[i] > 0.0 ? 1.0 / 255.0 : (grad[i] < 0.0 ? -1.0 / 255.0 : 0.0);
  return out;
}

Tensor update_step(const Tensor& x, const Tensor& grad, const AttackConfig& config) {
  if (x.shape() != grad.shape())
    throw ShapeError("update_step: image " + to_string(x.shape()) + " vs gradient " +
                     to_string(grad.shape()));
  const Tensor dir = scale_gradient(grad, config.gradient_mode);
  Tensor next(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    next[i] = x[i] - config.alpha * dir[i];
    if (config.clamp_pixels) next[i] = std::clamp(next[i], 0.0, 1.0);
  }
  return next;
}

namespace {

void check_inputs(const Model& model, const Tensor& image, std::size_t target) {
  if (target >= model.classes())
    throw std::out_of_range("attack: target " + std::to_string(target) + " outside [0," +
                            std::to_string(model.classes()) + ")");
  if (image.shape() != model.architecture().input)
    throw ShapeError("attack: image shape " + to_string(image.shape()) + " does not match model input " +
                     to_string(model.architecture().input));
  for (double p : image.data())
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("attack: image pixels must lie in [0,1]");
}

}  // namespace

AttackResult relabel(const Model& model, const Tensor& image, std::size_t target,
                     const AttackConfig& config) {
  config.validate();
  check_inputs(model, image, target);

  AttackResult r;
  r.original = image;
  r.target_label = target;
  Tensor x = image;
  InputEvaluation ev = model.evaluate(x, target);
  r.original_label = argmax(ev.probabilities);
  r.degenerate = r.original_label == target;

  DistortionReport d = distortion(x, image);
  for (std::size_t it = 0;; ++it) {
    if (config.trace) r.trace.push_back({it, ev.loss, ev.probabilities[target], d.rms});
    r.iterations_used = it;
    if (meets_success(ev.probabilities, target, d.rms, config)) {
      r.success = true;
      break;
    }
    if (it == config.max_iterations) break;
    Tensor next = update_step(x, ev.input_gradient, config);
    const DistortionReport dn = distortion(next, image);
    if (dn.rms > config.distortion_cap) break;
    x = std::move(next);
    d = dn;
    ev = model.evaluate(x, target);
  }
  r.perturbed = std::move(x);
  r.distortion = d.rms;
  r.linf = d.linf;
  r.final_probabilities = std::move(ev.probabilities);
  return r;
}

Tensor gaussian_noise_image(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.5, 0.15);
  Tensor img(shape);
  for (auto& v : img.data()) v = std::clamp(normal(rng), 0.0, 1.0);
  return img;
}

AttackResult synthesize_from_noise(const Model& model, std::size_t target,
                                   const AttackConfig& config) {
  return relabel(model, gaussian_noise_image(model.architecture().input, config.rng_seed), target,
                 config);
}

AttackResult single_step_control(const Model& model, const Tensor& image, std::size_t target,
                                 double budget, const AttackConfig& config) {
  config.validate();
  check_inputs(model, image, target);
  if (budget < 0.0) throw std::invalid_argument("single_step_control: budget must be >= 0");

  AttackResult r;
  r.original = image;
  r.target_label = target;
  const InputEvaluation ev = model.evaluate(image, target);
  r.original_label = argmax(ev.probabilities);
  r.degenerate = r.original_label == target;

  Tensor x = image;
  if (budget > 0.0) {
    AttackConfig step = config;
    step.alpha = budget;
    step.gradient_mode = GradientMode::SignScaled;
    x = update_step(image, ev.input_gradient, step);
    r.iterations_used = 1;
  }
  const DistortionReport d = distortion(x, image);
  r.final_probabilities = budget > 0.0 ? model.predict_probabilities(x) : ev.probabilities;
  r.distortion = d.rms;
  r.linf = d.linf;
  r.perturbed = std::move(x);
  r.success = argmax(r.final_probabilities) == target &&
              r.final_probabilities[target] >= config.success_confidence;
  return r;
}

}  // namespace advrl
