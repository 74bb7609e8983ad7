#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "vrap/classifier.hpp"
#include "vrap/placement.hpp"
#include "vrap/rng.hpp"
#include "vrap/search.hpp"
#include "vrap/transforms.hpp"
#include "vrap/types.hpp"

namespace vrap {

// Brightness parameters stay inside this box: unbounded descent would drive
// lam to zero, blanking the patch and trivializing the inner minimization.
// The box covers realistic printer deviations only.
inline constexpr double kGammaParamMin = 0.5;
inline constexpr double kGammaParamMax = 2.0;

struct AttackResult {
  Patch patch;                            // final perturbed patch
  Placement final_placement;
  std::vector<double> loss_trace;         // objective value per iteration
  std::vector<GammaParams> gamma_trace;   // (lam, gamma) after each iteration
  std::vector<Placement> position_trace;  // placement used in each iteration
  bool image_initially_misclassified = false;
};

// Initial patch position: uniform over valid placements, row then column.
inline Placement sample_initial_placement(int image_h, int image_w, int patch_h,
                                          int patch_w, std::uint64_t seed) {
  if (patch_h > image_h || patch_w > image_w)
    throw InvalidPlacementError("patch larger than image");
  Rng rng(seed);
  Placement p;
  p.i = rng.uniform_int(0, image_h - patch_h);
  p.j = rng.uniform_int(0, image_w - patch_w);
  return p;
}

namespace detail {

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct AttackMode {
  bool position_search = false;
  bool gamma = false;
  double tv_weight = 0.0;
};

// One engine drives both attack flavors so that turning every extra off
// reproduces plain PGD bit for bit.
inline AttackResult run_attack_loop(const Image& image, const Tensor& reference,
                                    Placement placement, const AttackConfig& config,
                                    const ClassifierAdapter& model,
                                    const AttackMode& mode) {
  config.validate();
  if (reference.channels() != image.channels())
    throw ShapeMismatchError("attack: reference channel count differs from image");
  if (!reference.all_in(0.0, 1.0))
    throw DomainError("attack: reference values must lie in [0, 1]");
  if (!validate_placement(image.height(), image.width(), reference.height(),
                          reference.width(), placement))
    throw InvalidPlacementError("attack: initial placement invalid");

  const int h = reference.height();
  const int w = reference.width();
  const int label = image.label();
  const double alpha = config.epsilon / config.iterations;
  const double beta =
      config.gamma_lr > 0.0 ? config.gamma_lr : config.epsilon / config.iterations;

  AttackResult result{Patch(reference, reference, config.epsilon),
                      placement,
                      {},
                      {},
                      {},
                      model.predict_one(image.pixels()) != label};
  result.loss_trace.reserve(config.iterations);
  result.gamma_trace.reserve(config.iterations);
  result.position_trace.reserve(config.iterations);

  Tensor delta = reference;
  GammaParams params;  // lam = gamma = 1

  for (int t = 0; t < config.iterations; ++t) {
    // Position update: the search evaluates the same composite the gradient
    // ascends, i.e. the patch as the model would see it right now.
    if (mode.position_search && config.search_range > 0) {
      const Tensor composite = mode.gamma ? gamma_transform(delta, params) : delta;
      placement = axis_search(
          image, composite,
          SearchWindow{placement, config.search_range, config.search_stride}, model);
    }

    // Ascent step on delta.
    double objective = 0.0;
    Tensor delta_grad(h, w, image.channels());
    if (mode.gamma) {
      const GammaGradients gg = gamma_transform_with_gradients(delta, params);
      const Tensor pasted = paste_pixels(image.pixels(), gg.value, placement);
      auto [loss_value, input_grad] = model.loss_and_input_gradient_one(pasted, label);
      objective = loss_value;
      const Tensor window_grad = extract(input_grad, placement, h, w);
      for (std::size_t idx = 0; idx < delta_grad.size(); ++idx)
        delta_grad[idx] = window_grad[idx] * gg.d_delta[idx];
    } else {
      const Tensor pasted = paste_pixels(image.pixels(), delta, placement);
      auto [loss_value, input_grad] = model.loss_and_input_gradient_one(pasted, label);
      objective = loss_value;
      delta_grad = extract(input_grad, placement, h, w);
    }
    if (mode.tv_weight > 0.0) {
      objective += mode.tv_weight * tv_loss(delta);
      const Tensor tv_grad = tv_gradient(delta);
      for (std::size_t idx = 0; idx < delta_grad.size(); ++idx)
        delta_grad[idx] += mode.tv_weight * tv_grad[idx];
    }
    for (std::size_t idx = 0; idx < delta.size(); ++idx)
      delta[idx] += alpha * sign(delta_grad[idx]);
    delta = project_linf(delta, reference, config.epsilon);

    // Descent step on (lam, gamma) against the updated patch.
    if (mode.gamma) {
      const GammaGradients gg = gamma_transform_with_gradients(delta, params);
      const Tensor pasted = paste_pixels(image.pixels(), gg.value, placement);
      const Tensor window_grad =
          extract(model.input_gradient_one(pasted, label), placement, h, w);
      double g_lam = 0.0;
      double g_gamma = 0.0;
      for (std::size_t idx = 0; idx < window_grad.size(); ++idx) {
        g_lam += window_grad[idx] * gg.d_lam[idx];
        g_gamma += window_grad[idx] * gg.d_gamma[idx];
      }
      params.lam = std::clamp(params.lam - beta * g_lam, kGammaParamMin, kGammaParamMax);
      params.gamma =
          std::clamp(params.gamma - beta * g_gamma, kGammaParamMin, kGammaParamMax);
    }

    result.loss_trace.push_back(objective);
    result.gamma_trace.push_back(params);
    result.position_trace.push_back(placement);
  }

  result.patch = Patch(std::move(delta), reference, config.epsilon);
  result.final_placement = placement;
  return result;
}

}  // namespace detail

// The full attack: epsilon-ball PGD on the patch, a local position search
// toward the poorest placement each iteration, and a min-player on the
// brightness distortion so the result survives printing.
inline AttackResult vrap_attack(const Image& image, const Tensor& reference,
                                const AttackConfig& config,
                                const ClassifierAdapter& model) {
  config.validate();
  const auto [h, w] = patch_shape_for(image, config.patch_size);
  if (reference.height() != h || reference.width() != w)
    throw ShapeMismatchError("vrap_attack: reference shape does not match patch_size");
  const Placement start = sample_initial_placement(image.height(), image.width(),
                                                   h, w, config.seed);
  detail::AttackMode mode;
  mode.position_search = true;
  mode.gamma = config.gamma_enabled;
  mode.tv_weight = config.tv_weight;
  return detail::run_attack_loop(image, reference, start, config, model, mode);
}

// Plain projected sign-ascent at a fixed placement: no position search, no
// brightness player, no smoothness term. The ablation baseline.
inline AttackResult fixed_position_attack(const Image& image, const Tensor& reference,
                                          const Placement& placement,
                                          const AttackConfig& config,
                                          const ClassifierAdapter& model) {
  return detail::run_attack_loop(image, reference, placement, config, model,
                                 detail::AttackMode{});
}

}  // namespace vrap
