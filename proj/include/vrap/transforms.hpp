#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "vrap/rng.hpp"
#include "vrap/tensor.hpp"
#include "vrap/types.hpp"

namespace vrap {

// Values below this floor are clamped before exponentiation so that u^gamma
// and its gamma-gradient (which involves log u) stay finite at zero pixels.
inline constexpr double kGammaFloor = 1e-6;

struct GammaParams {
  double lam = 1.0;
  double gamma = 1.0;

  void validate() const {
    if (!(lam > 0.0) || !(gamma > 0.0))
      throw DomainError("GammaParams: lam and gamma must be positive");
  }
};

// Brightness/contrast distortion lam * delta^gamma, the digital model of what
// a printer does to pixel values. Input is clamped to [kGammaFloor, 1] before
// exponentiation and the result is clamped back to [0, 1].
inline Tensor gamma_transform(const Tensor& delta, const GammaParams& params) {
  params.validate();
  Tensor out(delta.height(), delta.width(), delta.channels());
  for (std::size_t idx = 0; idx < delta.size(); ++idx) {
    const double u = std::clamp(delta[idx], kGammaFloor, 1.0);
    out[idx] = std::clamp(params.lam * std::pow(u, params.gamma), 0.0, 1.0);
  }
  return out;
}

// Elementwise partial derivatives of gamma_transform. Where either clamp is
// active the derivative is zero; the transform is differentiable on the
// interior.
struct GammaGradients {
  Tensor value;       // the transformed patch
  Tensor d_delta;     // d out / d delta, elementwise
  Tensor d_lam;       // d out / d lam, elementwise
  Tensor d_gamma;     // d out / d gamma, elementwise
};

inline GammaGradients gamma_transform_with_gradients(const Tensor& delta,
                                                     const GammaParams& params) {
  params.validate();
  GammaGradients g{Tensor(delta.height(), delta.width(), delta.channels()),
                   Tensor(delta.height(), delta.width(), delta.channels()),
                   Tensor(delta.height(), delta.width(), delta.channels()),
                   Tensor(delta.height(), delta.width(), delta.channels())};
  for (std::size_t idx = 0; idx < delta.size(); ++idx) {
    const double d = delta[idx];
    const double u = std::clamp(d, kGammaFloor, 1.0);
    const double powed = std::pow(u, params.gamma);
    const double raw = params.lam * powed;
    g.value[idx] = std::clamp(raw, 0.0, 1.0);
    const bool input_interior = d > kGammaFloor && d < 1.0;
    const bool output_interior = raw < 1.0;  // raw > 0 always holds
    if (output_interior) {
      g.d_lam[idx] = powed;
      g.d_gamma[idx] = raw * std::log(u);
      g.d_delta[idx] =
          input_interior ? params.lam * params.gamma * std::pow(u, params.gamma - 1.0)
                         : 0.0;
    }
  }
  return g;
}

// Anisotropic total variation: sum of absolute forward differences along rows
// and columns, accumulated over channels.
inline double tv_loss(const Tensor& delta) {
  if (delta.height() < 1 || delta.width() < 1)
    throw DomainError("tv_loss: patch must be non-empty");
  double total = 0.0;
  for (int i = 0; i < delta.height(); ++i)
    for (int j = 0; j < delta.width(); ++j)
      for (int k = 0; k < delta.channels(); ++k) {
        if (j + 1 < delta.width())
          total += std::abs(delta(i, j + 1, k) - delta(i, j, k));
        if (i + 1 < delta.height())
          total += std::abs(delta(i + 1, j, k) - delta(i, j, k));
      }
  return total;
}

// Subgradient of tv_loss with sign(0) = 0.
inline Tensor tv_gradient(const Tensor& delta) {
  const auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  Tensor grad(delta.height(), delta.width(), delta.channels());
  for (int i = 0; i < delta.height(); ++i)
    for (int j = 0; j < delta.width(); ++j)
      for (int k = 0; k < delta.channels(); ++k) {
        if (j + 1 < delta.width()) {
          const double s = sgn(delta(i, j + 1, k) - delta(i, j, k));
          grad(i, j + 1, k) += s;
          grad(i, j, k) -= s;
        }
        if (i + 1 < delta.height()) {
          const double s = sgn(delta(i + 1, j, k) - delta(i, j, k));
          grad(i + 1, j, k) += s;
          grad(i, j, k) -= s;
        }
      }
  return grad;
}

// Projection onto the intersection of the epsilon-ball around `reference`
// and the valid pixel range [0, 1].
inline Tensor project_linf(const Tensor& delta, const Tensor& reference,
                           double epsilon) {
  if (!delta.same_shape(reference))
    throw ShapeMismatchError("project_linf: shapes differ");
  Tensor out(delta.height(), delta.width(), delta.channels());
  for (std::size_t idx = 0; idx < delta.size(); ++idx) {
    const double lo = std::max(reference[idx] - epsilon, 0.0);
    const double hi = std::min(reference[idx] + epsilon, 1.0);
    out[idx] = std::clamp(delta[idx], lo, hi);
  }
  return out;
}

// How the print simulation draws its distortion parameters. Exposed so tests
// and evaluators can replay the exact sequence.
inline std::vector<GammaParams> sample_print_params(int trials, double deviation,
                                                    std::uint64_t seed) {
  if (trials < 1) throw DomainError("simulate_print: trials must be >= 1");
  if (deviation < 0.0) throw DomainError("simulate_print: deviation must be >= 0");
  if (deviation >= 1.0)
    throw DomainError("simulate_print: deviation must be < 1 (lam must stay positive)");
  Rng rng(seed);
  std::vector<GammaParams> params;
  params.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    GammaParams p;
    p.lam = rng.uniform(1.0 - deviation, 1.0 + deviation);
    p.gamma = rng.uniform(1.0 - deviation, 1.0 + deviation);
    params.push_back(p);
  }
  return params;
}

// Perturbed copies of a patch under randomly drawn print distortions.
inline std::vector<Tensor> simulate_print(const Tensor& delta, int trials,
                                          double deviation, std::uint64_t seed) {
  std::vector<Tensor> variants;
  variants.reserve(static_cast<std::size_t>(trials));
  for (const GammaParams& p : sample_print_params(trials, deviation, seed))
    variants.push_back(gamma_transform(delta, p));
  return variants;
}

}  // namespace vrap
