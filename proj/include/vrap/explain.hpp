#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "vrap/classifier.hpp"
#include "vrap/types.hpp"

namespace vrap {

// Attention heatmap over the input image, min-max normalized to [0, 1]
// unless uniformly zero. Stored as an H x W x 1 tensor.
struct Heatmap {
  Tensor values;
  std::string source_layer;
};

namespace detail {

inline Tensor bilinear_resize_plane(const Tensor& src, int out_h, int out_w) {
  Tensor out(out_h, out_w, 1);
  const int sh = src.height();
  const int sw = src.width();
  const double si = out_h > 1 && sh > 1 ? static_cast<double>(sh - 1) / (out_h - 1) : 0.0;
  const double sj = out_w > 1 && sw > 1 ? static_cast<double>(sw - 1) / (out_w - 1) : 0.0;
  for (int i = 0; i < out_h; ++i) {
    const double fi = i * si;
    const int i0 = static_cast<int>(fi);
    const int i1 = std::min(i0 + 1, sh - 1);
    const double wi = fi - i0;
    for (int j = 0; j < out_w; ++j) {
      const double fj = j * sj;
      const int j0 = static_cast<int>(fj);
      const int j1 = std::min(j0 + 1, sw - 1);
      const double wj = fj - j0;
      out(i, j, 0) = (1 - wi) * ((1 - wj) * src(i0, j0, 0) + wj * src(i0, j1, 0)) +
                     wi * ((1 - wj) * src(i1, j0, 0) + wj * src(i1, j1, 0));
    }
  }
  return out;
}

}  // namespace detail

// Gradient-weighted class activation map: each channel of the designated
// convolutional stage is weighted by the spatial mean of the target-class
// score gradient over that channel; the weighted sum is rectified, upsampled
// to image resolution and min-max normalized.
inline Heatmap grad_cam(const Image& image, int target_class,
                        const ClassifierAdapter& model) {
  const ActivationMaps maps = model.activation_maps(image.pixels(), target_class);
  const Tensor& act = maps.activations;
  const Tensor& grad = maps.score_gradients;
  if (!act.same_shape(grad))
    throw ShapeMismatchError("grad_cam: activation/gradient shapes differ");

  const int mh = act.height();
  const int mw = act.width();
  const int channels = act.channels();
  const double cells = static_cast<double>(mh) * mw;

  Tensor cam(mh, mw, 1);
  for (int k = 0; k < channels; ++k) {
    double weight = 0.0;
    for (int i = 0; i < mh; ++i)
      for (int j = 0; j < mw; ++j) weight += grad(i, j, k);
    weight /= cells;
    for (int i = 0; i < mh; ++i)
      for (int j = 0; j < mw; ++j) cam(i, j, 0) += weight * act(i, j, k);
  }
  for (double& v : cam) v = std::max(v, 0.0);

  Tensor full = detail::bilinear_resize_plane(cam, image.height(), image.width());
  const double lo = full.min_value();
  const double hi = full.max_value();
  if (hi > lo) {
    for (double& v : full) v = (v - lo) / (hi - lo);
  } else {
    full.fill(0.0);  // uniform map carries no attention signal
  }
  return {std::move(full), maps.layer};
}

// How much attention mass moved into the patch window: the window's share of
// total mass in the adversarial map minus the same share in the clean map.
// Positive values mean attention moved toward the patch.
inline double attention_shift_score(const Heatmap& clean_map, const Heatmap& adv_map,
                                    const Placement& placement, int h, int w) {
  const Tensor& a = clean_map.values;
  const Tensor& b = adv_map.values;
  if (!a.same_shape(b))
    throw ShapeMismatchError("attention_shift_score: heatmap shapes differ");
  if (!validate_placement(a.height(), a.width(), h, w, placement))
    throw InvalidPlacementError("attention_shift_score: window exceeds map bounds");

  const auto window_share = [&](const Tensor& m) {
    double total = 0.0;
    double inside = 0.0;
    for (int i = 0; i < m.height(); ++i)
      for (int j = 0; j < m.width(); ++j) {
        const double v = m(i, j, 0);
        total += v;
        if (i >= placement.i && i < placement.i + h && j >= placement.j &&
            j < placement.j + w)
          inside += v;
      }
    if (total <= 0.0)
      throw DomainError("attention_shift_score: heatmap has zero total mass");
    return inside / total;
  };
  return window_share(b) - window_share(a);
}

// Render helper: grayscale image with the heatmap blended in as a red tint
// and the patch window outlined, for visual inspection of attention shifts.
inline Tensor heatmap_overlay(const Image& image, const Heatmap& map,
                              const Placement& placement, int h, int w) {
  const Tensor& px = image.pixels();
  Tensor out(px.height(), px.width(), 3);
  for (int i = 0; i < px.height(); ++i)
    for (int j = 0; j < px.width(); ++j) {
      double gray = 0.0;
      for (int k = 0; k < px.channels(); ++k) gray += px(i, j, k);
      gray /= px.channels();
      const double heat = map.values(i, j, 0);
      out(i, j, 0) = std::clamp(0.4 * gray + 0.6 * heat, 0.0, 1.0);
      out(i, j, 1) = std::clamp(0.4 * gray + 0.2 * heat, 0.0, 1.0);
      out(i, j, 2) = std::clamp(0.4 * gray, 0.0, 1.0);
    }
  const int i1 = std::min(placement.i + h - 1, px.height() - 1);
  const int j1 = std::min(placement.j + w - 1, px.width() - 1);
  for (int j = placement.j; j <= j1; ++j) {
    out(placement.i, j, 1) = 1.0;
    out(i1, j, 1) = 1.0;
  }
  for (int i = placement.i; i <= i1; ++i) {
    out(i, placement.j, 1) = 1.0;
    out(i, j1, 1) = 1.0;
  }
  return out;
}

}  // namespace vrap
