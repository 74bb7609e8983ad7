#pragma once

#include <cmath>

#include "vrap/tensor.hpp"
#include "vrap/types.hpp"

namespace vrap {

namespace detail {
inline void require_window(int image_h, int image_w, int patch_h, int patch_w,
                           const Placement& at) {
  if (!validate_placement(image_h, image_w, patch_h, patch_w, at))
    throw InvalidPlacementError("patch window exceeds image bounds");
}
}  // namespace detail

// Overwrites the window [i, i+h) x [j, j+w) of `pixels` with `values`.
inline Tensor paste_pixels(const Tensor& pixels, const Tensor& values,
                           const Placement& at) {
  detail::require_window(pixels.height(), pixels.width(), values.height(),
                         values.width(), at);
  if (values.channels() != pixels.channels())
    throw ShapeMismatchError("paste: channel counts differ");
  Tensor out = pixels;
  for (int r = 0; r < values.height(); ++r)
    for (int c = 0; c < values.width(); ++c)
      for (int k = 0; k < values.channels(); ++k)
        out(at.i + r, at.j + c, k) = values(r, c, k);
  return out;
}

inline Image paste(const Image& image, const Tensor& values, const Placement& at) {
  return Image(paste_pixels(image.pixels(), values, at), image.label());
}

inline Tensor extract(const Tensor& pixels, const Placement& at, int h, int w) {
  detail::require_window(pixels.height(), pixels.width(), h, w, at);
  Tensor out(h, w, pixels.channels());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int k = 0; k < pixels.channels(); ++k)
        out(r, c, k) = pixels(at.i + r, at.j + c, k);
  return out;
}

inline Tensor extract(const Image& image, const Placement& at, int h, int w) {
  return extract(image.pixels(), at, h, w);
}

// Patch side lengths for a relative size: the fraction applies to each side
// length, rounded half away from zero, never below one pixel.
inline std::pair<int, int> patch_shape_for(int image_h, int image_w,
                                           double patch_size) {
  if (!(patch_size > 0.0 && patch_size <= 1.0))
    throw DomainError("patch_size must lie in (0, 1]");
  const auto side = [patch_size](int extent) {
    int s = static_cast<int>(std::round(patch_size * extent));
    return s < 1 ? 1 : s;
  };
  return {side(image_h), side(image_w)};
}

inline std::pair<int, int> patch_shape_for(const Image& image, double patch_size) {
  return patch_shape_for(image.height(), image.width(), patch_size);
}

}  // namespace vrap
