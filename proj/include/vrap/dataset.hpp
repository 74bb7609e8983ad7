#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vrap/rng.hpp"
#include "vrap/tensor.hpp"
#include "vrap/types.hpp"

namespace vrap {

struct Dataset {
  std::vector<Image> train;
  std::vector<Image> test;
  int classes = 0;
};

// Procedural 10-class image source used as the desk-scale stand-in for a
// photographic corpus. Class identity is the orientation of a luminance
// grating; backgrounds, colors, frequencies, phases, distractor blobs and
// pixel noise vary per image so the task is learnable but not separable by
// any single pixel statistic.
struct SyntheticSpec {
  int train_count = 4000;
  int test_count = 1000;
  int height = 32;
  int width = 32;
  int channels = 3;
  int classes = 10;
  std::uint64_t seed = 7;

  void validate() const {
    if (train_count < 0 || test_count < 0)
      throw DomainError("SyntheticSpec: counts must be non-negative");
    if (height < 8 || width < 8 || channels < 1)
      throw DomainError("SyntheticSpec: image shape too small");
    if (classes < 2) throw DomainError("SyntheticSpec: need at least two classes");
  }
};

namespace detail {

inline Image synthetic_image(const SyntheticSpec& spec, int label, Rng& rng) {
  const double pi = 3.14159265358979323846;
  const double theta = (pi / spec.classes) * label + rng.uniform(-pi / 36, pi / 36);
  const double wavelength = rng.uniform(4.0, 7.0);
  const double freq = 2.0 * pi / wavelength;
  const double phase = rng.uniform(0.0, 2.0 * pi);
  const double amplitude = rng.uniform(0.16, 0.28);

  std::vector<double> base(spec.channels);
  for (double& b : base) b = rng.uniform(0.32, 0.68);

  const double grad_angle = rng.uniform(0.0, 2.0 * pi);
  const double grad_strength = rng.uniform(0.0, 0.12);
  const double gx = std::cos(grad_angle);
  const double gy = std::sin(grad_angle);
  const double diag = std::sqrt(static_cast<double>(spec.height * spec.height +
                                                    spec.width * spec.width));

  struct Blob {
    double ci, cj, radius;
    std::vector<double> shift;
  };
  std::vector<Blob> blobs(static_cast<std::size_t>(rng.uniform_int(1, 2)));
  for (Blob& blob : blobs) {
    blob.ci = rng.uniform(0.0, spec.height - 1.0);
    blob.cj = rng.uniform(0.0, spec.width - 1.0);
    blob.radius = rng.uniform(2.5, 5.5);
    blob.shift.resize(spec.channels);
    for (double& s : blob.shift) s = rng.uniform(-0.15, 0.15);
  }

  const double noise = 0.05;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);

  Tensor pixels(spec.height, spec.width, spec.channels);
  for (int i = 0; i < spec.height; ++i)
    for (int j = 0; j < spec.width; ++j) {
      const double grating = amplitude * std::sin(freq * (i * cos_t + j * sin_t) + phase);
      const double ramp = grad_strength * ((i * gx + j * gy) / diag);
      for (int k = 0; k < spec.channels; ++k) {
        double blob_shift = 0.0;
        for (const Blob& blob : blobs) {
          const double di = i - blob.ci;
          const double dj = j - blob.cj;
          blob_shift += blob.shift[k] *
                        std::exp(-(di * di + dj * dj) / (2.0 * blob.radius * blob.radius));
        }
        const double v = base[k] + grating + ramp + blob_shift +
                         rng.uniform(-noise, noise);
        pixels(i, j, k) = std::clamp(v, 0.0, 1.0);
      }
    }
  return Image(std::move(pixels), label);
}

inline std::vector<Image> synthetic_split(const SyntheticSpec& spec, int count,
                                          std::uint64_t split_seed) {
  Rng rng(split_seed);
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    const int label = static_cast<int>(rng.uniform_u64(spec.classes));
    out.push_back(synthetic_image(spec, label, rng));
  }
  return out;
}

}  // namespace detail

inline Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  spec.validate();
  Dataset data;
  data.classes = spec.classes;
  data.train = detail::synthetic_split(spec, spec.train_count, derive_seed(spec.seed, 1));
  data.test = detail::synthetic_split(spec, spec.test_count, derive_seed(spec.seed, 2));
  return data;
}

}  // namespace vrap
