#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

#include "vrap/tensor.hpp"

namespace vrap {

// Error taxonomy. The CLI maps ConfigError/DatasetError to exit code 2,
// ModelMissingError to 3, everything else to 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : Error {
  using Error::Error;
};
struct InvalidPlacementError : Error {
  using Error::Error;
};
struct ShapeMismatchError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DatasetError : Error {
  using Error::Error;
};
struct ModelMissingError : Error {
  using Error::Error;
};
struct BundleError : Error {
  using Error::Error;
};
struct UnsupportedModelError : Error {
  using Error::Error;
};

// A labeled image with pixels normalized to [0, 1].
class Image {
 public:
  Image(Tensor pixels, int label) : pixels_(std::move(pixels)), label_(label) {
    if (pixels_.height() < 1 || pixels_.width() < 1 || pixels_.channels() < 1)
      throw DomainError("Image: all dimensions must be >= 1");
    if (!pixels_.all_in(0.0, 1.0))
      throw DomainError("Image: pixel values must lie in [0, 1]");
    if (label_ < 0) throw DomainError("Image: label must be non-negative");
  }

  const Tensor& pixels() const { return pixels_; }
  int label() const { return label_; }
  int height() const { return pixels_.height(); }
  int width() const { return pixels_.width(); }
  int channels() const { return pixels_.channels(); }

 private:
  Tensor pixels_;
  int label_;
};

// Upper-left corner of a pasted patch. Validity depends on the
// (image, patch) pair, checked by validate_placement.
struct Placement {
  int i = 0;
  int j = 0;

  friend bool operator==(const Placement&, const Placement&) = default;
};

// A perturbable patch anchored to the real image content it was grown from.
// The L-infinity bound against the reference is enforced at construction and
// is an invariant everywhere else in the library.
class Patch {
 public:
  Patch(Tensor delta, Tensor reference, double epsilon)
      : delta_(std::move(delta)), reference_(std::move(reference)), epsilon_(epsilon) {
    if (!delta_.same_shape(reference_))
      throw ShapeMismatchError("Patch: delta and reference shapes differ");
    if (delta_.height() < 1 || delta_.width() < 1 || delta_.channels() < 1)
      throw DomainError("Patch: all dimensions must be >= 1");
    if (!(epsilon_ > 0.0 && epsilon_ <= 1.0))
      throw DomainError("Patch: epsilon must lie in (0, 1]");
    if (!delta_.all_in(0.0, 1.0) || !reference_.all_in(0.0, 1.0))
      throw DomainError("Patch: values must lie in [0, 1]");
    if (linf_distance(delta_, reference_) > epsilon_ + 1e-12)
      throw DomainError("Patch: |delta - reference|_inf exceeds epsilon");
  }

  const Tensor& delta() const { return delta_; }
  const Tensor& reference() const { return reference_; }
  double epsilon() const { return epsilon_; }
  int height() const { return delta_.height(); }
  int width() const { return delta_.width(); }
  int channels() const { return delta_.channels(); }

 private:
  Tensor delta_;
  Tensor reference_;
  double epsilon_;
};

// True iff the patch window [i, i+h) x [j, j+w) lies inside the image.
inline bool validate_placement(int image_h, int image_w, int patch_h,
                               int patch_w, const Placement& placement) {
  return placement.i >= 0 && placement.j >= 0 &&
         placement.i <= image_h - patch_h && placement.j <= image_w - patch_w;
}

inline bool validate_placement(const Image& image, const Patch& patch,
                               const Placement& placement) {
  return validate_placement(image.height(), image.width(), patch.height(),
                            patch.width(), placement);
}

// Attack hyper-parameters. `epsilon` is in normalized pixel units (an 8-bit
// budget of 16 maps to 16/255). `gamma_lr` overrides the default epsilon/T
// step on the brightness parameters when non-zero; `gamma_enabled=false`
// turns the brightness min-player off entirely, which together with
// search_range=0 and tv_weight=0 reduces the attack to plain fixed-position
// PGD.
struct AttackConfig {
  double epsilon = 16.0 / 255.0;
  int iterations = 100;
  int search_range = 10;
  int search_stride = 5;
  double patch_size = 0.3;
  double tv_weight = 1.0;
  std::uint64_t seed = 0;
  bool gamma_enabled = true;
  double gamma_lr = 0.0;  // 0 means use epsilon / iterations

  void validate() const {
    if (!(epsilon > 0.0 && epsilon <= 1.0))
      throw DomainError("AttackConfig: epsilon must lie in (0, 1]");
    if (iterations < 1) throw DomainError("AttackConfig: iterations must be >= 1");
    if (search_range < 0) throw DomainError("AttackConfig: search_range must be >= 0");
    if (search_stride < 1) throw DomainError("AttackConfig: search_stride must be >= 1");
    if (!(patch_size > 0.0 && patch_size <= 1.0))
      throw DomainError("AttackConfig: patch_size must lie in (0, 1]");
    if (tv_weight < 0.0) throw DomainError("AttackConfig: tv_weight must be >= 0");
    if (gamma_lr < 0.0) throw DomainError("AttackConfig: gamma_lr must be >= 0");
  }
};

}  // namespace vrap
