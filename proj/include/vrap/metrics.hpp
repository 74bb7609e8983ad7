#pragma once

#include <map>
#include <string>
#include <vector>

#include "vrap/classifier.hpp"
#include "vrap/placement.hpp"
#include "vrap/transforms.hpp"
#include "vrap/types.hpp"

namespace vrap {

struct RateCount {
  long long num = 0;
  long long den = 0;

  double rate() const { return den == 0 ? 0.0 : static_cast<double>(num) / den; }
};

// One image + the patch attacking it + where it sits.
struct EvalCase {
  Image image;
  Patch patch;
  Placement placement;
};

// Fraction of images where the adversarial patch fools the model AND the
// original reference patch does not. Images that are misclassified even with
// the benign patch stay in the denominator but can never count as successes.
inline RateCount attack_success_counts(const std::vector<EvalCase>& dataset,
                                       const ClassifierAdapter& model) {
  if (dataset.empty()) throw DatasetError("attack_success_rate: empty dataset");
  RateCount out{0, static_cast<long long>(dataset.size())};
  for (const EvalCase& c : dataset) {
    if (!validate_placement(c.image, c.patch, c.placement))
      throw InvalidPlacementError("attack_success_rate: placement invalid");
    const int adv_pred = model.predict_one(
        paste_pixels(c.image.pixels(), c.patch.delta(), c.placement));
    if (adv_pred == c.image.label()) continue;
    const int ref_pred = model.predict_one(
        paste_pixels(c.image.pixels(), c.patch.reference(), c.placement));
    if (ref_pred == c.image.label()) ++out.num;
  }
  return out;
}

inline double attack_success_rate(const std::vector<EvalCase>& dataset,
                                  const ClassifierAdapter& model) {
  return attack_success_counts(dataset, model).rate();
}

// Position-irrelevance scan: paste the patch at every stride-tau grid
// placement and count misclassifications. The published rate divides by
// floor((H-h)/tau) * floor((W-w)/tau) although the scan enumerates the
// inclusive grid, one more placement per axis — so the rate can slightly
// exceed 1. `normalized` divides by the placements actually scanned.
struct PirCounts {
  long long successes = 0;
  long long scanned = 0;
  long long denominator = 0;

  double rate() const { return static_cast<double>(successes) / denominator; }
  double normalized() const { return static_cast<double>(successes) / scanned; }
};

// Per-placement outcomes, exposed for the CLI's placement dump.
struct PlacementOutcome {
  Placement placement;
  int predicted = 0;
  bool fooled = false;
};

inline PirCounts position_irrelevant_counts(
    const Image& image, const Patch& patch, int tau, const ClassifierAdapter& model,
    std::vector<PlacementOutcome>* dump = nullptr) {
  if (tau < 1) throw DomainError("position_irrelevant_rate: tau must be >= 1");
  const int span_i = image.height() - patch.height();
  const int span_j = image.width() - patch.width();
  if (span_i < 0 || span_j < 0)
    throw InvalidPlacementError("position_irrelevant_rate: patch larger than image");
  PirCounts out;
  out.denominator = static_cast<long long>(span_i / tau) * (span_j / tau);
  if (out.denominator == 0)
    throw DomainError("position_irrelevant_rate: degenerate grid (floor term is 0)");
  for (int i = 0; i * tau <= span_i; ++i)
    for (int j = 0; j * tau <= span_j; ++j) {
      const Placement at{i * tau, j * tau};
      const int pred = model.predict_one(
          paste_pixels(image.pixels(), patch.delta(), at));
      const bool fooled = pred != image.label();
      ++out.scanned;
      if (fooled) ++out.successes;
      if (dump) dump->push_back({at, pred, fooled});
    }
  return out;
}

inline double position_irrelevant_rate(const Image& image, const Patch& patch,
                                       int tau, const ClassifierAdapter& model) {
  return position_irrelevant_counts(image, patch, tau, model).rate();
}

// Fraction of print-distorted variants of the patch that still fool the model
// at the given placement.
inline RateCount print_robustness_counts(const Image& image, const Patch& patch,
                                         const Placement& placement, int trials,
                                         double deviation, std::uint64_t seed,
                                         const ClassifierAdapter& model) {
  if (!validate_placement(image, patch, placement))
    throw InvalidPlacementError("print_robustness: placement invalid");
  RateCount out{0, trials};
  for (const Tensor& variant : simulate_print(patch.delta(), trials, deviation, seed)) {
    const int pred =
        model.predict_one(paste_pixels(image.pixels(), variant, placement));
    if (pred != image.label()) ++out.num;
  }
  return out;
}

inline double print_robustness(const Image& image, const Patch& patch,
                               const Placement& placement, int trials,
                               double deviation, std::uint64_t seed,
                               const ClassifierAdapter& model) {
  return print_robustness_counts(image, patch, placement, trials, deviation, seed,
                                 model)
      .rate();
}

// Aggregated evaluation results with the raw counts behind every rate.
// All rates except the raw PIR lie in [0, 1]; the raw PIR inherits the
// published denominator and can marginally exceed 1.
struct EvalReport {
  RateCount asr;
  RateCount asr_quantized;  // after 8-bit round-trip of the patch
  std::map<std::string, PirCounts> pir_per_image;
  double mean_pir = 0.0;
  double mean_pir_normalized = 0.0;
  RateCount print;  // pooled over images and trials
  double print_deviation = 0.0;
  int print_trials = 0;

  void finalize() {
    mean_pir = 0.0;
    mean_pir_normalized = 0.0;
    if (pir_per_image.empty()) return;
    for (const auto& [id, counts] : pir_per_image) {
      mean_pir += counts.rate();
      mean_pir_normalized += counts.normalized();
    }
    mean_pir /= static_cast<double>(pir_per_image.size());
    mean_pir_normalized /= static_cast<double>(pir_per_image.size());
  }
};

}  // namespace vrap
