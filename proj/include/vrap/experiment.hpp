#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "vrap/attack.hpp"
#include "vrap/config.hpp"
#include "vrap/dataset_io.hpp"
#include "vrap/image_io.hpp"
#include "vrap/metrics.hpp"
#include "vrap/parallel.hpp"
#include "vrap/version.hpp"

namespace vrap {

// Test-set indices used for evaluation. With the filter on (the default),
// only images the model classifies correctly participate, mirroring how
// attack corpora are curated; misclassified-with-benign-patch cases are still
// counted in ASR denominators.
inline std::vector<int> select_eval_images(const Dataset& data,
                                           const ClassifierAdapter& model,
                                           int count,
                                           bool correctly_classified_only) {
  std::vector<int> indices;
  for (int idx = 0; idx < static_cast<int>(data.test.size()) &&
                    static_cast<int>(indices.size()) < count;
       ++idx) {
    const Image& image = data.test[static_cast<std::size_t>(idx)];
    if (correctly_classified_only &&
        model.predict_one(image.pixels()) != image.label())
      continue;
    indices.push_back(idx);
  }
  if (static_cast<int>(indices.size()) < count)
    throw DatasetError("not enough evaluation images in the test split");
  return indices;
}

// Reference patch for one image. The neighborhood anchor is real image
// content: either a window of the attacked image itself or a center crop of
// an external image file.
inline Tensor make_reference(const Image& image, const Placement& initial, int h,
                             int w, const RunConfig& config) {
  if (config.reference_source == "extract-from-image")
    return extract(image, initial, h, w);
  const Tensor source = read_image_8bit(config.reference_image_file);
  if (source.channels() != image.channels())
    throw ShapeMismatchError("reference image channel count does not match dataset");
  if (source.height() < h || source.width() < w)
    throw ShapeMismatchError("reference image smaller than the patch");
  return extract(source, {(source.height() - h) / 2, (source.width() - w) / 2}, h, w);
}

struct ImageOutcome {
  int index;
  AttackResult result;
  Placement initial;
  bool fooled;
  bool ref_ok;
  bool fooled_quantized;
  bool ref_ok_quantized;
  bool pir_valid;
  PirCounts pir;
  RateCount print;

  bool asr_success() const { return fooled && ref_ok; }
  bool asr_success_quantized() const { return fooled_quantized && ref_ok_quantized; }
};

struct CellOutcome {
  std::vector<ImageOutcome> images;
  EvalReport report;
};

// Attacks every selected image with per-image derived seeds and evaluates the
// results. Outcomes are merged in index order, so the report is identical for
// any job count.
inline CellOutcome run_attack_cell(const Dataset& data,
                                   const std::vector<int>& indices,
                                   const ClassifierAdapter& model,
                                   const RunConfig& config, int jobs) {
  const AttackConfig& base = config.attack;
  base.validate();
  std::vector<std::optional<ImageOutcome>> slots(indices.size());

  parallel_for(indices.size(), jobs, [&](std::size_t slot) {
    const int index = indices[slot];
    const Image& image = data.test[static_cast<std::size_t>(index)];
    const auto [h, w] = patch_shape_for(image, base.patch_size);

    AttackConfig per_image = base;
    per_image.seed = derive_seed(base.seed, static_cast<std::uint64_t>(index));
    const Placement initial = sample_initial_placement(
        image.height(), image.width(), h, w, per_image.seed);
    const Tensor reference = make_reference(image, initial, h, w, config);

    AttackResult result =
        config.algorithm == "fixed-position"
            ? fixed_position_attack(image, reference, initial, per_image, model)
            : vrap_attack(image, reference, per_image, model);

    const Placement at = result.final_placement;
    const Patch& patch = result.patch;
    const bool fooled = model.predict_one(paste_pixels(
                            image.pixels(), patch.delta(), at)) != image.label();
    const bool ref_ok = model.predict_one(paste_pixels(
                            image.pixels(), patch.reference(), at)) == image.label();
    const bool fooled_q =
        model.predict_one(paste_pixels(
            image.pixels(), quantize_roundtrip(patch.delta()), at)) != image.label();
    const bool ref_ok_q =
        model.predict_one(paste_pixels(image.pixels(),
                                       quantize_roundtrip(patch.reference()), at)) ==
        image.label();

    PirCounts pir;
    bool pir_valid = false;
    try {
      pir = position_irrelevant_counts(image, patch, config.eval.pir_stride, model);
      pir_valid = true;
    } catch (const DomainError&) {
      pir_valid = false;  // degenerate grid for this patch size
    }
    const RateCount print = print_robustness_counts(
        image, patch, at, config.eval.print_trials, config.eval.print_deviation,
        derive_seed(config.eval.print_seed, static_cast<std::uint64_t>(index)), model);

    slots[slot].emplace(ImageOutcome{index, std::move(result), initial, fooled,
                                     ref_ok, fooled_q, ref_ok_q, pir_valid, pir,
                                     print});
  });

  CellOutcome out;
  out.images.reserve(slots.size());
  for (std::optional<ImageOutcome>& slot : slots)
    out.images.push_back(std::move(*slot));

  EvalReport& report = out.report;
  report.asr.den = static_cast<long long>(out.images.size());
  report.asr_quantized.den = report.asr.den;
  report.print_trials = config.eval.print_trials;
  report.print_deviation = config.eval.print_deviation;
  for (const ImageOutcome& outcome : out.images) {
    if (outcome.asr_success()) ++report.asr.num;
    if (outcome.asr_success_quantized()) ++report.asr_quantized.num;
    if (outcome.pir_valid) {
      char key[24];
      std::snprintf(key, sizeof(key), "img%05d", outcome.index);
      report.pir_per_image.emplace(key, outcome.pir);
    }
    report.print.num += outcome.print.num;
    report.print.den += outcome.print.den;
  }
  report.finalize();
  return out;
}

// ---------------------------------------------------------------------------
// Report serialization (the EvalReport JSON schema)

inline json pir_counts_json(const PirCounts& counts) {
  return {{"successes", counts.successes},
          {"scanned", counts.scanned},
          {"denominator", counts.denominator}};
}

inline json report_to_json(const EvalReport& report, const json& echo) {
  json counts;
  counts["asr"] = {{"num", report.asr.num}, {"den", report.asr.den}};
  counts["asr_quantized"] = {{"num", report.asr_quantized.num},
                             {"den", report.asr_quantized.den}};
  counts["print"] = {{"num", report.print.num}, {"den", report.print.den}};
  json per_image = json::object();
  for (const auto& [id, pir] : report.pir_per_image)
    per_image[id] = pir_counts_json(pir);
  counts["pir_per_image"] = per_image;

  json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["asr"] = report.asr.rate();
  doc["asr_quantized"] = report.asr_quantized.rate();
  doc["pir"] = report.mean_pir;
  doc["pir_normalized"] = report.mean_pir_normalized;
  doc["print_robustness"] = report.print.rate();
  doc["print_trials"] = report.print_trials;
  doc["print_deviation"] = report.print_deviation;
  doc["counts"] = counts;
  doc["config_echo"] = echo;
  doc["versions"] = {{"library", kVersion}, {"report_schema", kReportSchemaVersion}};
  return doc;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepCell {
  double epsilon = 0.0;
  double patch_size = 0.0;
  int search_stride = 0;
  int search_range = 0;

  std::string slug() const {
    char buffer[96];
    std::snprintf(buffer, sizeof(buffer), "eps%.4f_ps%.2f_tau%d_k%d", epsilon,
                  patch_size, search_stride, search_range);
    return buffer;
  }
};

// The cross product of the sweep lists; missing lists pin the base value.
inline std::vector<SweepCell> sweep_cells(const RunConfig& config) {
  if (!config.sweep) throw ConfigError("sweep requires a sweep section");
  const SweepLists& lists = *config.sweep;
  const std::vector<double> eps =
      lists.epsilon.empty() ? std::vector<double>{config.attack.epsilon} : lists.epsilon;
  const std::vector<double> sizes = lists.patch_size.empty()
                                        ? std::vector<double>{config.attack.patch_size}
                                        : lists.patch_size;
  const std::vector<int> strides =
      lists.search_stride.empty() ? std::vector<int>{config.attack.search_stride}
                                  : lists.search_stride;
  const std::vector<int> ranges =
      lists.search_range.empty() ? std::vector<int>{config.attack.search_range}
                                 : lists.search_range;
  std::vector<SweepCell> cells;
  for (double e : eps)
    for (double s : sizes)
      for (int stride : strides)
        for (int range : ranges) cells.push_back({e, s, stride, range});
  return cells;
}

inline RunConfig apply_cell(const RunConfig& base, const SweepCell& cell) {
  RunConfig out = base;
  out.attack.epsilon = cell.epsilon;
  out.attack.patch_size = cell.patch_size;
  out.attack.search_stride = cell.search_stride;
  out.attack.search_range = cell.search_range;
  return out;
}

}  // namespace vrap
