#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "vrap/attack.hpp"
#include "vrap/config.hpp"
#include "vrap/image_io.hpp"
#include "vrap/types.hpp"
#include "vrap/version.hpp"

namespace vrap {

// An attack's persisted output: the patch and its reference as lossless 8-bit
// images plus a metadata document. Timestamps live in their own field so the
// rest of the metadata is byte-reproducible across reruns.
struct BundleFiles {
  static constexpr const char* kPatch = "patch.ppm";
  static constexpr const char* kReference = "reference.ppm";
  static constexpr const char* kMetadata = "metadata.json";
};

inline void write_json_file(const std::string& path, const json& doc) {
  namespace fs = std::filesystem;
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw Error("cannot open file for writing: " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw Error("failed writing file: " + path);
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BundleError("missing file: " + path);
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw BundleError(path + " is not valid JSON: " + e.what());
  }
}

inline void write_bundle(const std::string& dir, const Image& image,
                         int dataset_index, const AttackResult& result,
                         const RunConfig& config, long long created_unix) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_image_8bit((fs::path(dir) / BundleFiles::kPatch).string(),
                   result.patch.delta());
  write_image_8bit((fs::path(dir) / BundleFiles::kReference).string(),
                   result.patch.reference());

  json meta;
  meta["schema_version"] = kReportSchemaVersion;
  meta["dataset_index"] = dataset_index;
  meta["label"] = image.label();
  meta["image_shape"] = {image.height(), image.width(), image.channels()};
  meta["patch_shape"] = {result.patch.height(), result.patch.width(),
                         result.patch.channels()};
  meta["epsilon"] = result.patch.epsilon();
  meta["initial_placement"] = {result.position_trace.empty()
                                   ? result.final_placement.i
                                   : result.position_trace.front().i,
                               result.position_trace.empty()
                                   ? result.final_placement.j
                                   : result.position_trace.front().j};
  meta["final_placement"] = {result.final_placement.i, result.final_placement.j};
  meta["initially_misclassified"] = result.image_initially_misclassified;
  meta["loss_trace"] = result.loss_trace;
  json gammas = json::array();
  for (const GammaParams& p : result.gamma_trace) gammas.push_back({p.lam, p.gamma});
  meta["gamma_trace"] = gammas;
  json positions = json::array();
  for (const Placement& p : result.position_trace) positions.push_back({p.i, p.j});
  meta["position_trace"] = positions;
  meta["config_echo"] = config_echo(config);
  meta["versions"] = {{"library", kVersion},
                      {"report_schema", kReportSchemaVersion},
                      {"weights_format", kWeightsFormatVersion}};
  meta["timestamps"] = {{"created_unix", created_unix}};
  write_json_file((fs::path(dir) / BundleFiles::kMetadata).string(), meta);
}

struct LoadedBundle {
  Patch patch;  // quantized values; epsilon widened by one 8-bit step
  Placement initial_placement;
  Placement final_placement;
  int dataset_index = 0;
  int label = 0;
  double epsilon = 0.0;  // the optimizer's budget, before quantization
  json metadata;
};

inline LoadedBundle read_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  const json meta = load_json_file((fs::path(dir) / BundleFiles::kMetadata).string());
  Tensor delta;
  Tensor reference;
  try {
    delta = read_image_8bit((fs::path(dir) / BundleFiles::kPatch).string());
    reference = read_image_8bit((fs::path(dir) / BundleFiles::kReference).string());
  } catch (const Error& e) {
    throw BundleError(std::string("bundle corrupt: ") + e.what());
  }
  try {
    const double epsilon = meta.at("epsilon").get<double>();
    // 8-bit rounding can push each side of the pair half a step, so the
    // reconstructed pair is validated against a one-step-wider ball.
    const double widened = std::min(1.0, epsilon + 1.0 / 255.0);
    LoadedBundle out{Patch(std::move(delta), std::move(reference), widened),
                     {meta.at("initial_placement")[0].get<int>(),
                      meta.at("initial_placement")[1].get<int>()},
                     {meta.at("final_placement")[0].get<int>(),
                      meta.at("final_placement")[1].get<int>()},
                     meta.at("dataset_index").get<int>(),
                     meta.at("label").get<int>(),
                     epsilon,
                     meta};
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw BundleError(std::string("bundle metadata incomplete: ") + e.what());
  }
}

}  // namespace vrap
