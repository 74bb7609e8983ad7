#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vrap/models.hpp"
#include "vrap/types.hpp"

namespace vrap {

using json = nlohmann::ordered_json;

// Evaluation knobs shared by the evaluate and sweep commands. The PIR scan
// stride is a measurement parameter, fixed independently of the attack's
// search stride so rates stay comparable across sweep cells.
struct EvalSettings {
  int num_images = 50;
  int pir_stride = 5;
  int print_trials = 50;
  double print_deviation = 0.05;
  std::uint64_t print_seed = 9001;
  bool correctly_classified_only = true;

  void validate() const {
    if (num_images < 1) throw ConfigError("evaluation.num_images must be >= 1");
    if (pir_stride < 1) throw ConfigError("evaluation.pir_stride must be >= 1");
    if (print_trials < 1) throw ConfigError("evaluation.print_trials must be >= 1");
    if (print_deviation < 0.0 || print_deviation >= 1.0)
      throw ConfigError("evaluation.print_deviation must lie in [0, 1)");
  }
};

struct SweepLists {
  std::vector<double> epsilon;
  std::vector<double> patch_size;
  std::vector<int> search_stride;
  std::vector<int> search_range;
};

struct FormatToggles {
  bool reports = true;
  bool plots = true;
};

struct RunConfig {
  AttackConfig attack;
  std::string algorithm = "vrap";  // vrap | fixed-position
  ModelSpec model;
  std::string dataset_locator;
  std::string reference_source = "extract-from-image";  // or external-image-file
  std::string reference_image_file;
  int attack_index = 0;  // test-set image attacked by the attack command
  EvalSettings eval;
  std::optional<SweepLists> sweep;
  TrainSettings train;
  std::string output_dir = "out";
  FormatToggles formats;

  void validate() const {
    attack.validate();
    model.validate();
    eval.validate();
    if (algorithm != "vrap" && algorithm != "fixed-position")
      throw ConfigError("algorithm must be 'vrap' or 'fixed-position'");
    if (dataset_locator.empty()) throw ConfigError("dataset is required");
    if (reference_source != "extract-from-image" &&
        reference_source != "external-image-file")
      throw ConfigError(
          "reference_patch_source must be 'extract-from-image' or "
          "'external-image-file'");
    if (reference_source == "external-image-file" && reference_image_file.empty())
      throw ConfigError("reference_image_file required for external-image-file");
    if (attack_index < 0) throw ConfigError("attack_index must be >= 0");
    if (sweep) {
      const bool any = !sweep->epsilon.empty() || !sweep->patch_size.empty() ||
                       !sweep->search_stride.empty() || !sweep->search_range.empty();
      if (!any) throw ConfigError("sweep section present but all lists empty");
    }
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  }
};

namespace detail {

// Wraps a JSON object and records which keys were consumed; anything left
// over is a config error. Silent typos in epsilon or tau would corrupt whole
// sweeps, so unknown keys are fatal.
class StrictObject {
 public:
  StrictObject(const json& node, std::string path)
      : node_(node), path_(std::move(path)) {
    if (!node_.is_object())
      throw ConfigError("expected an object at " + path_);
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  template <typename T>
  T require(const std::string& key) {
    if (!node_.contains(key))
      throw ConfigError("missing required key " + join(key));
    return fetch<T>(key);
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    if (!node_.contains(key)) return fallback;
    return fetch<T>(key);
  }

  json child(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  void finish() {
    for (const auto& item : node_.items())
      if (!seen_.contains(item.key()))
        throw ConfigError("unknown key " + join(item.key()));
  }

  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <typename T>
  T fetch(const std::string& key) {
    seen_.insert(key);
    try {
      return node_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("wrong type for key " + join(key));
    }
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

inline AttackConfig parse_attack(const json& node, const std::string& path) {
  StrictObject obj(node, path);
  AttackConfig out;
  out.epsilon = obj.get_or<double>("epsilon", out.epsilon);
  out.iterations = obj.get_or<int>("iterations", out.iterations);
  out.search_range = obj.get_or<int>("search_range", out.search_range);
  out.search_stride = obj.get_or<int>("search_stride", out.search_stride);
  out.patch_size = obj.get_or<double>("patch_size", out.patch_size);
  out.tv_weight = obj.get_or<double>("tv_weight", out.tv_weight);
  out.seed = obj.get_or<std::uint64_t>("seed", out.seed);
  out.gamma_enabled = obj.get_or<bool>("gamma_enabled", out.gamma_enabled);
  out.gamma_lr = obj.get_or<double>("gamma_lr", out.gamma_lr);
  obj.finish();
  return out;
}

inline ModelSpec parse_model(const json& node, const std::string& path) {
  StrictObject obj(node, path);
  ModelSpec out;
  out.architecture = obj.get_or<std::string>("architecture", out.architecture);
  if (obj.has("input_shape")) {
    const auto shape = obj.child("input_shape");
    if (!shape.is_array() || shape.size() != 3)
      throw ConfigError("model.input_shape must be [H, W, C]");
    out.height = shape[0].get<int>();
    out.width = shape[1].get<int>();
    out.channels = shape[2].get<int>();
  }
  out.class_count = obj.get_or<int>("class_count", out.class_count);
  out.weights_path = obj.get_or<std::string>("weights_path", out.weights_path);
  out.train_seed = obj.get_or<std::uint64_t>("train_seed", out.train_seed);
  obj.finish();
  return out;
}

inline EvalSettings parse_eval(const json& node, const std::string& path) {
  StrictObject obj(node, path);
  EvalSettings out;
  out.num_images = obj.get_or<int>("num_images", out.num_images);
  out.pir_stride = obj.get_or<int>("pir_stride", out.pir_stride);
  out.print_trials = obj.get_or<int>("print_trials", out.print_trials);
  out.print_deviation = obj.get_or<double>("print_deviation", out.print_deviation);
  out.print_seed = obj.get_or<std::uint64_t>("print_seed", out.print_seed);
  out.correctly_classified_only =
      obj.get_or<bool>("correctly_classified_only", out.correctly_classified_only);
  obj.finish();
  return out;
}

inline SweepLists parse_sweep(const json& node, const std::string& path) {
  StrictObject obj(node, path);
  SweepLists out;
  out.epsilon = obj.get_or<std::vector<double>>("epsilon", {});
  out.patch_size = obj.get_or<std::vector<double>>("patch_size", {});
  out.search_stride = obj.get_or<std::vector<int>>("search_stride", {});
  out.search_range = obj.get_or<std::vector<int>>("search_range", {});
  obj.finish();
  return out;
}

inline TrainSettings parse_train(const json& node, const std::string& path) {
  StrictObject obj(node, path);
  TrainSettings out;
  out.epochs = obj.get_or<int>("epochs", out.epochs);
  out.batch_size = obj.get_or<int>("batch_size", out.batch_size);
  out.lr = obj.get_or<double>("lr", out.lr);
  out.momentum = obj.get_or<double>("momentum", out.momentum);
  out.weight_decay = obj.get_or<double>("weight_decay", out.weight_decay);
  out.lr_drop_epochs = obj.get_or<std::vector<int>>("lr_drop_epochs", out.lr_drop_epochs);
  out.lr_drop_factor = obj.get_or<double>("lr_drop_factor", out.lr_drop_factor);
  out.augment_noise = obj.get_or<double>("augment_noise", out.augment_noise);
  obj.finish();
  return out;
}

inline FormatToggles parse_formats(const json& node, const std::string& path) {
  StrictObject obj(node, path);
  FormatToggles out;
  out.reports = obj.get_or<bool>("reports", out.reports);
  out.plots = obj.get_or<bool>("plots", out.plots);
  obj.finish();
  return out;
}

}  // namespace detail

inline RunConfig parse_run_config(const json& root) {
  detail::StrictObject obj(root, "");
  RunConfig out;
  if (obj.has("attack")) out.attack = detail::parse_attack(obj.child("attack"), "attack");
  out.algorithm = obj.get_or<std::string>("algorithm", out.algorithm);
  if (obj.has("model")) out.model = detail::parse_model(obj.child("model"), "model");
  out.dataset_locator = obj.get_or<std::string>("dataset", out.dataset_locator);
  out.reference_source =
      obj.get_or<std::string>("reference_patch_source", out.reference_source);
  out.reference_image_file =
      obj.get_or<std::string>("reference_image_file", out.reference_image_file);
  out.attack_index = obj.get_or<int>("attack_index", out.attack_index);
  if (obj.has("evaluation"))
    out.eval = detail::parse_eval(obj.child("evaluation"), "evaluation");
  if (obj.has("sweep"))
    out.sweep = detail::parse_sweep(obj.child("sweep"), "sweep");
  if (obj.has("train"))
    out.train = detail::parse_train(obj.child("train"), "train");
  out.output_dir = obj.get_or<std::string>("output_dir", out.output_dir);
  if (obj.has("formats"))
    out.formats = detail::parse_formats(obj.child("formats"), "formats");
  obj.finish();
  try {
    out.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return out;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(root);
}

// The parsed configuration re-serialized; persisted with every artifact so
// runs can be reproduced from their outputs alone.
inline json config_echo(const RunConfig& config) {
  json echo;
  echo["attack"] = {{"epsilon", config.attack.epsilon},
                    {"iterations", config.attack.iterations},
                    {"search_range", config.attack.search_range},
                    {"search_stride", config.attack.search_stride},
                    {"patch_size", config.attack.patch_size},
                    {"tv_weight", config.attack.tv_weight},
                    {"seed", config.attack.seed},
                    {"gamma_enabled", config.attack.gamma_enabled},
                    {"gamma_lr", config.attack.gamma_lr}};
  echo["algorithm"] = config.algorithm;
  echo["model"] = {{"architecture", config.model.architecture},
                   {"input_shape",
                    {config.model.height, config.model.width, config.model.channels}},
                   {"class_count", config.model.class_count},
                   {"weights_path", config.model.weights_path},
                   {"train_seed", config.model.train_seed}};
  echo["dataset"] = config.dataset_locator;
  echo["reference_patch_source"] = config.reference_source;
  if (!config.reference_image_file.empty())
    echo["reference_image_file"] = config.reference_image_file;
  echo["attack_index"] = config.attack_index;
  echo["evaluation"] = {{"num_images", config.eval.num_images},
                        {"pir_stride", config.eval.pir_stride},
                        {"print_trials", config.eval.print_trials},
                        {"print_deviation", config.eval.print_deviation},
                        {"print_seed", config.eval.print_seed},
                        {"correctly_classified_only",
                         config.eval.correctly_classified_only}};
  if (config.sweep) {
    echo["sweep"] = json::object();
    if (!config.sweep->epsilon.empty()) echo["sweep"]["epsilon"] = config.sweep->epsilon;
    if (!config.sweep->patch_size.empty())
      echo["sweep"]["patch_size"] = config.sweep->patch_size;
    if (!config.sweep->search_stride.empty())
      echo["sweep"]["search_stride"] = config.sweep->search_stride;
    if (!config.sweep->search_range.empty())
      echo["sweep"]["search_range"] = config.sweep->search_range;
  }
  echo["output_dir"] = config.output_dir;
  echo["formats"] = {{"reports", config.formats.reports},
                     {"plots", config.formats.plots}};
  return echo;
}

}  // namespace vrap
