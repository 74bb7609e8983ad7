// vrap: craft and evaluate visually realistic adversarial patches.
//
// Subcommands: train, attack, sweep, evaluate, explain. Every run is driven
// by a JSON config (see docs/config-schema.md); --seed and --output-dir
// override the config in place. Exit codes: 0 success, 1 runtime failure,
// 2 invalid config or dataset, 3 missing model.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vrap/bundle.hpp"
#include "vrap/config.hpp"
#include "vrap/dataset_io.hpp"
#include "vrap/experiment.hpp"
#include "vrap/explain.hpp"
#include "vrap/image_io.hpp"
#include "vrap/models.hpp"
#include "vrap/svgplot.hpp"
#include "vrap/version.hpp"

namespace {

namespace fs = std::filesystem;
using vrap::json;

struct CommonArgs {
  std::string config_path;
  std::string output_dir;  // overrides config when set
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool dump_placements = false;
  std::string bundle_dir;  // evaluate / explain input
};

std::string model_cache_dir() {
  if (const char* env = std::getenv("VRAP_MODEL_CACHE")) return env;
  return "model-cache";
}

std::string default_weights_path(const vrap::ModelSpec& spec) {
  char name[128];
  std::snprintf(name, sizeof(name), "%s_h%dw%dc%dn%d_seed%llu.vrapnet",
                spec.architecture.c_str(), spec.height, spec.width, spec.channels,
                spec.class_count,
                static_cast<unsigned long long>(spec.train_seed));
  return (fs::path(model_cache_dir()) / name).string();
}

vrap::RunConfig load_config(const CommonArgs& args) {
  vrap::RunConfig config = vrap::load_run_config(args.config_path);
  if (!args.output_dir.empty()) config.output_dir = args.output_dir;
  if (args.seed) config.attack.seed = *args.seed;
  if (config.model.architecture == "small-conv" && config.model.weights_path.empty())
    config.model.weights_path = default_weights_path(config.model);
  return config;
}

long long now_unix() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

int cmd_train(const CommonArgs& args) {
  const vrap::RunConfig config = load_config(args);
  const vrap::Dataset data = vrap::open_dataset(config.dataset_locator);
  std::printf("training %s on %zu train / %zu test images...\n",
              config.model.architecture.c_str(), data.train.size(), data.test.size());
  const vrap::TrainedClassifier trained =
      vrap::train_small_classifier(config.model, data, config.train);
  std::printf("clean test accuracy: %.4f (gate %.2f)\n",
              trained.outcome.test_accuracy, vrap::kAccuracyGate);
  std::printf("weights: %s\n", config.model.weights_path.c_str());
  return 0;
}

int cmd_attack(const CommonArgs& args) {
  const vrap::RunConfig config = load_config(args);
  const auto model = vrap::load_adapter(config.model);
  const vrap::Dataset data = vrap::open_dataset(config.dataset_locator);
  if (config.attack_index >= static_cast<int>(data.test.size()))
    throw vrap::DatasetError("attack_index exceeds the test split size");
  const vrap::Image& image =
      data.test[static_cast<std::size_t>(config.attack_index)];

  const auto [h, w] = vrap::patch_shape_for(image, config.attack.patch_size);
  const vrap::Placement initial = vrap::sample_initial_placement(
      image.height(), image.width(), h, w, config.attack.seed);
  const vrap::Tensor reference = vrap::make_reference(image, initial, h, w, config);

  const vrap::AttackResult result =
      config.algorithm == "fixed-position"
          ? vrap::fixed_position_attack(image, reference, initial, config.attack,
                                        *model)
          : vrap::vrap_attack(image, reference, config.attack, *model);
  if (result.image_initially_misclassified)
    std::fprintf(stderr,
                 "warning: image %d is misclassified before any patching\n",
                 config.attack_index);

  vrap::write_bundle(config.output_dir, image, config.attack_index, result, config,
                     now_unix());
  const int adv_pred = model->predict_one(vrap::paste_pixels(
      image.pixels(), result.patch.delta(), result.final_placement));
  std::printf("bundle: %s\n", config.output_dir.c_str());
  std::printf("label %d -> prediction %d at (%d, %d); objective %.4f -> %.4f\n",
              image.label(), adv_pred, result.final_placement.i,
              result.final_placement.j, result.loss_trace.front(),
              result.loss_trace.back());
  return 0;
}

json placements_json(const std::vector<vrap::ImageOutcome>& outcomes) {
  json entries = json::array();
  for (const vrap::ImageOutcome& outcome : outcomes) {
    char id[24];
    std::snprintf(id, sizeof(id), "img%05d", outcome.index);
    entries.push_back(
        {{"id", id},
         {"dataset_index", outcome.index},
         {"initial", {outcome.initial.i, outcome.initial.j}},
         {"final", {outcome.result.final_placement.i, outcome.result.final_placement.j}},
         {"fooled", outcome.fooled},
         {"reference_ok", outcome.ref_ok},
         {"fooled_quantized", outcome.fooled_quantized},
         {"reference_ok_quantized", outcome.ref_ok_quantized},
         {"epsilon", outcome.result.patch.epsilon()}});
  }
  return entries;
}

int cmd_sweep(const CommonArgs& args) {
  const vrap::RunConfig config = load_config(args);
  if (!config.sweep) throw vrap::ConfigError("sweep command requires a sweep section");
  const auto model = vrap::load_adapter(config.model);
  const vrap::Dataset data = vrap::open_dataset(config.dataset_locator);
  const std::vector<int> indices = vrap::select_eval_images(
      data, *model, config.eval.num_images, config.eval.correctly_classified_only);

  const std::vector<vrap::SweepCell> cells = vrap::sweep_cells(config);
  std::printf("sweep: %zu cells x %zu images\n", cells.size(), indices.size());

  json rows = json::array();
  const fs::path out_root(config.output_dir);
  fs::create_directories(out_root);

  const auto flush_results = [&]() {
    json doc;
    doc["schema_version"] = vrap::kReportSchemaVersion;
    doc["config_echo"] = vrap::config_echo(config);
    doc["versions"] = {{"library", vrap::kVersion}};
    doc["rows"] = rows;
    vrap::write_json_file((out_root / "results.json").string(), doc);

    std::ofstream csv(out_root / "results.csv");
    csv << "epsilon,patch_size,search_stride,search_range,asr,asr_quantized,"
           "pir,pir_normalized,print_robustness,asr_num,asr_den\n";
    for (const auto& row : rows) {
      csv << row["epsilon"].get<double>() << ',' << row["patch_size"].get<double>()
          << ',' << row["search_stride"].get<int>() << ','
          << row["search_range"].get<int>() << ',' << row["asr"].get<double>() << ','
          << row["asr_quantized"].get<double>() << ',' << row["pir"].get<double>()
          << ',' << row["pir_normalized"].get<double>() << ','
          << row["print_robustness"].get<double>() << ','
          << row["asr_num"].get<long long>() << ',' << row["asr_den"].get<long long>()
          << '\n';
    }
  };

  for (const vrap::SweepCell& cell : cells) {
    const vrap::RunConfig cell_config = vrap::apply_cell(config, cell);
    const vrap::CellOutcome outcome =
        vrap::run_attack_cell(data, indices, *model, cell_config, args.jobs);

    const fs::path cell_dir = out_root / "cells" / cell.slug();
    vrap::write_json_file(
        (cell_dir / "report.json").string(),
        vrap::report_to_json(outcome.report, vrap::config_echo(cell_config)));
    for (const vrap::ImageOutcome& img : outcome.images) {
      char name[32];
      std::snprintf(name, sizeof(name), "img%05d.ppm", img.index);
      vrap::write_image_8bit((cell_dir / "patches" / name).string(),
                             img.result.patch.delta());
      vrap::write_image_8bit((cell_dir / "references" / name).string(),
                             img.result.patch.reference());
    }
    vrap::write_json_file((cell_dir / "placements.json").string(),
                          json{{"entries", placements_json(outcome.images)}});

    json row;
    row["epsilon"] = cell.epsilon;
    row["patch_size"] = cell.patch_size;
    row["search_stride"] = cell.search_stride;
    row["search_range"] = cell.search_range;
    row["asr"] = outcome.report.asr.rate();
    row["asr_quantized"] = outcome.report.asr_quantized.rate();
    row["pir"] = outcome.report.mean_pir;
    row["pir_normalized"] = outcome.report.mean_pir_normalized;
    row["print_robustness"] = outcome.report.print.rate();
    row["asr_num"] = outcome.report.asr.num;
    row["asr_den"] = outcome.report.asr.den;
    row["cell_dir"] = (fs::path("cells") / cell.slug()).string();
    rows.push_back(row);
    flush_results();  // partial results survive interruption
    std::printf("cell %-28s asr %.3f pir %.3f\n", cell.slug().c_str(),
                outcome.report.asr.rate(), outcome.report.mean_pir);
  }

  if (config.formats.plots) {
    const auto series_over = [&](const char* x_key, const char* y_key) {
      std::map<std::string, vrap::PlotSeries> grouped;
      for (const auto& row : rows) {
        char label[96];
        if (std::string(x_key) == "epsilon")
          std::snprintf(label, sizeof(label), "ps=%.2f tau=%d k=%d",
                        row["patch_size"].get<double>(),
                        row["search_stride"].get<int>(),
                        row["search_range"].get<int>());
        else
          std::snprintf(label, sizeof(label), "eps=%.3f ps=%.2f",
                        row["epsilon"].get<double>(),
                        row["patch_size"].get<double>());
        auto& series = grouped[label];
        series.label = label;
        series.x.push_back(row[x_key].get<double>());
        series.y.push_back(row[y_key].get<double>());
      }
      std::vector<vrap::PlotSeries> out;
      for (auto& [label, series] : grouped) out.push_back(std::move(series));
      return out;
    };
    const auto emit = [&](const char* axis, const char* metric, const char* file) {
      try {
        vrap::write_line_plot((out_root / "plots" / file).string(),
                              std::string(metric) + " vs " + axis, axis, metric,
                              series_over(axis, metric));
      } catch (const std::exception& e) {
        std::fprintf(stderr, "plot emission skipped: %s\n", e.what());
      }
    };
    if (config.sweep->epsilon.size() > 1) {
      emit("epsilon", "asr", "asr_vs_epsilon.svg");
      emit("epsilon", "pir", "pir_vs_epsilon.svg");
    }
    if (config.sweep->search_stride.size() > 1) {
      emit("search_stride", "asr", "asr_vs_stride.svg");
      emit("search_stride", "pir", "pir_vs_stride.svg");
    }
    if (config.sweep->search_range.size() > 1) {
      emit("search_range", "asr", "asr_vs_range.svg");
      emit("search_range", "pir", "pir_vs_range.svg");
    }
  }
  return 0;
}

int cmd_evaluate(const CommonArgs& args) {
  const vrap::RunConfig config = load_config(args);
  const auto model = vrap::load_adapter(config.model);
  const vrap::Dataset data = vrap::open_dataset(config.dataset_locator);
  const vrap::LoadedBundle bundle = vrap::read_bundle(args.bundle_dir);
  if (bundle.dataset_index >= static_cast<int>(data.test.size()))
    throw vrap::BundleError("bundle dataset_index exceeds the test split");
  const vrap::Image& image =
      data.test[static_cast<std::size_t>(bundle.dataset_index)];
  if (image.label() != bundle.label)
    throw vrap::BundleError("bundle label does not match the dataset image");

  vrap::EvalReport report;
  report.asr = vrap::attack_success_counts(
      {{image, bundle.patch, bundle.final_placement}}, *model);
  report.asr_quantized = report.asr;  // the persisted patch is already 8-bit
  std::vector<vrap::PlacementOutcome> dump;
  const vrap::PirCounts pir = vrap::position_irrelevant_counts(
      image, bundle.patch, config.eval.pir_stride, *model,
      args.dump_placements ? &dump : nullptr);
  char id[24];
  std::snprintf(id, sizeof(id), "img%05d", bundle.dataset_index);
  report.pir_per_image.emplace(id, pir);
  report.print = vrap::print_robustness_counts(
      image, bundle.patch, bundle.final_placement, config.eval.print_trials,
      config.eval.print_deviation,
      vrap::derive_seed(config.eval.print_seed,
                        static_cast<std::uint64_t>(bundle.dataset_index)),
      *model);
  report.print_trials = config.eval.print_trials;
  report.print_deviation = config.eval.print_deviation;
  report.finalize();

  json doc = vrap::report_to_json(report, bundle.metadata.value("config_echo", json()));
  doc["bundle"] = args.bundle_dir;
  doc["epsilon"] = bundle.epsilon;
  doc["patch_shape"] = {bundle.patch.height(), bundle.patch.width(),
                        bundle.patch.channels()};

  try {
    const int clean_pred = model->predict_one(image.pixels());
    const vrap::Tensor adv_pixels = vrap::paste_pixels(
        image.pixels(), bundle.patch.delta(), bundle.final_placement);
    const int adv_pred = model->predict_one(adv_pixels);
    const vrap::Heatmap clean_map = vrap::grad_cam(image, clean_pred, *model);
    const vrap::Heatmap adv_map =
        vrap::grad_cam(vrap::Image(adv_pixels, image.label()), adv_pred, *model);
    doc["attention_shift"] = vrap::attention_shift_score(
        clean_map, adv_map, bundle.final_placement, bundle.patch.height(),
        bundle.patch.width());
  } catch (const vrap::UnsupportedModelError&) {
    // stub models have no attention maps; the field is simply absent
  }

  fs::create_directories(config.output_dir);
  const std::string report_path =
      (fs::path(config.output_dir) / "report.json").string();
  vrap::write_json_file(report_path, doc);
  if (args.dump_placements) {
    json placements = json::array();
    for (const vrap::PlacementOutcome& p : dump)
      placements.push_back({{"placement", {p.placement.i, p.placement.j}},
                            {"predicted", p.predicted},
                            {"fooled", p.fooled}});
    vrap::write_json_file(
        (fs::path(config.output_dir) / "placements.json").string(),
        json{{"entries", placements}});
  }
  std::printf("report: %s\n", report_path.c_str());
  std::printf("asr %.3f | pir %.3f (normalized %.3f) | print %.3f\n",
              report.asr.rate(), report.mean_pir, report.mean_pir_normalized,
              report.print.rate());
  return 0;
}

int cmd_explain(const CommonArgs& args) {
  const vrap::RunConfig config = load_config(args);
  const auto model = vrap::load_adapter(config.model);
  const vrap::Dataset data = vrap::open_dataset(config.dataset_locator);
  const vrap::LoadedBundle bundle = vrap::read_bundle(args.bundle_dir);
  if (bundle.dataset_index >= static_cast<int>(data.test.size()))
    throw vrap::BundleError("bundle dataset_index exceeds the test split");
  const vrap::Image& image =
      data.test[static_cast<std::size_t>(bundle.dataset_index)];

  const int clean_pred = model->predict_one(image.pixels());
  const vrap::Tensor adv_pixels = vrap::paste_pixels(
      image.pixels(), bundle.patch.delta(), bundle.final_placement);
  const int adv_pred = model->predict_one(adv_pixels);
  const vrap::Image adv_image(adv_pixels, image.label());

  const vrap::Heatmap clean_map = vrap::grad_cam(image, clean_pred, *model);
  const vrap::Heatmap adv_map = vrap::grad_cam(adv_image, adv_pred, *model);
  const double shift = vrap::attention_shift_score(
      clean_map, adv_map, bundle.final_placement, bundle.patch.height(),
      bundle.patch.width());

  const fs::path out(config.output_dir);
  fs::create_directories(out);
  vrap::write_image_8bit((out / "clean_heatmap.pgm").string(), clean_map.values);
  vrap::write_image_8bit((out / "adv_heatmap.pgm").string(), adv_map.values);
  vrap::write_image_8bit(
      (out / "clean_overlay.ppm").string(),
      vrap::heatmap_overlay(image, clean_map, bundle.final_placement,
                            bundle.patch.height(), bundle.patch.width()));
  vrap::write_image_8bit(
      (out / "adv_overlay.ppm").string(),
      vrap::heatmap_overlay(adv_image, adv_map, bundle.final_placement,
                            bundle.patch.height(), bundle.patch.width()));
  vrap::write_json_file((out / "explain.json").string(),
                        json{{"clean_prediction", clean_pred},
                             {"adv_prediction", adv_pred},
                             {"label", image.label()},
                             {"attention_shift", shift},
                             {"layer", clean_map.source_layer}});
  std::printf("attention shift %.4f (layer %s); outputs in %s\n", shift,
              clean_map.source_layer.c_str(), config.output_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visually realistic adversarial patch toolkit"};
  app.set_version_flag("--version", vrap::kVersion);
  app.require_subcommand(1);

  CommonArgs args;
  const auto add_common = [&](CLI::App* cmd, bool needs_bundle) {
    cmd->add_option("--config", args.config_path, "JSON run configuration")
        ->required();
    cmd->add_option("--output-dir", args.output_dir,
                    "overrides output_dir from the config");
    cmd->add_option("--seed", args.seed, "overrides attack.seed from the config");
    cmd->add_option("--jobs", args.jobs, "worker threads for independent attacks");
    cmd->add_flag("--dump-placements", args.dump_placements,
                  "write per-placement prediction dumps");
    if (needs_bundle)
      cmd->add_option("bundle", args.bundle_dir, "attack bundle directory")
          ->required();
  };

  CLI::App* train = app.add_subcommand("train", "train the desk-scale classifier");
  CLI::App* attack = app.add_subcommand("attack", "craft one adversarial patch");
  CLI::App* sweep = app.add_subcommand("sweep", "grid of attacks and evaluations");
  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a patch bundle");
  CLI::App* explain = app.add_subcommand("explain", "attention heatmaps for a bundle");
  add_common(train, false);
  add_common(attack, false);
  add_common(sweep, false);
  add_common(evaluate, true);
  add_common(explain, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(args);
    if (attack->parsed()) return cmd_attack(args);
    if (sweep->parsed()) return cmd_sweep(args);
    if (evaluate->parsed()) return cmd_evaluate(args);
    if (explain->parsed()) return cmd_explain(args);
  } catch (const vrap::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const vrap::DatasetError& e) {
    std::fprintf(stderr, "dataset error: %s\n", e.what());
    return 2;
  } catch (const vrap::ModelMissingError& e) {
    std::fprintf(stderr, "model error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
