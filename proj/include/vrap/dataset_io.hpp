#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "vrap/dataset.hpp"
#include "vrap/image_io.hpp"
#include "vrap/types.hpp"

namespace vrap {

// On-disk dataset: a manifest plus one lossless image file per example.
//
//   <dir>/manifest.json   {"format":1, "classes":N, "height":H, "width":W,
//                          "channels":C, "train":[{"file":..,"label":..},..],
//                          "test":[...]}
//   <dir>/train/00000.ppm ...
//   <dir>/test/00000.ppm  ...

inline void write_dataset_dir(const Dataset& data, const std::string& dir) {
  namespace fs = std::filesystem;
  if (data.train.empty() && data.test.empty())
    throw DatasetError("write_dataset_dir: dataset is empty");
  const Image& probe = data.train.empty() ? data.test.front() : data.train.front();
  fs::create_directories(fs::path(dir) / "train");
  fs::create_directories(fs::path(dir) / "test");

  nlohmann::ordered_json manifest;
  manifest["format"] = 1;
  manifest["classes"] = data.classes;
  manifest["height"] = probe.height();
  manifest["width"] = probe.width();
  manifest["channels"] = probe.channels();
  const auto dump_split = [&](const std::vector<Image>& images,
                              const std::string& split) {
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    char name[32];
    for (std::size_t n = 0; n < images.size(); ++n) {
      std::snprintf(name, sizeof(name), "%s/%05zu.ppm", split.c_str(), n);
      write_image_8bit((fs::path(dir) / name).string(), images[n].pixels());
      entries.push_back({{"file", name}, {"label", images[n].label()}});
    }
    return entries;
  };
  manifest["train"] = dump_split(data.train, "train");
  manifest["test"] = dump_split(data.test, "test");

  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw DatasetError("cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

inline Dataset load_dataset_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DatasetError("dataset missing: no manifest at " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (manifest.value("format", 0) != 1)
    throw DatasetError("unsupported dataset manifest format");
  Dataset data;
  data.classes = manifest.at("classes").get<int>();
  const auto load_split = [&](const char* split) {
    std::vector<Image> images;
    for (const auto& entry : manifest.at(split)) {
      const std::string file = entry.at("file").get<std::string>();
      const int label = entry.at("label").get<int>();
      if (label < 0 || label >= data.classes)
        throw DatasetError("manifest label out of range in " + file);
      images.emplace_back(read_image_8bit((fs::path(dir) / file).string()), label);
    }
    return images;
  };
  data.train = load_split("train");
  data.test = load_split("test");
  if (data.train.empty() && data.test.empty())
    throw DatasetError("dataset at " + dir + " has no images");
  return data;
}

namespace detail {

inline std::uint64_t parse_u64_or_throw(const std::string& text,
                                        const std::string& what) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw DatasetError("bad numeric value for " + what + ": " + text);
  return value;
}

}  // namespace detail

// Dataset locators: either "synthetic:train=4000,test=1000,seed=7" for the
// generated corpus, or a directory holding a manifest.
inline Dataset open_dataset(const std::string& locator) {
  if (locator.rfind("synthetic:", 0) == 0) {
    SyntheticSpec spec;
    const std::string args = locator.substr(10);
    std::size_t start = 0;
    while (start < args.size()) {
      std::size_t end = args.find(',', start);
      if (end == std::string::npos) end = args.size();
      const std::string pair = args.substr(start, end - start);
      start = end + 1;
      if (pair.empty()) continue;
      const std::size_t eq = pair.find('=');
      if (eq == std::string::npos)
        throw DatasetError("bad synthetic locator fragment: " + pair);
      const std::string key = pair.substr(0, eq);
      const std::string value = pair.substr(eq + 1);
      if (key == "train")
        spec.train_count = static_cast<int>(detail::parse_u64_or_throw(value, key));
      else if (key == "test")
        spec.test_count = static_cast<int>(detail::parse_u64_or_throw(value, key));
      else if (key == "seed")
        spec.seed = detail::parse_u64_or_throw(value, key);
      else if (key == "classes")
        spec.classes = static_cast<int>(detail::parse_u64_or_throw(value, key));
      else if (key == "size") {
        spec.height = static_cast<int>(detail::parse_u64_or_throw(value, key));
        spec.width = spec.height;
      } else
        throw DatasetError("unknown synthetic locator key: " + key);
    }
    return make_synthetic_dataset(spec);
  }
  return load_dataset_dir(locator);
}

}  // namespace vrap
