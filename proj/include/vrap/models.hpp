#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "vrap/classifier.hpp"
#include "vrap/dataset.hpp"
#include "vrap/nets.hpp"
#include "vrap/rng.hpp"
#include "vrap/types.hpp"

namespace vrap {

inline constexpr double kAccuracyGate = 0.85;

struct ModelSpec {
  std::string architecture = "small-conv";  // small-conv | linear-stub | constant-stub
  int height = 32;
  int width = 32;
  int channels = 3;
  int class_count = 10;
  std::string weights_path;
  std::uint64_t train_seed = 0;

  void validate() const {
    if (architecture != "small-conv" && architecture != "linear-stub" &&
        architecture != "constant-stub")
      throw DomainError("ModelSpec: unknown architecture '" + architecture + "'");
    if (height < 1 || width < 1 || channels < 1)
      throw DomainError("ModelSpec: input shape must be positive");
    if (class_count < 2) throw DomainError("ModelSpec: need at least two classes");
  }
};

// ---------------------------------------------------------------------------
// Adapters

class SmallConvAdapter : public ClassifierAdapter {
 public:
  explicit SmallConvAdapter(SmallConvNet net) : net_(std::move(net)) {}

  const SmallConvNet& net() const { return net_; }
  SmallConvNet& net() { return net_; }

  int class_count() const override { return net_.dims().classes; }

  std::vector<int> predict(std::span<const Tensor> batch) const override {
    std::vector<int> out;
    out.reserve(batch.size());
    for (const Tensor& x : batch) {
      const std::vector<double> logits = net_.forward(x);
      out.push_back(static_cast<int>(
          std::max_element(logits.begin(), logits.end()) - logits.begin()));
    }
    return out;
  }

  double loss(std::span<const Tensor> batch,
              std::span<const int> labels) const override {
    check_batch(batch, labels);
    double total = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b)
      total += cross_entropy(net_.forward(batch[b]), labels[b]);
    return total;
  }

  std::vector<Tensor> input_gradient(std::span<const Tensor> batch,
                                     std::span<const int> labels) const override {
    return loss_and_input_gradient(batch, labels).gradients;
  }

  LossWithGradient loss_and_input_gradient(
      std::span<const Tensor> batch, std::span<const int> labels) const override {
    check_batch(batch, labels);
    LossWithGradient out{0.0, {}};
    out.gradients.reserve(batch.size());
    SmallConvNet::Trace trace;
    std::vector<double> dlogits;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const std::vector<double> logits = net_.forward(batch[b], &trace);
      out.loss += cross_entropy(logits, labels[b], &dlogits);
      Tensor grad;
      net_.backward(batch[b], trace, dlogits, &grad, nullptr);
      out.gradients.push_back(std::move(grad));
    }
    return out;
  }

  ActivationMaps activation_maps(const Tensor& pixels,
                                 int target_class) const override {
    if (target_class < 0 || target_class >= class_count())
      throw DomainError("activation_maps: target class out of range");
    SmallConvNet::Trace trace;
    net_.forward(pixels, &trace);
    const int mh = net_.conv2_h();
    const int mw = net_.conv2_w();
    const int mc = net_.dims().conv2_c;
    ActivationMaps maps{Tensor(mh, mw, mc), Tensor(mh, mw, mc), "conv2_relu"};
    std::copy(trace.a2.begin(), trace.a2.end(), maps.activations.begin());
    std::vector<double> dconv2;
    net_.conv2_score_gradient(trace, target_class, &dconv2);
    std::copy(dconv2.begin(), dconv2.end(), maps.score_gradients.begin());
    return maps;
  }

 private:
  void check_batch(std::span<const Tensor> batch, std::span<const int> labels) const {
    if (batch.size() != labels.size())
      throw ShapeMismatchError("adapter: batch and label sizes differ");
    for (int label : labels)
      if (label < 0 || label >= class_count())
        throw DomainError("adapter: label out of range");
  }

  SmallConvNet net_;
};

// Linear model with an affine per-class score and a loss that is itself
// linear in the input: loss(x, y) = mean of non-true scores minus the true
// score. Its input gradient is constant in x, which gives the optimizer
// tests a closed form.
class LinearStubAdapter : public ClassifierAdapter {
 public:
  LinearStubAdapter(std::vector<Tensor> class_weights, std::vector<double> biases)
      : weights_(std::move(class_weights)), biases_(std::move(biases)) {
    if (weights_.size() < 2 || weights_.size() != biases_.size())
      throw DomainError("LinearStubAdapter: need one weight tensor per class");
    for (const Tensor& w : weights_)
      if (!w.same_shape(weights_.front()))
        throw ShapeMismatchError("LinearStubAdapter: weight shapes differ");
  }

  static LinearStubAdapter seeded(int h, int w, int c, int classes,
                                  std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Tensor> weights;
    std::vector<double> biases;
    for (int k = 0; k < classes; ++k) {
      Tensor t(h, w, c);
      for (double& v : t) v = rng.normal(0.0, 0.2);
      weights.push_back(std::move(t));
      biases.push_back(rng.normal(0.0, 0.1));
    }
    return LinearStubAdapter(std::move(weights), std::move(biases));
  }

  int class_count() const override { return static_cast<int>(weights_.size()); }

  std::vector<int> predict(std::span<const Tensor> batch) const override {
    std::vector<int> out;
    out.reserve(batch.size());
    for (const Tensor& x : batch) {
      int best = 0;
      double best_score = score(0, x);
      for (int k = 1; k < class_count(); ++k) {
        const double s = score(k, x);
        if (s > best_score) {
          best_score = s;
          best = k;
        }
      }
      out.push_back(best);
    }
    return out;
  }

  double loss(std::span<const Tensor> batch,
              std::span<const int> labels) const override {
    double total = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      double others = 0.0;
      for (int k = 0; k < class_count(); ++k)
        if (k != labels[b]) others += score(k, batch[b]);
      total += others / (class_count() - 1) - score(labels[b], batch[b]);
    }
    return total;
  }

  std::vector<Tensor> input_gradient(std::span<const Tensor> batch,
                                     std::span<const int> labels) const override {
    std::vector<Tensor> out;
    out.reserve(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b)
      out.push_back(loss_weight(labels[b]));
    return out;
  }

  // The constant gradient of the per-sample loss for a given label.
  Tensor loss_weight(int label) const {
    Tensor g(weights_.front().height(), weights_.front().width(),
             weights_.front().channels());
    for (int k = 0; k < class_count(); ++k) {
      const double coeff =
          k == label ? -1.0 : 1.0 / (class_count() - 1);
      for (std::size_t idx = 0; idx < g.size(); ++idx)
        g[idx] += coeff * weights_[k][idx];
    }
    return g;
  }

  const Tensor& class_weight(int k) const { return weights_[static_cast<std::size_t>(k)]; }

 private:
  double score(int k, const Tensor& x) const {
    const Tensor& w = weights_[static_cast<std::size_t>(k)];
    if (!w.same_shape(x))
      throw ShapeMismatchError("LinearStubAdapter: input shape mismatch");
    double s = biases_[static_cast<std::size_t>(k)];
    for (std::size_t idx = 0; idx < x.size(); ++idx) s += w[idx] * x[idx];
    return s;
  }

  std::vector<Tensor> weights_;
  std::vector<double> biases_;
};

// Predicts one fixed class for any input; loss is identically zero.
class ConstantStubAdapter : public ClassifierAdapter {
 public:
  ConstantStubAdapter(int fixed_class, int classes)
      : fixed_class_(fixed_class), classes_(classes) {
    if (classes < 2 || fixed_class < 0 || fixed_class >= classes)
      throw DomainError("ConstantStubAdapter: class out of range");
  }

  int class_count() const override { return classes_; }
  std::vector<int> predict(std::span<const Tensor> batch) const override {
    return std::vector<int>(batch.size(), fixed_class_);
  }
  double loss(std::span<const Tensor>, std::span<const int>) const override {
    return 0.0;
  }
  std::vector<Tensor> input_gradient(std::span<const Tensor> batch,
                                     std::span<const int>) const override {
    std::vector<Tensor> out;
    for (const Tensor& x : batch)
      out.emplace_back(x.height(), x.width(), x.channels());
    return out;
  }

 private:
  int fixed_class_;
  int classes_;
};

// ---------------------------------------------------------------------------
// Weight persistence: versioned binary container with the ModelSpec embedded.
// Layout (little endian): magic "VRAPMDL1", u32 format version, spec fields
// (string as u32 length + bytes), net dims, u32 tensor count, then per tensor
// name + u64 count + f64 data, and finally a FNV-1a checksum of the data
// bytes.

namespace detail {

inline constexpr char kWeightsMagic[8] = {'V', 'R', 'A', 'P', 'M', 'D', 'L', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}
template <typename T>
void read_pod(std::istream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
}
inline void write_string(std::ostream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_string(std::istream& in) {
  std::uint32_t n = 0;
  read_pod(in, n);
  if (n > (1u << 20)) throw Error("weights file corrupt: oversized string");
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

inline std::uint64_t fnv1a(std::uint64_t hash, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t idx = 0; idx < bytes; ++idx) {
    hash ^= p[idx];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace detail

inline void save_weights(const SmallConvNet& net, const ModelSpec& spec,
                         const std::string& path) {
  namespace fs = std::filesystem;
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open weights file for writing: " + path);
  out.write(detail::kWeightsMagic, sizeof(detail::kWeightsMagic));
  detail::write_pod(out, static_cast<std::uint32_t>(1));
  detail::write_string(out, spec.architecture);
  detail::write_pod(out, static_cast<std::int32_t>(spec.height));
  detail::write_pod(out, static_cast<std::int32_t>(spec.width));
  detail::write_pod(out, static_cast<std::int32_t>(spec.channels));
  detail::write_pod(out, static_cast<std::int32_t>(spec.class_count));
  detail::write_pod(out, static_cast<std::uint64_t>(spec.train_seed));
  const auto& dims = net.dims();
  detail::write_pod(out, static_cast<std::int32_t>(dims.conv1_c));
  detail::write_pod(out, static_cast<std::int32_t>(dims.conv2_c));
  detail::write_pod(out, static_cast<std::int32_t>(dims.hidden));

  const auto table = net.parameter_table();
  detail::write_pod(out, static_cast<std::uint32_t>(table.size()));
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const auto& [name, values] : table) {
    detail::write_string(out, name);
    detail::write_pod(out, static_cast<std::uint64_t>(values->size()));
    out.write(reinterpret_cast<const char*>(values->data()),
              static_cast<std::streamsize>(values->size() * sizeof(double)));
    hash = detail::fnv1a(hash, values->data(), values->size() * sizeof(double));
  }
  detail::write_pod(out, hash);
  if (!out) throw Error("failed writing weights file: " + path);
}

inline std::pair<SmallConvNet, ModelSpec> load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelMissingError("weights file not found: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::kWeightsMagic, sizeof(magic)) != 0)
    throw Error("weights file corrupt: bad magic: " + path);
  std::uint32_t version = 0;
  detail::read_pod(in, version);
  if (version != 1) throw Error("weights file: unsupported format version");

  ModelSpec spec;
  spec.architecture = detail::read_string(in);
  std::int32_t h = 0, w = 0, c = 0, n = 0;
  detail::read_pod(in, h);
  detail::read_pod(in, w);
  detail::read_pod(in, c);
  detail::read_pod(in, n);
  std::uint64_t train_seed = 0;
  detail::read_pod(in, train_seed);
  spec.height = h;
  spec.width = w;
  spec.channels = c;
  spec.class_count = n;
  spec.train_seed = train_seed;
  spec.weights_path = path;

  SmallConvNet::Dims dims;
  std::int32_t c1 = 0, c2 = 0, hidden = 0;
  detail::read_pod(in, c1);
  detail::read_pod(in, c2);
  detail::read_pod(in, hidden);
  dims.in_h = h;
  dims.in_w = w;
  dims.in_c = c;
  dims.classes = n;
  dims.conv1_c = c1;
  dims.conv2_c = c2;
  dims.hidden = hidden;
  SmallConvNet net(dims, 0);

  std::uint32_t tensor_count = 0;
  detail::read_pod(in, tensor_count);
  auto table = net.parameter_table();
  if (tensor_count != table.size())
    throw Error("weights file corrupt: unexpected tensor count");
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (auto& [name, values] : table) {
    const std::string stored = detail::read_string(in);
    if (stored != name) throw Error("weights file corrupt: tensor order mismatch");
    std::uint64_t count = 0;
    detail::read_pod(in, count);
    if (count != values->size())
      throw ShapeMismatchError("weights file: tensor size mismatch for " + name);
    in.read(reinterpret_cast<char*>(values->data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    hash = detail::fnv1a(hash, values->data(), values->size() * sizeof(double));
  }
  std::uint64_t stored_hash = 0;
  detail::read_pod(in, stored_hash);
  if (!in || stored_hash != hash)
    throw Error("weights file corrupt: checksum mismatch: " + path);
  return {std::move(net), std::move(spec)};
}

// ---------------------------------------------------------------------------
// Training

struct TrainSettings {
  int epochs = 18;
  int batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<int> lr_drop_epochs = {12, 16};
  double lr_drop_factor = 0.2;
  // Uniform pixel noise added to training inputs; a robustness knob that
  // trades small-budget attack success for clean stability.
  double augment_noise = 0.0;
};

inline double accuracy(const ClassifierAdapter& model, const std::vector<Image>& images) {
  if (images.empty()) throw DatasetError("accuracy: empty image set");
  long long hits = 0;
  for (const Image& image : images)
    if (model.predict_one(image.pixels()) == image.label()) ++hits;
  return static_cast<double>(hits) / static_cast<double>(images.size());
}

struct TrainOutcome {
  double test_accuracy = 0.0;
  double final_epoch_loss = 0.0;
};

// Deterministic single-threaded SGD with momentum. The same spec, dataset and
// settings always produce bit-identical weights.
inline TrainOutcome train_net(SmallConvNet& net, const Dataset& data,
                              const TrainSettings& settings, std::uint64_t seed) {
  if (data.train.empty() || data.test.empty())
    throw DatasetError("train: dataset has empty split");
  for (const Image& img : data.train)
    if (img.label() >= net.dims().classes)
      throw DomainError("train: label exceeds class count");

  std::vector<double> momentum;
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  double lr = settings.lr;
  TrainOutcome outcome;
  SmallConvNet::Trace trace;
  std::vector<double> dlogits;

  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    if (std::find(settings.lr_drop_epochs.begin(), settings.lr_drop_epochs.end(),
                  epoch) != settings.lr_drop_epochs.end())
      lr *= settings.lr_drop_factor;

    Rng rng(derive_seed(seed, 0x1000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t idx = order.size(); idx > 1; --idx)
      std::swap(order[idx - 1], order[rng.uniform_u64(idx)]);

    double epoch_loss = 0.0;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t batch_end =
          std::min(cursor + static_cast<std::size_t>(settings.batch_size), order.size());
      SmallConvNet::Gradients grads(net);
      for (std::size_t b = cursor; b < batch_end; ++b) {
        const Image& img = data.train[order[b]];
        const Tensor* input = &img.pixels();
        Tensor noisy;
        if (settings.augment_noise > 0.0) {
          noisy = img.pixels();
          for (double& v : noisy)
            v = std::clamp(v + rng.uniform(-settings.augment_noise,
                                           settings.augment_noise),
                           0.0, 1.0);
          input = &noisy;
        }
        const std::vector<double> logits = net.forward(*input, &trace);
        epoch_loss += cross_entropy(logits, img.label(), &dlogits);
        net.backward(*input, trace, dlogits, nullptr, &grads);
      }
      grads.scale(1.0 / static_cast<double>(batch_end - cursor));
      net.sgd_step(grads, momentum, lr, settings.momentum, settings.weight_decay);
      cursor = batch_end;
    }
    outcome.final_epoch_loss = epoch_loss / static_cast<double>(order.size());
  }
  outcome.test_accuracy = accuracy(SmallConvAdapter(net), data.test);
  return outcome;
}

struct TrainedClassifier {
  std::shared_ptr<SmallConvAdapter> adapter;
  TrainOutcome outcome;
};

// Trains the desk-scale classifier named by `spec`, persists weights when the
// spec carries a path, and enforces the clean-accuracy gate that makes attack
// statistics meaningful. The gate failure is an error, never a silent result.
inline TrainedClassifier train_small_classifier(const ModelSpec& spec,
                                                const Dataset& data,
                                                const TrainSettings& settings = {},
                                                bool enforce_gate = true) {
  spec.validate();
  if (spec.architecture != "small-conv")
    throw DomainError("train_small_classifier: only small-conv is trainable");
  SmallConvNet::Dims dims;
  dims.in_h = spec.height;
  dims.in_w = spec.width;
  dims.in_c = spec.channels;
  dims.classes = spec.class_count;
  SmallConvNet net(dims, derive_seed(spec.train_seed, 0xA11));
  const TrainOutcome outcome = train_net(net, data, settings, spec.train_seed);
  if (!spec.weights_path.empty()) save_weights(net, spec, spec.weights_path);
  if (enforce_gate && outcome.test_accuracy < kAccuracyGate) {
    char buffer[160];
    std::snprintf(buffer, sizeof(buffer),
                  "accuracy gate failure: clean test accuracy %.4f < %.2f",
                  outcome.test_accuracy, kAccuracyGate);
    throw Error(buffer);
  }
  return {std::make_shared<SmallConvAdapter>(std::move(net)), outcome};
}

// Builds an adapter from a spec: stubs are synthesized deterministically from
// the seed, the conv net is loaded from its weights file.
inline std::shared_ptr<ClassifierAdapter> load_adapter(const ModelSpec& spec) {
  spec.validate();
  if (spec.architecture == "linear-stub")
    return std::make_shared<LinearStubAdapter>(LinearStubAdapter::seeded(
        spec.height, spec.width, spec.channels, spec.class_count, spec.train_seed));
  if (spec.architecture == "constant-stub")
    return std::make_shared<ConstantStubAdapter>(
        static_cast<int>(spec.train_seed % static_cast<std::uint64_t>(spec.class_count)),
        spec.class_count);
  if (spec.weights_path.empty())
    throw ModelMissingError("load_adapter: small-conv requires a weights_path");
  auto [net, stored_spec] = load_weights(spec.weights_path);
  if (stored_spec.height != spec.height || stored_spec.width != spec.width ||
      stored_spec.channels != spec.channels ||
      stored_spec.class_count != spec.class_count)
    throw ShapeMismatchError("load_adapter: weights do not match the model spec");
  return std::make_shared<SmallConvAdapter>(std::move(net));
}

}  // namespace vrap
