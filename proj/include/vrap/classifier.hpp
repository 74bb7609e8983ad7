#pragma once

#include <span>
#include <string>
#include <vector>

#include "vrap/tensor.hpp"
#include "vrap/types.hpp"

namespace vrap {

// Spatial feature maps of a designated convolutional stage together with the
// gradient of a target-class logit with respect to those maps.
struct ActivationMaps {
  Tensor activations;      // h' x w' x K, post-nonlinearity
  Tensor score_gradients;  // same shape: d logit_target / d activations
  std::string layer;
};

// The contract every model behind an attack or evaluation must satisfy.
// `loss` is the sum of per-sample cross-entropy style losses over the batch,
// so per-sample gradients do not depend on batch size. Implementations must
// be safe for concurrent read-only inference.
class ClassifierAdapter {
 public:
  virtual ~ClassifierAdapter() = default;

  virtual int class_count() const = 0;
  virtual std::vector<int> predict(std::span<const Tensor> batch) const = 0;
  virtual double loss(std::span<const Tensor> batch,
                      std::span<const int> labels) const = 0;
  // Gradient of the batch loss with respect to each input, same shapes.
  virtual std::vector<Tensor> input_gradient(
      std::span<const Tensor> batch, std::span<const int> labels) const = 0;

  virtual ActivationMaps activation_maps(const Tensor& /*pixels*/,
                                         int /*target_class*/) const {
    throw UnsupportedModelError("model does not expose activation maps");
  }

  // Loss and its input gradient in one pass. Overriding saves a forward pass;
  // the result must match the two separate calls exactly.
  struct LossWithGradient {
    double loss;
    std::vector<Tensor> gradients;
  };
  virtual LossWithGradient loss_and_input_gradient(
      std::span<const Tensor> batch, std::span<const int> labels) const {
    return {loss(batch, labels), input_gradient(batch, labels)};
  }

  int predict_one(const Tensor& pixels) const {
    return predict(std::span<const Tensor>(&pixels, 1)).front();
  }
  double loss_one(const Tensor& pixels, int label) const {
    return loss(std::span<const Tensor>(&pixels, 1), std::span<const int>(&label, 1));
  }
  Tensor input_gradient_one(const Tensor& pixels, int label) const {
    return std::move(input_gradient(std::span<const Tensor>(&pixels, 1),
                                    std::span<const int>(&label, 1))
                         .front());
  }
  std::pair<double, Tensor> loss_and_input_gradient_one(const Tensor& pixels,
                                                        int label) const {
    auto r = loss_and_input_gradient(std::span<const Tensor>(&pixels, 1),
                                     std::span<const int>(&label, 1));
    return {r.loss, std::move(r.gradients.front())};
  }
};

}  // namespace vrap
