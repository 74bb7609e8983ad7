// End-to-end walkthrough on a miniature setup: train a small classifier on
// the synthetic corpus, perturb one image patch inside its epsilon
// neighborhood, and print what the position search and brightness player did.

#include <cstdio>

#include "vrap/attack.hpp"
#include "vrap/dataset.hpp"
#include "vrap/metrics.hpp"
#include "vrap/models.hpp"

int main() {
  vrap::SyntheticSpec data_spec;
  data_spec.train_count = 1500;
  data_spec.test_count = 300;
  data_spec.seed = 11;
  const vrap::Dataset data = vrap::make_synthetic_dataset(data_spec);

  vrap::ModelSpec model_spec;
  model_spec.train_seed = 11;
  vrap::TrainSettings train;
  train.epochs = 8;
  train.lr_drop_epochs = {6};
  std::printf("training a %dx%d classifier on %zu images...\n", model_spec.height,
              model_spec.width, data.train.size());
  const vrap::TrainedClassifier trained =
      vrap::train_small_classifier(model_spec, data, train, /*enforce_gate=*/false);
  std::printf("clean test accuracy: %.3f\n", trained.outcome.test_accuracy);

  // find a correctly classified test image
  int index = 0;
  while (trained.adapter->predict_one(data.test[index].pixels()) !=
         data.test[index].label())
    ++index;
  const vrap::Image& image = data.test[index];

  vrap::AttackConfig config;
  config.epsilon = 16.0 / 255.0;
  config.iterations = 60;
  config.seed = 3;
  const auto [h, w] = vrap::patch_shape_for(image, config.patch_size);
  const vrap::Placement start = vrap::sample_initial_placement(
      image.height(), image.width(), h, w, config.seed);
  const vrap::Tensor reference = vrap::extract(image, start, h, w);

  const vrap::AttackResult result =
      vrap::vrap_attack(image, reference, config, *trained.adapter);
  const int adv_pred = trained.adapter->predict_one(vrap::paste_pixels(
      image.pixels(), result.patch.delta(), result.final_placement));

  std::printf("image %d: label %d, adversarial prediction %d\n", index,
              image.label(), adv_pred);
  std::printf("patch moved (%d,%d) -> (%d,%d); objective %.4f -> %.4f\n", start.i,
              start.j, result.final_placement.i, result.final_placement.j,
              result.loss_trace.front(), result.loss_trace.back());
  std::printf("final brightness params: lam %.3f gamma %.3f\n",
              result.gamma_trace.back().lam, result.gamma_trace.back().gamma);
  std::printf("position-irrelevant rate: %.3f\n",
              vrap::position_irrelevant_rate(image, result.patch, 5,
                                             *trained.adapter));
  return 0;
}
