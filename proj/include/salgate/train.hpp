#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salgate/core.hpp"
#include "salgate/detector.hpp"
#include "salgate/hybrid.hpp"
#include "salgate/nn.hpp"
#include "salgate/saliency_model.hpp"

namespace salgate {

/// Image at network input size plus its ground truth.
struct LabeledSample {
  std::string id;
  ImageBuffer image;
  std::vector<BoundingBox> boxes;
  std::optional<SaliencyMap> mask;
};

struct TrainOptions {
  int epochs = 100;
  int batch_size = 8;
  uint64_t seed = 0;
  nn::AdamConfig adam{};
};

/// Everything besides the parameters that a resumed run needs.
struct TrainState {
  int epoch = 0;
  uint64_t seed = 0;
  int64_t steps = 0;
  std::vector<double> epoch_losses;
  std::vector<nn::Tensor<float>> adam_m, adam_v;  // empty before the first step
};

/// Called after every epoch with the epoch index (1-based) and mean sample loss.
using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Mini-batch Adam over `params`. `sample_loss(i)` must accumulate gradients of
/// sample i and return its loss. Batches are drawn from a per-epoch shuffle seeded
/// by (seed, epoch), so a resumed run continues the same trajectory.
void run_training(std::vector<nn::Param<float>*> params, const std::vector<bool>& frozen,
                  size_t num_samples, const TrainOptions& opts, TrainState& state,
                  const std::function<double(size_t)>& sample_loss, const EpochCallback& on_epoch = {});

TrainState train_detector(DetectorNet<float>& net, std::span<const LabeledSample> data,
                          const TrainOptions& opts, TrainState state = {},
                          const EpochCallback& on_epoch = {});

TrainState train_saliency(SaliencyNet<float>& net, std::span<const LabeledSample> data,
                          const TrainOptions& opts, TrainState state = {},
                          const EpochCallback& on_epoch = {});

TrainState train_hybrid(HybridNet<float>& net, std::span<const LabeledSample> data,
                        const TrainOptions& opts, TrainState state = {},
                        const EpochCallback& on_epoch = {});

}  // namespace salgate
