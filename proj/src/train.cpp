#include "salgate/train.hpp"

#include <numeric>
#include <random>

namespace salgate {

void run_training(std::vector<nn::Param<float>*> params, const std::vector<bool>& frozen,
                  size_t num_samples, const TrainOptions& opts, TrainState& state,
                  const std::function<double(size_t)>& sample_loss, const EpochCallback& on_epoch) {
  if (num_samples == 0) throw Error(ErrorKind::EmptyDataset, "training set is empty");
  if (opts.epochs < 0) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 0");
  if (opts.batch_size <= 0) throw Error(ErrorKind::InvalidArgument, "batch_size must be > 0");
  if (frozen.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "frozen mask size mismatch");

  nn::Adam<float> adam(params, opts.adam);
  for (size_t i = 0; i < frozen.size(); ++i) adam.set_frozen(i, frozen[i]);
  if (!state.adam_m.empty()) {
    if (state.adam_m.size() != params.size() || state.adam_v.size() != params.size()) {
      throw Error(ErrorKind::ShapeMismatch, "optimizer state does not match parameter list");
    }
    adam.first_moments() = state.adam_m;
    adam.second_moments() = state.adam_v;
  }
  adam.set_steps(state.steps);
  state.seed = opts.seed;

  std::vector<int> order(num_samples);
  for (int e = 0; e < opts.epochs; ++e) {
    const int epoch = state.epoch + 1;
    std::seed_seq seq{static_cast<uint32_t>(opts.seed), static_cast<uint32_t>(opts.seed >> 32),
                      static_cast<uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::iota(order.begin(), order.end(), 0);
    nn::deterministic_shuffle(std::span<int>(order), rng);

    double epoch_loss = 0.0;
    for (size_t start = 0; start < num_samples; start += opts.batch_size) {
      const size_t end = std::min(num_samples, start + static_cast<size_t>(opts.batch_size));
      adam.zero_grad();
      for (size_t k = start; k < end; ++k) epoch_loss += sample_loss(static_cast<size_t>(order[k]));
      adam.scale_grad(1.0f / static_cast<float>(end - start));
      adam.step();
    }
    state.epoch = epoch;
    state.epoch_losses.push_back(epoch_loss / static_cast<double>(num_samples));
    if (on_epoch) on_epoch(epoch, state.epoch_losses.back());
  }
  state.steps = adam.steps();
  if (adam.steps() > 0) {
    state.adam_m = adam.first_moments();
    state.adam_v = adam.second_moments();
  }
}

namespace {

void check_sample_sizes(std::span<const LabeledSample> data, int input_size) {
  for (const auto& s : data) check_input_size(s.image, input_size);
}

}  // namespace

TrainState train_detector(DetectorNet<float>& net, std::span<const LabeledSample> data,
                          const TrainOptions& opts, TrainState state, const EpochCallback& on_epoch) {
  check_sample_sizes(data, net.config().input_size);
  auto params = net.params();
  run_training(params, std::vector<bool>(params.size(), false), data.size(), opts, state,
               [&](size_t i) {
                 return static_cast<double>(
                     net.loss_and_backward(image_to_tensor<float>(data[i].image), data[i].boxes));
               },
               on_epoch);
  return state;
}

TrainState train_saliency(SaliencyNet<float>& net, std::span<const LabeledSample> data,
                          const TrainOptions& opts, TrainState state, const EpochCallback& on_epoch) {
  check_sample_sizes(data, net.config().input_size);
  for (const auto& s : data) {
    if (!s.mask) throw Error(ErrorKind::MissingMasks, "sample '" + s.id + "' has no saliency mask");
  }
  auto params = net.params();
  run_training(params, std::vector<bool>(params.size(), false), data.size(), opts, state,
               [&](size_t i) {
                 return static_cast<double>(
                     net.loss_and_backward(image_to_tensor<float>(data[i].image), *data[i].mask));
               },
               on_epoch);
  return state;
}

TrainState train_hybrid(HybridNet<float>& net, std::span<const LabeledSample> data,
                        const TrainOptions& opts, TrainState state, const EpochCallback& on_epoch) {
  check_sample_sizes(data, net.detector().config().input_size);
  if (net.fusion_config().saliency_weight > 0.0) {
    for (const auto& s : data) {
      if (!s.mask) throw Error(ErrorKind::MissingMasks, "sample '" + s.id + "' has no saliency mask");
    }
  }
  run_training(net.params(), net.frozen_mask(), data.size(), opts, state,
               [&](size_t i) {
                 const SaliencyMap* mask = data[i].mask ? &*data[i].mask : nullptr;
                 return static_cast<double>(
                     net.loss_and_backward(image_to_tensor<float>(data[i].image), data[i].boxes, mask));
               },
               on_epoch);
  return state;
}

}  // namespace salgate
