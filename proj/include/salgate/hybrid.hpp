#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "salgate/core.hpp"
#include "salgate/detector.hpp"
#include "salgate/saliency_model.hpp"

namespace salgate {

enum class Projection { BroadcastAdd, Learned1x1 };

struct FusionConfig {
  Projection projection = Projection::Learned1x1;
  double detector_weight = 1.0;
  double saliency_weight = 1.0;
  bool freeze_saliency = false;
  // Off keeps the projection at its initial value (the zero projection makes
  // the hybrid reduce exactly to the plain detector).
  bool train_projection = true;

  void validate() const;
};

/// Per-scale 1 -> C projection of the rescaled saliency map: weight[c]*m + bias[c].
template <class T>
struct FusionParams {
  std::array<nn::Param<T>, kNumScales> weight;
  std::array<nn::Param<T>, kNumScales> bias;

  explicit FusionParams(const DetectorConfig& cfg);
  void zero();
};

/// Bilinear resampling, half-pixel centers, result clamped to the source range.
SaliencyMap rescale_map(const SaliencyMap& m, int target_h, int target_w);

/// latent_s + project_s(rescale(map, grid of s)) for each scale; `map` is 1 x S x S.
template <class T>
std::array<nn::Tensor<T>, kNumScales> fuse(const std::array<nn::Tensor<T>, kNumScales>& latents,
                                           const nn::Tensor<T>& map, const FusionConfig& cfg,
                                           const FusionParams<T>& params);

/// Detector and saliency network joined by saliency fusion at the three pre-head latents.
template <class T>
class HybridNet {
 public:
  HybridNet(const DetectorConfig& det_cfg, const SaliencyNetConfig& sal_cfg, const FusionConfig& fus_cfg);

  /// Detector and saliency initialized exactly as their standalone counterparts
  /// with the same seeds; projection starts at zero.
  void init(uint64_t detector_seed, uint64_t saliency_seed);

  struct Trace {
    typename DetectorNet<T>::Trace det;
    typename SaliencyNet<T>::Trace sal;
    nn::Tensor<T> map;  // sigmoid of the clamped final saliency logits, 1 x S x S
    std::array<nn::Tensor<T>, kNumScales> rescaled;
    std::array<nn::Tensor<T>, kNumScales> fused;
    std::array<nn::Tensor<T>, kNumScales> heads;
  };

  Trace forward(const nn::Tensor<T>& input) const;

  /// Joint loss = detector_weight * detection loss + saliency_weight * saliency loss.
  /// MissingMasks when the saliency term is active and `mask` is absent.
  T loss_and_backward(const nn::Tensor<T>& input, std::span<const BoundingBox> truths,
                      const SaliencyMap* mask);

  DetectorNet<T>& detector() noexcept { return det_; }
  SaliencyNet<T>& saliency() noexcept { return sal_; }
  FusionParams<T>& fusion() noexcept { return fusion_; }
  const DetectorNet<T>& detector() const noexcept { return det_; }
  const SaliencyNet<T>& saliency() const noexcept { return sal_; }
  const FusionParams<T>& fusion() const noexcept { return fusion_; }
  const FusionConfig& fusion_config() const noexcept { return fus_cfg_; }

  std::vector<nn::Param<T>*> params();
  /// Parallel to params(): true for parameters the optimizer must not touch.
  std::vector<bool> frozen_mask();

 private:
  DetectorNet<T> det_;
  SaliencyNet<T> sal_;
  FusionParams<T> fusion_;
  FusionConfig fus_cfg_;
};

struct HybridOutput {
  std::vector<Detection> detections;
  SaliencyMap saliency;
};

HybridOutput hybrid_forward(const HybridNet<float>& net, const ImageBuffer& image);

extern template class HybridNet<float>;
extern template class HybridNet<double>;

}  // namespace salgate
