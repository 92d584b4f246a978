#include "salgate/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace salgate {

namespace {
constexpr double kLogitClamp = 15.0;
}

void FusionConfig::validate() const {
  if (!(detector_weight >= 0.0) || !(saliency_weight >= 0.0)) {
    throw Error(ErrorKind::ConfigMismatch, "joint loss weights must be >= 0");
  }
}

template <class T>
FusionParams<T>::FusionParams(const DetectorConfig& cfg) {
  for (int s = 0; s < kNumScales; ++s) {
    const std::string p = "fusion.proj." + std::to_string(s);
    weight[s] = nn::Param<T>(p + ".weight", cfg.tap_channels(s), 1, 1);
    bias[s] = nn::Param<T>(p + ".bias", cfg.tap_channels(s), 1, 1);
  }
}

template <class T>
void FusionParams<T>::zero() {
  for (int s = 0; s < kNumScales; ++s) {
    weight[s].value.zero();
    bias[s].value.zero();
  }
}

SaliencyMap rescale_map(const SaliencyMap& m, int target_h, int target_w) {
  nn::Tensor<double> src(1, m.height(), m.width());
  const auto v = m.values();
  std::copy(v.begin(), v.end(), src.data.begin());
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const nn::Tensor<double> dst = nn::resize_bilinear(src, target_h, target_w);
  std::vector<float> out(dst.size());
  for (size_t i = 0; i < dst.size(); ++i) {
    out[i] = std::clamp(static_cast<float>(dst.data[i]), *lo, *hi);
  }
  return SaliencyMap(target_w, target_h, std::move(out));
}

template <class T>
std::array<nn::Tensor<T>, kNumScales> fuse(const std::array<nn::Tensor<T>, kNumScales>& latents,
                                           const nn::Tensor<T>& map, const FusionConfig& cfg,
                                           const FusionParams<T>& params) {
  if (map.c != 1) throw Error(ErrorKind::ShapeMismatch, "saliency map must have one channel");
  std::array<nn::Tensor<T>, kNumScales> out;
  for (int s = 0; s < kNumScales; ++s) {
    const nn::Tensor<T>& lat = latents[s];
    if (cfg.projection == Projection::Learned1x1 && params.weight[s].value.c != lat.c) {
      throw Error(ErrorKind::ShapeMismatch, "projection width != latent channels at scale " + std::to_string(s));
    }
    const nn::Tensor<T> r = nn::resize_bilinear(map, lat.h, lat.w);
    out[s] = lat;
    for (int c = 0; c < lat.c; ++c) {
      T w = T(1), b = T(0);
      if (cfg.projection == Projection::Learned1x1) {
        w = params.weight[s].value.data[c];
        b = params.bias[s].value.data[c];
      }
      T* dst = out[s].channel(c);
      for (size_t i = 0; i < r.size(); ++i) dst[i] += w * r.data[i] + b;
    }
  }
  return out;
}

template std::array<nn::Tensor<float>, kNumScales> fuse<float>(
    const std::array<nn::Tensor<float>, kNumScales>&, const nn::Tensor<float>&, const FusionConfig&,
    const FusionParams<float>&);
template std::array<nn::Tensor<double>, kNumScales> fuse<double>(
    const std::array<nn::Tensor<double>, kNumScales>&, const nn::Tensor<double>&, const FusionConfig&,
    const FusionParams<double>&);

namespace {

void check_hybrid_configs(const DetectorConfig& det, const SaliencyNetConfig& sal, const FusionConfig& fus) {
  fus.validate();
  if (det.input_size != sal.input_size) {
    throw Error(ErrorKind::ConfigMismatch, "detector and saliency input sizes differ");
  }
}

}  // namespace

template <class T>
HybridNet<T>::HybridNet(const DetectorConfig& det_cfg, const SaliencyNetConfig& sal_cfg,
                        const FusionConfig& fus_cfg)
    : det_((check_hybrid_configs(det_cfg, sal_cfg, fus_cfg), det_cfg)),
      sal_(sal_cfg),
      fusion_(det_cfg),
      fus_cfg_(fus_cfg) {}

template <class T>
void HybridNet<T>::init(uint64_t detector_seed, uint64_t saliency_seed) {
  det_.init(detector_seed);
  sal_.init(saliency_seed);
  fusion_.zero();
}

template <class T>
typename HybridNet<T>::Trace HybridNet<T>::forward(const nn::Tensor<T>& input) const {
  Trace t;
  t.det = det_.backbone(input);
  t.sal = sal_.forward(input);
  const nn::Tensor<T>& z = t.sal.logits[0];
  t.map = nn::Tensor<T>(1, z.h, z.w);
  for (size_t i = 0; i < z.size(); ++i) {
    t.map.data[i] = nn::sigmoid(std::clamp(z.data[i], T(-kLogitClamp), T(kLogitClamp)));
  }
  std::array<nn::Tensor<T>, kNumScales> latents{t.det.tap(0), t.det.tap(1), t.det.tap(2)};
  t.fused = fuse(latents, t.map, fus_cfg_, fusion_);
  for (int s = 0; s < kNumScales; ++s) {
    t.rescaled[s] = nn::resize_bilinear(t.map, latents[s].h, latents[s].w);
    t.heads[s] = det_.head(s, t.fused[s]);
  }
  return t;
}

template <class T>
T HybridNet<T>::loss_and_backward(const nn::Tensor<T>& input, std::span<const BoundingBox> truths,
                                  const SaliencyMap* mask) {
  const bool saliency_term = fus_cfg_.saliency_weight > 0.0;
  if (saliency_term && mask == nullptr) {
    throw Error(ErrorKind::MissingMasks, "saliency_weight > 0 requires a ground-truth mask");
  }
  const Trace t = forward(input);
  const T det_w = T(fus_cfg_.detector_weight), sal_w = T(fus_cfg_.saliency_weight);

  std::vector<nn::Tensor<T>> g_heads;
  const T det_loss = detection_loss<T>(t.heads, truths, det_.config(), &g_heads);
  const int S = det_.config().input_size;
  nn::Tensor<T> g_map(1, S, S);
  std::array<nn::Tensor<T>, kNumScales> g_taps;
  for (int s = 0; s < kNumScales; ++s) {
    for (T& g : g_heads[s].data) g *= det_w;
    nn::Tensor<T> g_fused = det_.head_backward(s, t.fused[s], g_heads[s]);
    const nn::Tensor<T>& r = t.rescaled[s];
    nn::Tensor<T> g_r(1, r.h, r.w);
    for (int c = 0; c < g_fused.c; ++c) {
      const T* gf = g_fused.channel(c);
      T w = T(1);
      if (fus_cfg_.projection == Projection::Learned1x1) {
        w = fusion_.weight[s].value.data[c];
        T gw = T(0), gb = T(0);
        for (size_t i = 0; i < r.size(); ++i) {
          gw += gf[i] * r.data[i];
          gb += gf[i];
        }
        fusion_.weight[s].grad.data[c] += gw;
        fusion_.bias[s].grad.data[c] += gb;
      }
      for (size_t i = 0; i < r.size(); ++i) g_r.data[i] += w * gf[i];
    }
    nn::add_inplace(g_map, nn::resize_bilinear_backward(g_r, S, S));
    g_taps[s] = std::move(g_fused);
  }
  det_.backbone_backward(t.det, std::move(g_taps));

  const SaliencyNetConfig& scfg = sal_.config();
  const int outputs = scfg.num_outputs();
  std::vector<nn::Tensor<T>> g_logits;
  T sal_loss = T(0);
  for (int o = 0; o < outputs; ++o) {
    g_logits.emplace_back(1, S, S);
    if (saliency_term) {
      sal_loss += bce_with_logits_mean<T>(t.sal.logits[o], *mask, &g_logits.back(), sal_w / T(outputs));
    }
  }
  sal_loss /= T(outputs);
  if (!fus_cfg_.freeze_saliency) {
    const nn::Tensor<T>& z = t.sal.logits[0];
    for (size_t i = 0; i < z.size(); ++i) {
      if (std::abs(z.data[i]) >= T(kLogitClamp)) continue;
      const T m = t.map.data[i];
      g_logits[0].data[i] += g_map.data[i] * m * (T(1) - m);
    }
    sal_.backward(t.sal, g_logits);
  }
  return det_w * det_loss + sal_w * sal_loss;
}

template <class T>
std::vector<nn::Param<T>*> HybridNet<T>::params() {
  std::vector<nn::Param<T>*> out = det_.params();
  for (auto* p : sal_.params()) out.push_back(p);
  for (int s = 0; s < kNumScales; ++s) {
    out.push_back(&fusion_.weight[s]);
    out.push_back(&fusion_.bias[s]);
  }
  return out;
}

template <class T>
std::vector<bool> HybridNet<T>::frozen_mask() {
  const size_t n_det = det_.params().size();
  const size_t n_sal = sal_.params().size();
  std::vector<bool> mask(n_det + n_sal + 2 * kNumScales, false);
  const bool freeze_proj = !fus_cfg_.train_projection || fus_cfg_.projection == Projection::BroadcastAdd;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (i >= n_det && i < n_det + n_sal) mask[i] = fus_cfg_.freeze_saliency;
    if (i >= n_det + n_sal) mask[i] = freeze_proj;
  }
  return mask;
}

template struct FusionParams<float>;
template struct FusionParams<double>;
template class HybridNet<float>;
template class HybridNet<double>;

HybridOutput hybrid_forward(const HybridNet<float>& net, const ImageBuffer& image) {
  const DetectorConfig& cfg = net.detector().config();
  check_input_size(image, cfg.input_size);
  const auto t = net.forward(image_to_tensor<float>(image));
  std::array<nn::Tensor<float>, kNumScales> heads = t.heads;
  auto dets = nms(decode(grids_from_heads(heads, cfg), cfg), cfg.nms_iou_threshold);
  if (static_cast<int>(dets.size()) > cfg.max_detections) dets.erase(dets.begin() + cfg.max_detections, dets.end());
  std::vector<float> values(t.map.data.begin(), t.map.data.end());
  return {std::move(dets), SaliencyMap(t.map.w, t.map.h, std::move(values))};
}

}  // namespace salgate
