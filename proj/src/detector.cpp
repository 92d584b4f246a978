#include "salgate/detector.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace salgate {

std::array<std::vector<AnchorSize>, kNumScales> DetectorConfig::default_anchors() {
  std::array<std::vector<AnchorSize>, kNumScales> out;
  const std::vector<AnchorSize> base{{16, 16}, {24, 12}, {12, 24}};
  for (int s = 0; s < kNumScales; ++s) {
    const double f = std::pow(2.0, s);
    for (const auto& a : base) out[s].push_back({a.w * f, a.h * f});
  }
  return out;
}

void DetectorConfig::validate() const {
  if (strides != std::array<int, kNumScales>{8, 16, 32}) {
    throw Error(ErrorKind::ConfigMismatch, "backbone strides are fixed at 8/16/32");
  }
  if (input_size <= 0 || input_size % 32 != 0) {
    throw Error(ErrorKind::ConfigMismatch, "input_size must be a positive multiple of 32");
  }
  if (anchors_per_scale <= 0) throw Error(ErrorKind::ConfigMismatch, "anchors_per_scale must be > 0");
  for (const auto& scale : anchor_sizes) {
    if (static_cast<int>(scale.size()) != anchors_per_scale) {
      throw Error(ErrorKind::ConfigMismatch, "anchor list length != anchors_per_scale");
    }
    for (const auto& a : scale) {
      if (!(a.w > 0.0) || !(a.h > 0.0)) throw Error(ErrorKind::ConfigMismatch, "anchor sizes must be positive");
    }
  }
  for (int w : widths) {
    if (w <= 0) throw Error(ErrorKind::ConfigMismatch, "channel widths must be positive");
  }
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0) ||
      !(nms_iou_threshold >= 0.0 && nms_iou_threshold <= 1.0)) {
    throw Error(ErrorKind::ConfigMismatch, "thresholds must lie in [0,1]");
  }
  if (max_detections <= 0) throw Error(ErrorKind::ConfigMismatch, "max_detections must be > 0");
}

namespace {

double shape_iou(double w, double h, const AnchorSize& a) {
  const double inter = std::min(w, a.w) * std::min(h, a.h);
  return inter / (w * h + a.w * a.h - inter);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

std::vector<AnchorTarget> assign_targets(std::span<const BoundingBox> truths,
                                         const DetectorConfig& cfg) {
  std::vector<AnchorTarget> targets;
  const double size = cfg.input_size;
  for (size_t i = 0; i < truths.size(); ++i) {
    const auto clipped = clip_box(truths[i], size, size);
    if (!clipped) {
      throw Error(ErrorKind::DegenerateTruth, "truth box " + std::to_string(i) + " is empty after clipping");
    }
    const double w = clipped->width(), h = clipped->height();
    int best_s = 0, best_a = 0;
    double best = -1.0;
    for (int s = 0; s < kNumScales; ++s) {
      for (int a = 0; a < cfg.anchors_per_scale; ++a) {
        const double v = shape_iou(w, h, cfg.anchor_sizes[s][a]);
        if (v > best) {
          best = v;
          best_s = s;
          best_a = a;
        }
      }
    }
    const double stride = cfg.strides[best_s];
    const int grid = cfg.grid_size(best_s);
    const double fx = clipped->center_x() / stride, fy = clipped->center_y() / stride;
    const int gx = std::clamp(static_cast<int>(std::floor(fx)), 0, grid - 1);
    const int gy = std::clamp(static_cast<int>(std::floor(fy)), 0, grid - 1);
    const bool taken = std::any_of(targets.begin(), targets.end(), [&](const AnchorTarget& t) {
      return t.scale == best_s && t.anchor == best_a && t.gx == gx && t.gy == gy;
    });
    if (taken) continue;
    const AnchorSize& anchor = cfg.anchor_sizes[best_s][best_a];
    targets.push_back({best_s, best_a, gy, gx, fx - gx, fy - gy, std::log(w / anchor.w),
                       std::log(h / anchor.h), static_cast<int>(i)});
  }
  return targets;
}

void encode_target(const AnchorTarget& t, Grids& grids, double objectness_logit) {
  ScaleGrid& g = grids[t.scale];
  g.at(t.anchor, kTx, t.gy, t.gx) = logit(t.offset_x);
  g.at(t.anchor, kTy, t.gy, t.gx) = logit(t.offset_y);
  g.at(t.anchor, kTw, t.gy, t.gx) = t.tw;
  g.at(t.anchor, kTh, t.gy, t.gx) = t.th;
  g.at(t.anchor, kObj, t.gy, t.gx) = objectness_logit;
}

std::vector<Detection> decode(const Grids& grids, const DetectorConfig& cfg) {
  std::vector<Detection> out;
  const double size = cfg.input_size;
  for (int s = 0; s < kNumScales; ++s) {
    const ScaleGrid& g = grids[s];
    if (g.grid_h != cfg.grid_size(s) || g.grid_w != cfg.grid_size(s) ||
        g.anchors != cfg.anchors_per_scale) {
      throw Error(ErrorKind::ShapeMismatch, "grid shape inconsistent with detector config");
    }
    const double stride = cfg.strides[s];
    for (int a = 0; a < g.anchors; ++a) {
      const AnchorSize& anchor = cfg.anchor_sizes[s][a];
      for (int y = 0; y < g.grid_h; ++y) {
        for (int x = 0; x < g.grid_w; ++x) {
          const double score = nn::sigmoid(g.at(a, kObj, y, x));
          if (score < cfg.conf_threshold) continue;
          const double cx = (x + nn::sigmoid(g.at(a, kTx, y, x))) * stride;
          const double cy = (y + nn::sigmoid(g.at(a, kTy, y, x))) * stride;
          const double w = anchor.w * std::exp(std::clamp(g.at(a, kTw, y, x), -20.0, 20.0));
          const double h = anchor.h * std::exp(std::clamp(g.at(a, kTh, y, x), -20.0, 20.0));
          const auto box = clip_box(BoundingBox::from_center(cx, cy, w, h), size, size);
          if (box) out.emplace_back(*box, score);
        }
      }
    }
  }
  return out;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.box.x_min() != b.box.x_min()) return a.box.x_min() < b.box.x_min();
    return a.box.y_min() < b.box.y_min();
  });
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou(d.box, k.box) >= iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

template <class T>
T detection_loss(std::span<const nn::Tensor<T>> heads, std::span<const BoundingBox> truths,
                 const DetectorConfig& cfg, std::vector<nn::Tensor<T>>* grads) {
  if (heads.size() != kNumScales) throw Error(ErrorKind::ShapeMismatch, "expected three head outputs");
  for (int s = 0; s < kNumScales; ++s) {
    if (heads[s].c != cfg.head_channels() || heads[s].h != cfg.grid_size(s) ||
        heads[s].w != cfg.grid_size(s)) {
      throw Error(ErrorKind::ShapeMismatch, "head output shape inconsistent with config");
    }
  }
  const std::vector<AnchorTarget> targets = assign_targets(truths, cfg);
  std::vector<BoundingBox> clipped;
  for (const auto& b : truths) clipped.push_back(*clip_box(b, cfg.input_size, cfg.input_size));

  if (grads) {
    grads->clear();
    for (const auto& h : heads) grads->emplace_back(h.c, h.h, h.w);
  }
  const int A = cfg.anchors_per_scale;
  T total = T(0);
  for (int s = 0; s < kNumScales; ++s) {
    const nn::Tensor<T>& head = heads[s];
    const double stride = cfg.strides[s];
    for (int a = 0; a < A; ++a) {
      const AnchorSize& anchor = cfg.anchor_sizes[s][a];
      for (int y = 0; y < head.h; ++y) {
        for (int x = 0; x < head.w; ++x) {
          const auto pos = std::find_if(targets.begin(), targets.end(), [&](const AnchorTarget& t) {
            return t.scale == s && t.anchor == a && t.gy == y && t.gx == x;
          });
          const T z = head.at(a * 5 + kObj, y, x);
          if (pos != targets.end()) {
            total += nn::softplus(-z);
            const T tx = head.at(a * 5 + kTx, y, x), ty = head.at(a * 5 + kTy, y, x);
            const T tw = head.at(a * 5 + kTw, y, x), th = head.at(a * 5 + kTh, y, x);
            const T sx = nn::sigmoid(tx), sy = nn::sigmoid(ty);
            const T cw = T(cfg.coord_weight);
            const T dx = sx - T(pos->offset_x), dy = sy - T(pos->offset_y);
            const T dw = tw - T(pos->tw), dh = th - T(pos->th);
            total += cw * (dx * dx + dy * dy + dw * dw + dh * dh);
            if (grads) {
              auto& g = (*grads)[s];
              g.at(a * 5 + kObj, y, x) = nn::sigmoid(z) - T(1);
              g.at(a * 5 + kTx, y, x) = cw * T(2) * dx * sx * (T(1) - sx);
              g.at(a * 5 + kTy, y, x) = cw * T(2) * dy * sy * (T(1) - sy);
              g.at(a * 5 + kTw, y, x) = cw * T(2) * dw;
              g.at(a * 5 + kTh, y, x) = cw * T(2) * dh;
            }
            continue;
          }
          const BoundingBox prior =
              BoundingBox::from_center((x + 0.5) * stride, (y + 0.5) * stride, anchor.w, anchor.h);
          double best = 0.0;
          for (const auto& t : clipped) best = std::max(best, iou(prior, t));
          if (best >= cfg.ignore_iou) continue;
          const T nw = T(cfg.noobj_weight);
          total += nw * nn::softplus(z);
          if (grads) (*grads)[s].at(a * 5 + kObj, y, x) = nw * nn::sigmoid(z);
        }
      }
    }
  }
  return total;
}

template float detection_loss<float>(std::span<const nn::Tensor<float>>, std::span<const BoundingBox>,
                                     const DetectorConfig&, std::vector<nn::Tensor<float>>*);
template double detection_loss<double>(std::span<const nn::Tensor<double>>, std::span<const BoundingBox>,
                                       const DetectorConfig&, std::vector<nn::Tensor<double>>*);

double loss(const Grids& grids, std::span<const BoundingBox> truths, const DetectorConfig& cfg) {
  std::vector<nn::Tensor<double>> heads;
  for (const auto& g : grids) heads.push_back(g.to_tensor());
  return detection_loss<double>(heads, truths, cfg, nullptr);
}

template <class T>
DetectorNet<T>::DetectorNet(const DetectorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto& w = cfg_.widths;
  layers_.emplace_back("backbone.0", 3, w[0], 3, 2);
  layers_.emplace_back("backbone.1", w[0], w[1], 3, 2);
  layers_.emplace_back("backbone.2", w[1], w[2], 3, 2);
  layers_.emplace_back("backbone.3", w[2], w[2], 3, 1);
  layers_.emplace_back("backbone.4", w[2], w[3], 3, 2);
  layers_.emplace_back("backbone.5", w[3], w[3], 3, 1);
  layers_.emplace_back("backbone.6", w[3], w[4], 3, 2);
  layers_.emplace_back("backbone.7", w[4], w[4], 3, 1);
  for (int s = 0; s < kNumScales; ++s) {
    heads_.emplace_back("head." + std::to_string(s), cfg_.tap_channels(s), cfg_.head_channels(), 1, 1);
  }
}

template <class T>
void DetectorNet<T>::init(uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& l : layers_) l.init_he(rng);
  for (auto& h : heads_) {
    h.init_he(rng, 0.1);
    // objectness prior of 1%: most anchors are background
    for (int a = 0; a < cfg_.anchors_per_scale; ++a) {
      h.bias().value.data[a * 5 + kObj] = static_cast<T>(std::log(0.01 / 0.99));
    }
  }
}

template <class T>
void DetectorNet<T>::zero_parameters() {
  for (auto* p : params()) p->value.zero();
}

template <class T>
typename DetectorNet<T>::Trace DetectorNet<T>::backbone(const nn::Tensor<T>& input) const {
  if (input.c != 3 || input.h != cfg_.input_size || input.w != cfg_.input_size) {
    throw Error(ErrorKind::ConfigMismatch, "detector input must be 3x" + std::to_string(cfg_.input_size) +
                                               "x" + std::to_string(cfg_.input_size));
  }
  Trace trace;
  trace.acts.reserve(kBackboneLayers + 1);
  trace.acts.push_back(input);
  for (const auto& layer : layers_) {
    nn::Tensor<T> y = layer.forward(trace.acts.back());
    nn::leaky_relu_inplace(y);
    trace.acts.push_back(std::move(y));
  }
  return trace;
}

template <class T>
nn::Tensor<T> DetectorNet<T>::head(int scale, const nn::Tensor<T>& latent) const {
  return heads_[scale].forward(latent);
}

template <class T>
std::array<nn::Tensor<T>, kNumScales> DetectorNet<T>::heads(const Trace& trace) const {
  return {head(0, trace.tap(0)), head(1, trace.tap(1)), head(2, trace.tap(2))};
}

template <class T>
nn::Tensor<T> DetectorNet<T>::head_backward(int scale, const nn::Tensor<T>& latent,
                                            const nn::Tensor<T>& grad) {
  return heads_[scale].backward(latent, grad, true);
}

template <class T>
void DetectorNet<T>::backbone_backward(const Trace& trace,
                                       std::array<nn::Tensor<T>, kNumScales> grad_taps) {
  nn::Tensor<T> g;
  for (int i = kBackboneLayers - 1; i >= 0; --i) {
    for (int s = 0; s < kNumScales; ++s) {
      if (kTapLayer[s] != i || grad_taps[s].size() == 0) continue;
      if (g.size() == 0) {
        g = std::move(grad_taps[s]);
      } else {
        nn::add_inplace(g, grad_taps[s]);
      }
    }
    if (g.size() == 0) continue;
    nn::leaky_relu_backward_inplace(g, trace.acts[i + 1]);
    g = layers_[i].backward(trace.acts[i], g, i > 0);
  }
}

template <class T>
T DetectorNet<T>::loss_and_backward(const nn::Tensor<T>& input, std::span<const BoundingBox> truths) {
  const Trace trace = backbone(input);
  const auto outs = heads(trace);
  std::vector<nn::Tensor<T>> grads;
  const T value = detection_loss<T>(outs, truths, cfg_, &grads);
  std::array<nn::Tensor<T>, kNumScales> grad_taps;
  for (int s = 0; s < kNumScales; ++s) grad_taps[s] = head_backward(s, trace.tap(s), grads[s]);
  backbone_backward(trace, std::move(grad_taps));
  return value;
}

template <class T>
std::vector<nn::Param<T>*> DetectorNet<T>::params() {
  std::vector<nn::Param<T>*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  for (auto& h : heads_) {
    out.push_back(&h.weight());
    out.push_back(&h.bias());
  }
  return out;
}

template <class T>
std::vector<const nn::Param<T>*> DetectorNet<T>::params() const {
  std::vector<const nn::Param<T>*> out;
  for (auto* p : const_cast<DetectorNet*>(this)->params()) out.push_back(p);
  return out;
}

template class DetectorNet<float>;
template class DetectorNet<double>;

Grids grids_from_heads(const std::array<nn::Tensor<float>, kNumScales>& heads,
                       const DetectorConfig& cfg) {
  Grids grids;
  for (int s = 0; s < kNumScales; ++s) {
    grids[s] = ScaleGrid::from_tensor(heads[s], cfg.strides[s], cfg.anchors_per_scale);
  }
  return grids;
}

void check_input_size(const ImageBuffer& image, int input_size) {
  if (image.width() != input_size || image.height() != input_size) {
    throw Error(ErrorKind::ConfigMismatch,
                "image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                    ", expected " + std::to_string(input_size) + "x" + std::to_string(input_size));
  }
}

DetectorOutput forward(const DetectorNet<float>& net, const ImageBuffer& image) {
  check_input_size(image, net.config().input_size);
  const auto trace = net.backbone(image_to_tensor<float>(image));
  const auto outs = net.heads(trace);
  DetectorOutput out;
  out.grids = grids_from_heads(outs, net.config());
  for (int s = 0; s < kNumScales; ++s) out.latents[s] = trace.tap(s);
  return out;
}

std::vector<Detection> predict(const DetectorNet<float>& net, const ImageBuffer& image) {
  const DetectorConfig& cfg = net.config();
  auto dets = nms(decode(forward(net, image).grids, cfg), cfg.nms_iou_threshold);
  if (static_cast<int>(dets.size()) > cfg.max_detections) dets.erase(dets.begin() + cfg.max_detections, dets.end());
  return dets;
}

}  // namespace salgate
