#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "salgate/core.hpp"
#include "salgate/nn.hpp"

namespace salgate {

struct AnchorSize {
  double w, h;
};

inline constexpr int kNumScales = 3;

/// Three-scale single-class detector configuration. The backbone halves the
/// resolution five times, so the scale strides are fixed at 8/16/32.
struct DetectorConfig {
  int input_size = 256;
  std::array<int, kNumScales> strides{8, 16, 32};
  int anchors_per_scale = 3;
  std::array<std::vector<AnchorSize>, kNumScales> anchor_sizes = default_anchors();
  double conf_threshold = 0.25;
  double nms_iou_threshold = 0.5;
  int max_detections = 100;
  // Channel widths: stride-2 stem, stride-4 stage, then the stride-8/16/32 taps.
  std::array<int, 5> widths{16, 16, 32, 64, 64};
  double coord_weight = 1.0;
  double noobj_weight = 1.0;
  double ignore_iou = 0.5;

  static std::array<std::vector<AnchorSize>, kNumScales> default_anchors();

  void validate() const;
  int grid_size(int scale) const { return input_size / strides[scale]; }
  int tap_channels(int scale) const { return widths[2 + scale]; }
  int head_channels() const { return anchors_per_scale * 5; }
};

enum GridField : int { kTx = 0, kTy = 1, kTw = 2, kTh = 3, kObj = 4 };

/// Raw head output at one scale: five unbounded values per anchor per cell,
/// laid out [anchor][field][y][x].
struct ScaleGrid {
  int stride = 0;
  int grid_h = 0, grid_w = 0;
  int anchors = 0;
  std::vector<double> raw;

  ScaleGrid() = default;
  ScaleGrid(int stride_px, int gh, int gw, int num_anchors)
      : stride(stride_px), grid_h(gh), grid_w(gw), anchors(num_anchors),
        raw(static_cast<size_t>(num_anchors) * 5 * gh * gw, 0.0) {}

  double& at(int a, int field, int y, int x) {
    return raw[((static_cast<size_t>(a) * 5 + field) * grid_h + y) * grid_w + x];
  }
  double at(int a, int field, int y, int x) const {
    return raw[((static_cast<size_t>(a) * 5 + field) * grid_h + y) * grid_w + x];
  }

  template <class T>
  static ScaleGrid from_tensor(const nn::Tensor<T>& t, int stride_px, int num_anchors) {
    ScaleGrid g(stride_px, t.h, t.w, num_anchors);
    for (size_t i = 0; i < t.size(); ++i) g.raw[i] = static_cast<double>(t.data[i]);
    return g;
  }
  nn::Tensor<double> to_tensor() const {
    nn::Tensor<double> t(anchors * 5, grid_h, grid_w);
    t.data = raw;
    return t;
  }
};

using Grids = std::array<ScaleGrid, kNumScales>;

/// Target values for a truth box at the anchor that owns it.
struct AnchorTarget {
  int scale, anchor, gy, gx;
  double offset_x, offset_y;  // in-cell center offsets in [0,1)
  double tw, th;              // log(size / anchor)
  int truth_index;
};

/// Best-shape anchor per truth box, first truth wins a contested slot.
/// Truth boxes are clipped to the input frame; an empty clip is DegenerateTruth.
std::vector<AnchorTarget> assign_targets(std::span<const BoundingBox> truths,
                                         const DetectorConfig& cfg);

/// Writes a target into a grid so that decoding reproduces the truth box.
void encode_target(const AnchorTarget& target, Grids& grids, double objectness_logit = 10.0);

std::vector<Detection> decode(const Grids& grids, const DetectorConfig& cfg);

/// Greedy NMS; ties broken by (score desc, x_min asc, y_min asc).
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold);

/// Objectness BCE plus squared-error box regression on positives. When `grads`
/// is non-null it receives dL/d(raw) for each scale, shaped like `heads`.
template <class T>
T detection_loss(std::span<const nn::Tensor<T>> heads, std::span<const BoundingBox> truths,
                 const DetectorConfig& cfg, std::vector<nn::Tensor<T>>* grads);

double loss(const Grids& grids, std::span<const BoundingBox> truths, const DetectorConfig& cfg);

template <class T>
nn::Tensor<T> image_to_tensor(const ImageBuffer& image) {
  nn::Tensor<T> t(3, image.height(), image.width());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = static_cast<T>(image.at(x, y, c)) / T(255);
  return t;
}

/// Strided convolutional backbone with taps at strides 8/16/32 and a 1x1
/// prediction head per tap.
template <class T>
class DetectorNet {
 public:
  static constexpr int kBackboneLayers = 8;
  // Backbone layer index whose activation is exposed at each scale.
  static constexpr std::array<int, kNumScales> kTapLayer{3, 5, 7};

  explicit DetectorNet(const DetectorConfig& cfg);

  void init(uint64_t seed);
  void zero_parameters();

  /// acts[0] is the input; acts[i+1] is the activation after layer i.
  struct Trace {
    std::vector<nn::Tensor<T>> acts;
    const nn::Tensor<T>& tap(int scale) const { return acts[kTapLayer[scale] + 1]; }
  };

  Trace backbone(const nn::Tensor<T>& input) const;
  nn::Tensor<T> head(int scale, const nn::Tensor<T>& latent) const;
  std::array<nn::Tensor<T>, kNumScales> heads(const Trace& trace) const;

  /// Returns dL/d(latent) and accumulates head parameter gradients.
  nn::Tensor<T> head_backward(int scale, const nn::Tensor<T>& latent, const nn::Tensor<T>& grad);
  /// Propagates gradients injected at the taps through the backbone.
  void backbone_backward(const Trace& trace, std::array<nn::Tensor<T>, kNumScales> grad_taps);

  /// Full per-sample forward+backward of the detection loss; returns the loss.
  T loss_and_backward(const nn::Tensor<T>& input, std::span<const BoundingBox> truths);

  std::vector<nn::Param<T>*> params();
  std::vector<const nn::Param<T>*> params() const;
  const DetectorConfig& config() const noexcept { return cfg_; }

 private:
  DetectorConfig cfg_;
  std::vector<nn::Conv2d<T>> layers_;
  std::vector<nn::Conv2d<T>> heads_;
};

/// Raw grids plus pre-head latent features for one image.
struct DetectorOutput {
  Grids grids;
  std::array<nn::Tensor<float>, kNumScales> latents;
};

Grids grids_from_heads(const std::array<nn::Tensor<float>, kNumScales>& heads,
                       const DetectorConfig& cfg);

/// Runs the float detector on an input-size image. ConfigMismatch otherwise.
DetectorOutput forward(const DetectorNet<float>& net, const ImageBuffer& image);

/// decode + NMS on the forward output.
std::vector<Detection> predict(const DetectorNet<float>& net, const ImageBuffer& image);

void check_input_size(const ImageBuffer& image, int input_size);

extern template class DetectorNet<float>;
extern template class DetectorNet<double>;

}  // namespace salgate
