#pragma once

#include <span>
#include <vector>

#include "salgate/core.hpp"

namespace salgate {

/// Manual-threshold refinement: candidates on salient regions are rejected.
struct GateConfig {
  double threshold = 0.5;
  bool reject_on_equal = false;

  void validate() const;
};

struct GateDecision {
  Detection detection;
  double mean_saliency;
  bool kept;
  bool empty_region;  // box covered no pixel center; kept with mean_saliency = 0
};

/// One decision per detection, in input order. `image_width`/`image_height` are
/// the dimensions of the image the detections refer to and must match the map.
std::vector<GateDecision> gate(std::span<const Detection> detections, const SaliencyMap& map,
                               int image_width, int image_height, const GateConfig& cfg = {});

/// Convenience overload for callers whose map is already known to match the image.
std::vector<GateDecision> gate(std::span<const Detection> detections, const SaliencyMap& map,
                               const GateConfig& cfg = {});

std::vector<Detection> kept_detections(std::span<const GateDecision> decisions);

}  // namespace salgate
