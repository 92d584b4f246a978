#include "salgate/saliency_gate.hpp"

#include <string>

namespace salgate {

void GateConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "gate threshold must lie in [0,1]");
  }
}

std::vector<GateDecision> gate(std::span<const Detection> detections, const SaliencyMap& map,
                               int image_width, int image_height, const GateConfig& cfg) {
  cfg.validate();
  if (map.width() != image_width || map.height() != image_height) {
    throw Error(ErrorKind::DimensionMismatch,
                "saliency map is " + std::to_string(map.width()) + "x" +
                    std::to_string(map.height()) + " but image is " +
                    std::to_string(image_width) + "x" + std::to_string(image_height));
  }
  std::vector<GateDecision> out;
  out.reserve(detections.size());
  for (const Detection& d : detections) {
    if (covered_pixels(d.box, map.width(), map.height()).empty()) {
      out.push_back({d, 0.0, true, true});
      continue;
    }
    const double s = mean_saliency(map, d.box);
    const bool reject = cfg.reject_on_equal ? s >= cfg.threshold : s > cfg.threshold;
    out.push_back({d, s, !reject, false});
  }
  return out;
}

std::vector<GateDecision> gate(std::span<const Detection> detections, const SaliencyMap& map,
                               const GateConfig& cfg) {
  return gate(detections, map, map.width(), map.height(), cfg);
}

std::vector<Detection> kept_detections(std::span<const GateDecision> decisions) {
  std::vector<Detection> kept;
  for (const auto& d : decisions) {
    if (d.kept) kept.push_back(d.detection);
  }
  return kept;
}

}  // namespace salgate
