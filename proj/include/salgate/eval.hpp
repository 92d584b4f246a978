#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "salgate/core.hpp"

namespace salgate {

enum class Interpolation { AllPoint, ElevenPoint };

/// PASCAL-style single-class evaluation; IoU 0.5 and all-point interpolation by default.
struct EvalConfig {
  double iou_threshold = 0.5;
  Interpolation interpolation = Interpolation::AllPoint;

  void validate() const;
};

struct MatchRecord {
  Detection detection;
  std::optional<int> truth_index;
  bool is_tp = false;
};

/// Labels each detection (returned in input order). Detections are visited by
/// descending score, ties by input order; each takes the unmatched truth with
/// the highest IoU (lowest index on ties) and is a TP iff that IoU >= threshold.
std::vector<MatchRecord> match_detections(std::span<const Detection> dets,
                                          std::span<const BoundingBox> truths, double iou_threshold);

/// `labels` are TP flags of all detections ranked by descending score.
double average_precision(const std::vector<bool>& labels, int total_truths, const EvalConfig& cfg = {});

struct ImagePredictions {
  std::string image;
  std::vector<Detection> detections;
};

struct ImageTruth {
  std::string image;
  std::vector<BoundingBox> boxes;
};

struct ImageMatches {
  std::string image;
  std::vector<MatchRecord> matches;
};

struct EvalReport {
  double ap = 0.0;  // single class, so mAP == AP
  std::vector<std::pair<double, double>> pr_points;  // (recall, precision) per ranked detection
  std::vector<ImageMatches> per_image;
  int num_truths = 0;
  int num_detections = 0;
  EvalConfig config;

  double map() const noexcept { return ap; }
};

/// Evaluates predictions against truth; images without a prediction entry have
/// no detections. UnknownImageId for predictions of images absent from `truths`;
/// EmptyDataset when `truths` is empty.
EvalReport evaluate(std::span<const ImagePredictions> predictions, std::span<const ImageTruth> truths,
                    const EvalConfig& cfg = {});

nlohmann::json report_to_json(const EvalReport& report);

}  // namespace salgate
