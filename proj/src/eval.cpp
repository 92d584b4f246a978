#include "salgate/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace salgate {

void EvalConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "eval iou_threshold must lie in (0,1)");
  }
}

namespace {

std::vector<size_t> rank_by_score(std::span<const Detection> dets) {
  std::vector<size_t> order(dets.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace

std::vector<MatchRecord> match_detections(std::span<const Detection> dets,
                                          std::span<const BoundingBox> truths, double iou_threshold) {
  std::vector<MatchRecord> out;
  out.reserve(dets.size());
  for (const auto& d : dets) out.push_back({d, std::nullopt, false});
  std::vector<bool> used(truths.size(), false);
  for (size_t i : rank_by_score(dets)) {
    int best = -1;
    double best_iou = -1.0;
    for (size_t t = 0; t < truths.size(); ++t) {
      if (used[t]) continue;
      const double v = iou(dets[i].box, truths[t]);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(t);
      }
    }
    if (best >= 0 && best_iou >= iou_threshold) {
      used[static_cast<size_t>(best)] = true;
      out[i].truth_index = best;
      out[i].is_tp = true;
    }
  }
  return out;
}

double average_precision(const std::vector<bool>& labels, int total_truths, const EvalConfig& cfg) {
  if (total_truths < 0) throw Error(ErrorKind::InvalidArgument, "total_truths must be >= 0");
  if (total_truths == 0) return labels.empty() ? 1.0 : 0.0;
  if (labels.empty()) return 0.0;
  std::vector<double> recall(labels.size()), precision(labels.size());
  std::vector<int> tp_at(labels.size());
  int tp = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    tp += labels[i] ? 1 : 0;
    tp_at[i] = tp;
    recall[i] = static_cast<double>(tp) / total_truths;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  if (cfg.interpolation == Interpolation::ElevenPoint) {
    double sum = 0.0;
    for (int k = 0; k <= 10; ++k) {
      const double t = k / 10.0;
      double best = 0.0;
      for (size_t i = 0; i < labels.size(); ++i) {
        if (recall[i] >= t - 1e-12) best = std::max(best, precision[i]);
      }
      sum += best;
    }
    return sum / 11.0;
  }
  // Recall rises by 1/total_truths exactly at TP ranks, so AP is the mean envelope
  // precision over TP ranks; extended precision makes rational fixtures round exactly.
  std::vector<long double> envelope(labels.size());
  long double best = 0.0L;
  for (size_t i = labels.size(); i-- > 0;) {
    best = std::max(best, static_cast<long double>(tp_at[i]) / static_cast<long double>(i + 1));
    envelope[i] = best;
  }
  long double sum = 0.0L;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) sum += envelope[i];
  }
  return std::clamp(static_cast<double>(sum / total_truths), 0.0, 1.0);
}

EvalReport evaluate(std::span<const ImagePredictions> predictions, std::span<const ImageTruth> truths,
                    const EvalConfig& cfg) {
  cfg.validate();
  if (truths.empty()) throw Error(ErrorKind::EmptyDataset, "evaluation needs at least one test image");
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < truths.size(); ++i) index.emplace(truths[i].image, i);
  std::vector<const ImagePredictions*> by_truth(truths.size(), nullptr);
  for (const auto& p : predictions) {
    const auto it = index.find(p.image);
    if (it == index.end()) throw Error(ErrorKind::UnknownImageId, p.image);
    by_truth[it->second] = &p;
  }

  EvalReport report;
  report.config = cfg;
  struct Ranked {
    double score;
    bool tp;
  };
  std::vector<Ranked> ranked;
  for (size_t i = 0; i < truths.size(); ++i) {
    const std::vector<Detection> none;
    const auto& dets = by_truth[i] ? by_truth[i]->detections : none;
    auto matches = match_detections(dets, truths[i].boxes, cfg.iou_threshold);
    for (const auto& m : matches) ranked.push_back({m.detection.score, m.is_tp});
    report.num_truths += static_cast<int>(truths[i].boxes.size());
    report.per_image.push_back({truths[i].image, std::move(matches)});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  report.num_detections = static_cast<int>(ranked.size());
  std::vector<bool> labels(ranked.size());
  int tp = 0;
  for (size_t i = 0; i < ranked.size(); ++i) {
    labels[i] = ranked[i].tp;
    tp += ranked[i].tp ? 1 : 0;
    const double recall = report.num_truths > 0 ? static_cast<double>(tp) / report.num_truths : 0.0;
    report.pr_points.emplace_back(recall, static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  report.ap = average_precision(labels, report.num_truths, cfg);
  return report;
}

nlohmann::json report_to_json(const EvalReport& r) {
  using nlohmann::json;
  json pr = json::array();
  for (const auto& [rec, prec] : r.pr_points) pr.push_back({rec, prec});
  json images = json::array();
  for (const auto& im : r.per_image) {
    json matches = json::array();
    for (const auto& m : im.matches) {
      const auto& b = m.detection.box;
      matches.push_back({{"box", {b.x_min(), b.y_min(), b.x_max(), b.y_max()}},
                         {"score", m.detection.score},
                         {"truth", m.truth_index ? json(*m.truth_index) : json(nullptr)},
                         {"tp", m.is_tp}});
    }
    images.push_back({{"image", im.image}, {"matches", matches}});
  }
  return json{{"ap", r.ap},
              {"map", r.map()},
              {"num_truths", r.num_truths},
              {"num_detections", r.num_detections},
              {"config",
               {{"iou_threshold", r.config.iou_threshold},
                {"interpolation", r.config.interpolation == Interpolation::AllPoint ? "all_point" : "eleven_point"}}},
              {"pr_points", pr},
              {"per_image", images}};
}

}  // namespace salgate
