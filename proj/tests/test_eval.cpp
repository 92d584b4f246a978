#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "salgate/eval.hpp"
#include "salgate/saliency_gate.hpp"

using namespace salgate;

namespace {

std::vector<bool> random_labels(std::mt19937_64& rng, size_t n) {
  std::vector<bool> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = (rng() % 3) == 0;
  return v;
}

int count_tp(const std::vector<bool>& v) { return static_cast<int>(std::count(v.begin(), v.end(), true)); }

// Global ranking by score (stable across the per-image concatenation), labels
// from the oracle matcher.
double oracle_dataset_ap(const std::vector<ImagePredictions>& preds, const std::vector<ImageTruth>& truths,
                         std::vector<std::pair<double, double>>* pr = nullptr) {
  std::vector<std::pair<double, bool>> all;
  int total = 0;
  for (const auto& t : truths) {
    total += static_cast<int>(t.boxes.size());
    for (const auto& p : preds) {
      if (p.image != t.image) continue;
      const auto m = oracle::match(p.detections, t.boxes, 0.5);
      for (size_t i = 0; i < m.size(); ++i) all.emplace_back(p.detections[i].score, m[i].tp);
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<bool> labels;
  int tp = 0;
  for (size_t i = 0; i < all.size(); ++i) {
    labels.push_back(all[i].second);
    tp += all[i].second;
    if (pr) pr->emplace_back(static_cast<double>(tp) / total, static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  return oracle::average_precision(labels, total);
}

}  // namespace

TEST(Match, SingleExactDetection) {
  const BoundingBox b(1, 2, 5, 7);
  const std::vector<Detection> d{Detection(b, 0.9)};
  const std::vector<BoundingBox> t{b};
  const auto m = match_detections(d, t, 0.5);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_TRUE(m[0].is_tp);
  EXPECT_EQ(m[0].truth_index, 0);
}

TEST(Match, DuplicateDetectionIsFalsePositive) {
  const BoundingBox b(1, 2, 5, 7);
  const std::vector<Detection> d{Detection(b, 0.9), Detection(b, 0.9)};
  const std::vector<BoundingBox> t{b};
  const auto m = match_detections(d, t, 0.5);
  EXPECT_TRUE(m[0].is_tp);
  EXPECT_FALSE(m[1].is_tp);
  EXPECT_FALSE(m[1].truth_index.has_value());
}

TEST(Match, AgreesWithOracle) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 400; ++t) {
    std::vector<Detection> d;
    std::vector<BoundingBox> truths;
    // grid boxes make exact IoU ties and threshold hits common
    for (int i = 0; i < 4; ++i) truths.push_back(oracle::random_grid_box(rng, 8, 5));
    for (int i = 0; i < 8; ++i) d.emplace_back(oracle::random_grid_box(rng, 8, 5), oracle::random_score(rng, true));
    const auto got = match_detections(d, truths, 0.5);
    const auto want = oracle::match(d, truths, 0.5);
    ASSERT_EQ(got.size(), want.size());
    for (size_t i = 0; i < d.size(); ++i) {
      EXPECT_EQ(got[i].is_tp, want[i].tp) << "fixture " << t << " det " << i;
      if (want[i].tp) EXPECT_EQ(got[i].truth_index, want[i].truth);
    }
  }
}

TEST(Match, EachTruthMatchedAtMostOnce) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 100; ++t) {
    std::vector<Detection> d;
    std::vector<BoundingBox> truths;
    for (int i = 0; i < 3; ++i) truths.push_back(oracle::random_grid_box(rng, 6, 4));
    for (int i = 0; i < 10; ++i) d.emplace_back(oracle::random_grid_box(rng, 6, 4), oracle::random_score(rng, true));
    std::vector<int> hits(truths.size(), 0);
    for (const auto& m : match_detections(d, truths, 0.5))
      if (m.is_tp) ++hits[static_cast<size_t>(*m.truth_index)];
    for (int h : hits) EXPECT_LE(h, 1);
  }
}

TEST(AveragePrecision, KnownValues) {
  EXPECT_EQ(average_precision({true, false, true}, 2), 5.0 / 6.0);
  EXPECT_EQ(average_precision({true, true, true}, 3), 1.0);
  EXPECT_EQ(average_precision({}, 4), 0.0);
  EXPECT_EQ(average_precision({}, 0), 1.0);
  EXPECT_EQ(average_precision({false}, 0), 0.0);
  EXPECT_EQ(average_precision({false, false}, 3), 0.0);
}

TEST(AveragePrecision, ElevenPoint) {
  EvalConfig c;
  c.interpolation = Interpolation::ElevenPoint;
  EXPECT_NEAR(average_precision({true, false, true}, 2, c), 28.0 / 33.0, 1e-12);
  EXPECT_NEAR(average_precision({true, true}, 2, c), 1.0, 1e-12);
}

TEST(AveragePrecision, AgreesWithOracle) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 400; ++t) {
    const auto labels = random_labels(rng, rng() % 25);
    const int total = count_tp(labels) + static_cast<int>(rng() % 4);
    EXPECT_NEAR(average_precision(labels, total), oracle::average_precision(labels, total), 1e-12);
  }
}

TEST(AveragePrecision, RemovingFalsePositiveNeverLowers) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 300; ++t) {
    auto labels = random_labels(rng, 1 + rng() % 20);
    const int total = count_tp(labels) + static_cast<int>(rng() % 3);
    const double before = oracle::average_precision(labels, total);
    std::vector<size_t> fps;
    for (size_t i = 0; i < labels.size(); ++i)
      if (!labels[i]) fps.push_back(i);
    if (fps.empty()) continue;
    labels.erase(labels.begin() + static_cast<long>(fps[rng() % fps.size()]));
    EXPECT_GE(average_precision(labels, total), before - 1e-12);
  }
}

TEST(AveragePrecision, RemovingTruePositiveNeverRaises) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 300; ++t) {
    auto labels = random_labels(rng, 1 + rng() % 20);
    const int total = count_tp(labels) + static_cast<int>(rng() % 3);
    const double before = oracle::average_precision(labels, total);
    std::vector<size_t> tps;
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i]) tps.push_back(i);
    if (tps.empty()) continue;
    labels.erase(labels.begin() + static_cast<long>(tps[rng() % tps.size()]));
    EXPECT_LE(average_precision(labels, total), before + 1e-12);
  }
}

TEST(Evaluate, PerfectPredictions) {
  std::mt19937_64 rng(16);
  std::vector<ImageTruth> truths;
  std::vector<ImagePredictions> preds;
  for (int i = 0; i < 5; ++i) {
    ImageTruth t{"img" + std::to_string(i), {}};
    ImagePredictions p{t.image, {}};
    for (int k = 0; k < 3; ++k) {
      t.boxes.push_back(oracle::random_box(rng, 100, 5, 30));
      p.detections.emplace_back(t.boxes.back(), 0.5 + 0.1 * k);
    }
    truths.push_back(t);
    preds.push_back(p);
  }
  const auto r = evaluate(preds, truths);
  EXPECT_EQ(r.ap, 1.0);
  EXPECT_EQ(r.map(), r.ap);
  EXPECT_EQ(r.num_truths, 15);
}

TEST(Evaluate, TwentyDetectionFixture) {
  std::vector<ImageTruth> truths{
      {"a", {BoundingBox(10, 10, 30, 30), BoundingBox(50, 50, 80, 70), BoundingBox(5, 60, 25, 90)}},
      {"b", {BoundingBox(0, 0, 40, 20), BoundingBox(60, 10, 90, 40)}},
      {"c", {BoundingBox(20, 20, 60, 60), BoundingBox(70, 70, 95, 95), BoundingBox(0, 70, 15, 99)}},
  };
  std::vector<ImagePredictions> preds{
      {"a",
       {Detection(BoundingBox(11, 9, 31, 29), 0.95), Detection(BoundingBox(12, 12, 28, 30), 0.90),
        Detection(BoundingBox(52, 48, 81, 72), 0.60), Detection(BoundingBox(40, 0, 60, 20), 0.55),
        Detection(BoundingBox(5, 55, 25, 85), 0.35), Detection(BoundingBox(70, 80, 90, 99), 0.20),
        Detection(BoundingBox(50, 50, 65, 60), 0.10)}},
      {"b",
       {Detection(BoundingBox(1, 1, 41, 19), 0.88), Detection(BoundingBox(58, 12, 88, 42), 0.70),
        Detection(BoundingBox(60, 10, 75, 25), 0.65), Detection(BoundingBox(30, 30, 50, 50), 0.45),
        Detection(BoundingBox(0, 0, 20, 20), 0.30)}},
      {"c",
       {Detection(BoundingBox(22, 18, 58, 62), 0.92), Detection(BoundingBox(72, 70, 96, 94), 0.80),
        Detection(BoundingBox(0, 0, 10, 10), 0.75), Detection(BoundingBox(20, 20, 40, 40), 0.60),
        Detection(BoundingBox(1, 72, 14, 98), 0.50), Detection(BoundingBox(80, 0, 99, 20), 0.40),
        Detection(BoundingBox(69, 69, 96, 96), 0.25), Detection(BoundingBox(30, 30, 35, 35), 0.05)}},
  };
  std::vector<std::pair<double, double>> pr;
  const double want = oracle_dataset_ap(preds, truths, &pr);
  const auto r = evaluate(preds, truths);
  EXPECT_EQ(r.num_detections, 20);
  EXPECT_NEAR(r.ap, want, 1e-12);
  ASSERT_EQ(r.pr_points.size(), pr.size());
  for (size_t i = 0; i < pr.size(); ++i) {
    EXPECT_NEAR(r.pr_points[i].first, pr[i].first, 1e-12);
    EXPECT_NEAR(r.pr_points[i].second, pr[i].second, 1e-12);
  }
  EXPECT_GT(r.ap, 0.0);
  EXPECT_LT(r.ap, 1.0);
}

TEST(Evaluate, RandomDatasetsAgreeWithOracle) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    std::vector<ImageTruth> truths;
    std::vector<ImagePredictions> preds;
    for (int i = 0; i < 3; ++i) {
      ImageTruth tr{std::to_string(i), {}};
      ImagePredictions p{tr.image, {}};
      for (int k = 0; k < 3; ++k) tr.boxes.push_back(oracle::random_grid_box(rng, 8, 5));
      for (int k = 0; k < 5; ++k) p.detections.emplace_back(oracle::random_grid_box(rng, 8, 5), oracle::random_score(rng, true));
      truths.push_back(tr);
      preds.push_back(p);
    }
    std::vector<std::pair<double, double>> pr;
    const double want = oracle_dataset_ap(preds, truths, &pr);
    const auto r = evaluate(preds, truths);
    EXPECT_NEAR(r.ap, want, 1e-12);
    for (size_t i = 1; i < r.pr_points.size(); ++i) EXPECT_GE(r.pr_points[i].first, r.pr_points[i - 1].first);
    for (const auto& [rec, prec] : r.pr_points) {
      EXPECT_GE(prec, 0.0);
      EXPECT_LE(prec, 1.0);
    }
  }
}

TEST(Evaluate, InvariantUnderMonotonicScoreRescaling) {
  std::mt19937_64 rng(18);
  for (int t = 0; t < 100; ++t) {
    std::vector<ImageTruth> truths;
    std::vector<ImagePredictions> preds, squashed;
    for (int i = 0; i < 3; ++i) {
      ImageTruth tr{std::to_string(i), {}};
      ImagePredictions p{tr.image, {}}, q{tr.image, {}};
      for (int k = 0; k < 3; ++k) tr.boxes.push_back(oracle::random_grid_box(rng, 8, 5));
      for (int k = 0; k < 6; ++k) {
        const auto b = oracle::random_grid_box(rng, 8, 5);
        const double s = oracle::random_score(rng, false);
        p.detections.emplace_back(b, s);
        q.detections.emplace_back(b, 0.1 + 0.2 * s * s * s);
      }
      truths.push_back(tr);
      preds.push_back(p);
      squashed.push_back(q);
    }
    EXPECT_EQ(evaluate(preds, truths).ap, evaluate(squashed, truths).ap);
  }
}

TEST(Evaluate, GatingSalientFalsePositivesNeverHurts) {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 100; ++t) {
    // left half non-salient holds truths and their TPs; right half salient holds injected FPs
    std::vector<float> mv(64 * 32, 0.0f);
    for (int y = 0; y < 32; ++y)
      for (int x = 32; x < 64; ++x) mv[static_cast<size_t>(y) * 64 + x] = 1.0f;
    const SaliencyMap map(64, 32, mv);
    ImageTruth tr{"x", {}};
    ImagePredictions p{"x", {}};
    for (int k = 0; k < 3; ++k) {
      const auto b = oracle::random_box(rng, 30, 4, 12);
      tr.boxes.push_back(b);
      if (rng() % 4) p.detections.emplace_back(b, oracle::random_score(rng, false));
    }
    for (int k = 0; k < 4; ++k) {
      const auto b = oracle::random_box(rng, 30, 4, 12);
      p.detections.emplace_back(BoundingBox(b.x_min() + 33, b.y_min(), b.x_max() + 33, b.y_max()),
                                oracle::random_score(rng, false));
    }
    const std::vector<ImageTruth> truths{tr};
    const std::vector<ImagePredictions> raw{p};
    const std::vector<ImagePredictions> gated{{"x", kept_detections(gate(p.detections, map))}};
    EXPECT_GE(evaluate(gated, truths).ap, evaluate(raw, truths).ap);
  }
}

TEST(Evaluate, Errors) {
  const std::vector<ImagePredictions> none;
  try {
    evaluate(none, std::vector<ImageTruth>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyDataset);
  }
  const std::vector<ImageTruth> truths{{"a", {BoundingBox(0, 0, 1, 1)}}};
  const std::vector<ImagePredictions> stray{{"b", {}}};
  try {
    evaluate(stray, truths);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownImageId);
  }
}

TEST(Evaluate, MissingPredictionEntryMeansNoDetections) {
  const std::vector<ImageTruth> truths{{"a", {BoundingBox(0, 0, 4, 4)}}, {"b", {BoundingBox(0, 0, 4, 4)}}};
  const std::vector<ImagePredictions> preds{{"a", {Detection(BoundingBox(0, 0, 4, 4), 0.9)}}};
  EXPECT_EQ(evaluate(preds, truths).ap, 0.5);
}

TEST(EvalReport, Json) {
  const std::vector<ImageTruth> truths{{"a", {BoundingBox(0, 0, 4, 4), BoundingBox(10, 10, 14, 14)}}};
  const std::vector<ImagePredictions> preds{
      {"a", {Detection(BoundingBox(0, 0, 4, 4), 0.9), Detection(BoundingBox(5, 5, 6, 6), 0.8),
             Detection(BoundingBox(10, 10, 14, 14), 0.7)}}};
  const auto j = report_to_json(evaluate(preds, truths));
  EXPECT_DOUBLE_EQ(j["ap"].get<double>(), 5.0 / 6.0);
  EXPECT_EQ(j["pr_points"].size(), 3u);
  EXPECT_EQ(j["config"]["iou_threshold"], 0.5);
  EXPECT_EQ(j["config"]["interpolation"], "all_point");
  EXPECT_EQ(j["per_image"][0]["matches"][1]["truth"], nullptr);
}

TEST(EvalConfig, Validation) {
  EvalConfig c;
  c.iou_threshold = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c.iou_threshold = 1.0;
  EXPECT_THROW(c.validate(), Error);
}
