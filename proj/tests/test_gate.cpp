#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "salgate/saliency_gate.hpp"

using namespace salgate;

namespace {

Detection det(double x0, double y0, double x1, double y1, double s = 0.9) {
  return Detection(BoundingBox(x0, y0, x1, y1), s);
}

// left half 0, right half 1
SaliencyMap split_map(int w, int h) {
  std::vector<float> v(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) v[static_cast<size_t>(y) * w + x] = x < w / 2 ? 0.0f : 1.0f;
  return SaliencyMap(w, h, std::move(v));
}

}  // namespace

TEST(Gate, ConstantMaps) {
  const std::vector<Detection> d{det(2, 2, 6, 6)};
  EXPECT_FALSE(gate(d, SaliencyMap(10, 10, 1.0f))[0].kept);
  EXPECT_TRUE(gate(d, SaliencyMap(10, 10, 0.0f))[0].kept);
}

TEST(Gate, ExactHalfIsKeptByDefault) {
  const std::vector<Detection> d{det(0, 0, 8, 4)};
  const auto m = split_map(8, 4);
  const auto out = gate(d, m);
  EXPECT_EQ(out[0].mean_saliency, 0.5);
  EXPECT_TRUE(out[0].kept);
  GateConfig strict;
  strict.reject_on_equal = true;
  EXPECT_FALSE(gate(d, m, strict)[0].kept);
}

TEST(Gate, DimensionMismatch) {
  const std::vector<Detection> d{det(0, 0, 2, 2)};
  try {
    gate(d, SaliencyMap(4, 4, 0.0f), 8, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(Gate, EmptyRegionIsKeptAndFlagged) {
  const std::vector<Detection> d{det(1.6, 1.6, 2.4, 2.4), det(20, 20, 30, 30)};
  for (const auto& g : gate(d, SaliencyMap(10, 10, 1.0f))) {
    EXPECT_TRUE(g.kept);
    EXPECT_TRUE(g.empty_region);
    EXPECT_EQ(g.mean_saliency, 0.0);
  }
}

TEST(Gate, ThresholdExtremes) {
  std::mt19937_64 rng(3);
  const auto m = oracle::random_map(rng, 16, 16);
  std::vector<Detection> d;
  for (int i = 0; i < 30; ++i) d.emplace_back(oracle::random_box(rng, 16, 1.0, 10), 0.5);
  GateConfig keep_all{1.0, false};
  GateConfig reject_all{0.0, true};
  for (const auto& g : gate(d, m, keep_all)) EXPECT_TRUE(g.kept);
  for (const auto& g : gate(d, m, reject_all)) EXPECT_EQ(g.kept, g.empty_region);
}

TEST(Gate, KeptMatchesRuleAgainstOracleMean) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 50; ++t) {
    const auto m = oracle::random_map(rng, 12, 9);
    std::vector<Detection> d;
    for (int i = 0; i < 10; ++i) d.emplace_back(oracle::random_box(rng, 12, 0.5, 8), oracle::random_score(rng, false));
    const double thr = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto out = gate(d, m, GateConfig{thr, false});
    ASSERT_EQ(out.size(), d.size());
    for (size_t i = 0; i < d.size(); ++i) {
      const auto mean = oracle::mean_saliency(m, d[i].box);
      if (!mean) {
        EXPECT_TRUE(out[i].kept);
        continue;
      }
      EXPECT_NEAR(out[i].mean_saliency, *mean, 1e-12);
      EXPECT_EQ(out[i].kept, !(out[i].mean_saliency > thr));
    }
  }
}

TEST(Gate, MonotoneInThreshold) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 30; ++t) {
    const auto m = oracle::random_map(rng, 20, 20);
    std::vector<Detection> d;
    for (int i = 0; i < 15; ++i) d.emplace_back(oracle::random_box(rng, 20, 1.0, 12), 0.5);
    std::vector<bool> prev(d.size(), false);
    for (int k = 0; k <= 20; ++k) {
      const auto out = gate(d, m, GateConfig{k / 20.0, false});
      for (size_t i = 0; i < d.size(); ++i) {
        EXPECT_TRUE(!prev[i] || out[i].kept) << "kept set shrank at threshold " << k / 20.0;
        prev[i] = out[i].kept;
      }
    }
  }
}

TEST(Gate, PermutationEquivariant) {
  std::mt19937_64 rng(29);
  const auto m = oracle::random_map(rng, 16, 16);
  std::vector<Detection> d;
  for (int i = 0; i < 12; ++i) d.emplace_back(oracle::random_box(rng, 16, 1.0, 8), 0.1 * (i % 10));
  std::vector<size_t> perm(d.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Detection> shuffled;
  for (size_t i : perm) shuffled.push_back(d[i]);
  const auto a = gate(d, m), b = gate(shuffled, m);
  for (size_t i = 0; i < perm.size(); ++i) {
    EXPECT_EQ(b[i].kept, a[perm[i]].kept);
    EXPECT_EQ(b[i].mean_saliency, a[perm[i]].mean_saliency);
  }
}

TEST(Gate, KeptDetectionsPreservesOrder) {
  std::vector<float> v(16, 0.0f);
  v[0] = 1.0f;
  const SaliencyMap m(4, 4, v);
  const std::vector<Detection> d{det(0, 0, 1, 1, 0.3), det(1, 1, 3, 3, 0.9), det(2, 2, 4, 4, 0.5)};
  const auto decisions = gate(d, m);
  const auto kept = kept_detections(decisions);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].score, 0.9);
  EXPECT_EQ(kept[1].score, 0.5);
}

TEST(GateConfig, Validation) {
  EXPECT_THROW((GateConfig{1.5, false}).validate(), Error);
  EXPECT_THROW((GateConfig{-0.1, false}).validate(), Error);
}
