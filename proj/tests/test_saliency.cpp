#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "salgate/detector.hpp"
#include "salgate/saliency_model.hpp"

using namespace salgate;

namespace {

SaliencyNetConfig small(int size, int base = 4) {
  SaliencyNetConfig c;
  c.input_size = size;
  c.base_channels = base;
  return c;
}

SaliencyMap random_mask(std::mt19937_64& rng, int size) {
  std::vector<float> v(static_cast<size_t>(size) * size);
  for (float& x : v) x = (rng() & 1) ? 1.0f : 0.0f;
  return SaliencyMap(size, size, std::move(v));
}

}  // namespace

TEST(SaliencyConfig, Validation) {
  SaliencyNetConfig c;
  EXPECT_NO_THROW(c.validate());
  c.input_size = 100;  // not divisible by 8
  EXPECT_THROW(c.validate(), Error);
  c.input_size = 96;
  c.depth = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(SaliencyForward, OutputResolutionEqualsInput) {
  for (int size : {128, 256, 512}) {
    SaliencyNet<float> net(small(size, 2));
    net.init(1);
    std::mt19937_64 rng(size);
    const auto m = saliency_forward(net, oracle::random_image(rng, size, size));
    EXPECT_EQ(m.width(), size);
    EXPECT_EQ(m.height(), size);
  }
}

TEST(SaliencyForward, ZeroWeightsGiveHalf) {
  SaliencyNet<float> net(small(64));
  net.init(2);
  net.zero_parameters();
  std::mt19937_64 rng(3);
  for (const auto& m : saliency_outputs(net, oracle::random_image(rng, 64, 64)))
    for (float v : m.values()) EXPECT_EQ(v, 0.5f);
}

TEST(SaliencyForward, EveryOutputStrictlyInsideUnitInterval) {
  SaliencyNet<float> net(small(64));
  net.init(4);
  // blow up the final layers so raw logits saturate
  for (auto* p : net.params())
    for (float& v : p->value.data) v *= 40.0f;
  std::mt19937_64 rng(5);
  const auto outs = saliency_outputs(net, oracle::random_image(rng, 64, 64));
  EXPECT_EQ(outs.size(), 3u);
  for (const auto& m : outs)
    for (float v : m.values()) {
      EXPECT_GT(v, 0.0f);
      EXPECT_LT(v, 1.0f);
    }
}

TEST(SaliencyForward, WrongSize) {
  SaliencyNet<float> net(small(64));
  try {
    saliency_forward(net, ImageBuffer(32, 32));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigMismatch);
  }
}

TEST(SaliencyLoss, ConstantHalfIsLn2) {
  std::mt19937_64 rng(1);
  const auto truth = random_mask(rng, 8);
  const std::vector<SaliencyMap> preds{SaliencyMap(8, 8, 0.5f), SaliencyMap(8, 8, 0.5f)};
  EXPECT_NEAR(saliency_loss(preds, truth), std::log(2.0), 1e-12);
}

TEST(SaliencyLoss, HandComputedTwoByTwo) {
  const SaliencyMap pred(2, 2, std::vector<float>{0.9f, 0.2f, 0.6f, 0.5f});
  const SaliencyMap truth(2, 2, std::vector<float>{1.0f, 0.0f, 0.0f, 1.0f});
  const double p0 = 0.9f, p1 = 0.2f, p2 = 0.6f, p3 = 0.5f;
  const double expect = (-std::log(p0) - std::log(1 - p1) - std::log(1 - p2) - std::log(p3)) / 4.0;
  EXPECT_NEAR(saliency_loss(std::vector<SaliencyMap>{pred}, truth), expect, 1e-12);
}

TEST(SaliencyLoss, PerfectPredictionLimit) {
  std::mt19937_64 rng(2);
  const auto truth = random_mask(rng, 6);
  double prev = 1e9;
  for (float eps : {1e-2f, 1e-4f, 1e-6f}) {
    std::vector<float> v(truth.values().begin(), truth.values().end());
    for (float& x : v) x = x > 0.5f ? 1.0f - eps : eps;
    const double l = saliency_loss(std::vector<SaliencyMap>{SaliencyMap(6, 6, v)}, truth);
    EXPECT_LT(l, prev);
    prev = l;
  }
  EXPECT_LT(prev, 1e-5);
}

TEST(SaliencyLoss, ShapeMismatch) {
  EXPECT_THROW(saliency_loss(std::vector<SaliencyMap>{SaliencyMap(4, 4, 0.5f)}, SaliencyMap(2, 2, 0.0f)), Error);
}

TEST(SaliencyLoss, LogitFormAgreesWithProbabilityForm) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 2.0);
  nn::Tensor<double> logits(1, 8, 8);
  for (double& v : logits.data) v = n(rng);
  const auto truth = random_mask(rng, 8);
  const double a = bce_with_logits_mean<double>(logits, truth, nullptr, 1.0);
  const double b = saliency_loss(std::vector<SaliencyMap>{logits_to_map<double>(logits)}, truth);
  EXPECT_NEAR(a, b, 1e-6);
}

TEST(SaliencyNet, ParameterGradientCheck) {
  SaliencyNetConfig c = small(32, 2);
  SaliencyNet<double> net(c);
  net.init(21);
  const auto params = net.params();
  EXPECT_LE(gradcheck::count_parameters(params), 5000u);
  std::mt19937_64 rng(4);
  nn::Tensor<double> input(3, 32, 32);
  for (double& v : input.data) v = std::uniform_real_distribution<double>(0, 1)(rng);
  const auto truth = random_mask(rng, 32);
  const auto r = gradcheck::check(
      params,
      [&] {
        const auto t = net.forward(input);
        double l = 0.0;
        for (int i = 0; i < c.num_outputs(); ++i) l += bce_with_logits_mean<double>(t.logits[i], truth, nullptr, 1.0);
        return l / c.num_outputs();
      },
      [&] {
        for (auto* p : params) p->grad.zero();
        net.loss_and_backward(input, truth);
      },
      50, 8);
  EXPECT_LT(r.max_rel_error, 1e-4);
}
