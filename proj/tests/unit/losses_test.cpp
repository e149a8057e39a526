#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rapforge/detector.hpp"
#include "rapforge/losses.hpp"
#include "support/oracles.hpp"

using namespace rapforge;
using rapforge::testing::blob_image;

namespace {

const GroundTruthSet kGt{{{5, 5, 10, 10}}, "img"};
// a = 0.5 against kGt: shares the left edge, half the width
const Box<double> kHalf{2.5, 5, 5, 10};

double sum_sq(const Imaged& g) {
  double s = 0.0;
  for (int c = 0; c < g.channels(); ++c) s += g.channel(c).square().sum();
  return s;
}

// One gradient step x <- clip(x - eta * g) on every channel.
Imaged step(const Imaged& img, const Imaged& g, double eta) {
  Imaged out = img;
  for (int c = 0; c < img.channels(); ++c) out.channel(c) = (img.channel(c) - eta * g.channel(c)).max(0.0).min(1.0);
  return out;
}

}  // namespace

TEST(BfpLoss, NoDetections) {
  const auto v = bfp_loss(kGt, {}, LossConfig{});
  EXPECT_EQ(v.value, 0.0);
  EXPECT_EQ(v.active_count, 0u);
}

TEST(BfpLoss, SingleGatedDetection) {
  const std::vector<Detection<double>> d{{0.5, kHalf}};
  const auto v = bfp_loss(kGt, d, LossConfig{});
  EXPECT_NEAR(v.value, std::log(2.0), 1e-12);
  EXPECT_NEAR(v.value, 0.6931, 1e-4);
  EXPECT_EQ(v.active_count, 1u);
  EXPECT_NEAR(v.gradient[0], 2.0, 1e-12);
}

TEST(BfpLoss, OutsideBandContributesNothing) {
  const std::vector<Detection<double>> d{{0.99, {5.5, 5, 10, 10}}, {0.7, {1, 5, 2, 10}}};
  const auto v = bfp_loss(kGt, d, LossConfig{});
  EXPECT_EQ(v.value, 0.0);
  EXPECT_EQ(v.active_count, 0u);
  EXPECT_EQ(v.gradient, std::vector<double>(2, 0.0));
}

TEST(BfpLoss, SaturatedConfidenceStaysFinite) {
  const std::vector<Detection<double>> d{{1.0, kHalf}};
  const auto v = bfp_loss(kGt, d, LossConfig{});
  EXPECT_TRUE(std::isfinite(v.value));
  EXPECT_NEAR(v.value, -std::log(kConfidenceEpsilon), 1e-6);
}

TEST(BfpLoss, NonNegativeAndMonotoneInConfidence) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 0.999);
  for (int i = 0; i < 200; ++i) {
    const double p = u(rng), q = u(rng);
    const std::vector<Detection<double>> a{{std::min(p, q), kHalf}}, b{{std::max(p, q), kHalf}};
    const double la = bfp_loss(kGt, a, {}).value, lb = bfp_loss(kGt, b, {}).value;
    EXPECT_GE(la, 0.0);
    EXPECT_LE(la, lb);
  }
}

TEST(BfpLoss, RejectsBadThresholds) {
  LossConfig cfg;
  cfg.theta_t = 0.4;  // below theta_d
  EXPECT_THROW(bfp_loss(kGt, {}, cfg), ConfigError);
  cfg = {};
  cfg.theta_f = 0.55;
  EXPECT_THROW(bfp_loss(kGt, {}, cfg), ConfigError);
}

TEST(LossVariant, ParseRoundTrip) {
  for (auto v : {LossVariant::kBfp, LossVariant::kDpatch, LossVariant::kMaxLoss})
    EXPECT_EQ(parse_loss_variant(to_string(v)), v);
  EXPECT_THROW(parse_loss_variant("focal"), ConfigError);
}

class ToyLossTest : public ::testing::Test {
 protected:
  ToyDetector det;
  Imaged face = blob_image(64, 64, 16, {{20, 24}});
};

TEST_F(ToyLossTest, TrainingLossIsPositiveForEmptyTarget) {
  EXPECT_GT(det.training_loss(face, {}).value, 0.0);
}

TEST_F(ToyLossTest, TrainingLossLowerForMatchingTarget) {
  const auto found = det.detect(face);
  ASSERT_EQ(found.size(), 1u);
  const Box<double> right[] = {found[0].box};
  const Box<double> wrong[] = {{50, 8, 16, 16}};
  EXPECT_LT(det.training_loss(face, right).value, det.training_loss(face, wrong).value);
}

TEST_F(ToyLossTest, DpatchDescentStepLowersLoss) {
  const Box<double> cell{44, 12, 16, 16};
  const auto l0 = dpatch_loss(det, face, cell);
  ASSERT_GT(sum_sq(l0.gradient), 0.0);
  const auto l1 = dpatch_loss(det, step(face, l0.gradient, 1e-3), cell);
  EXPECT_LT(l1.value, l0.value);
}

TEST_F(ToyLossTest, DpatchDescentIsMonotoneOverTenSteps) {
  const Box<double> cell{44, 12, 16, 16};
  Imaged img = face;
  double prev = dpatch_loss(det, img, cell).value;
  for (int i = 0; i < 10; ++i) {
    const auto l = dpatch_loss(det, img, cell);
    img = step(img, l.gradient, 1e-3);
    const double now = dpatch_loss(det, img, cell).value;
    EXPECT_LT(now, prev) << "step " << i;
    prev = now;
  }
}

TEST_F(ToyLossTest, MaxLossDescentRaisesModelLoss) {
  GroundTruthSet gts{{}, "face"};
  for (const auto& d : det.detect(face)) gts.boxes.push_back(d.box);
  const auto l0 = maxloss_objective(det, face, gts);
  EXPECT_LE(l0.value, 0.0);
  const auto l1 = maxloss_objective(det, step(face, l0.gradient, 1e-3), gts);
  EXPECT_LT(l1.value, l0.value);
  EXPECT_GT(det.training_loss(step(face, l0.gradient, 1e-3), gts.boxes).value,
            det.training_loss(face, gts.boxes).value);
}

TEST(DetectorWithoutGradients, TrainingLossUnavailable) {
  struct Frozen final : Detector {
    DetectorHandle h{"frozen"};
    const DetectorHandle& handle() const override { return h; }
    std::vector<Detection<double>> detect(const Imaged&) const override { return {}; }
  } frozen;
  EXPECT_THROW(dpatch_loss(frozen, Imaged(8, 8, 1), {4, 4, 2, 2}), UnavailableError);
  EXPECT_THROW(frozen.detect_with_gradients(Imaged(8, 8, 1), DetectionTap::kFinal), UnavailableError);
}
