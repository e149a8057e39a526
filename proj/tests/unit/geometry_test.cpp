#include <gtest/gtest.h>

#include <random>

#include "rapforge/geometry.hpp"
#include "support/oracles.hpp"

using namespace rapforge;
using rapforge::testing::random_int_box;
using rapforge::testing::raster_iou;

using Boxd = Box<double>;

TEST(Box, CornerRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50.0, 50.0), s(0.1, 40.0);
  for (int i = 0; i < 500; ++i) {
    const Boxd b{u(rng), u(rng), s(rng), s(rng)};
    const Boxd r = Boxd::from_corners(b.corners());
    EXPECT_NEAR(r.x, b.x, 1e-9);
    EXPECT_NEAR(r.y, b.y, 1e-9);
    EXPECT_NEAR(r.w, b.w, 1e-9);
    EXPECT_NEAR(r.h, b.h, 1e-9);
  }
}

TEST(Iou, Examples) {
  EXPECT_DOUBLE_EQ(iou(Boxd{1, 1, 2, 2}, Boxd{1, 1, 2, 2}), 1.0);
  EXPECT_DOUBLE_EQ(iou(Boxd{1, 1, 2, 2}, Boxd{10, 10, 2, 2}), 0.0);
  EXPECT_NEAR(iou(Boxd{1, 1, 2, 2}, Boxd{2, 1, 2, 2}), raster_iou(Boxd{1, 1, 2, 2}, Boxd{2, 1, 2, 2}), 1e-12);
  EXPECT_NEAR(iou(Boxd{1, 1, 2, 2}, Boxd{2, 1, 2, 2}), 1.0 / 3.0, 1e-12);
}

TEST(Iou, TouchingEdgesHaveZeroOverlap) { EXPECT_EQ(iou(Boxd{1, 1, 2, 2}, Boxd{3, 1, 2, 2}), 0.0); }

TEST(Iou, RejectsDegenerateBoxes) {
  EXPECT_THROW(iou(Boxd{0, 0, 0, 1}, Boxd{0, 0, 1, 1}), DomainError);
  EXPECT_THROW(iou(Boxd{0, 0, 1, 1}, Boxd{0, 0, 1, -2}), DomainError);
}

TEST(Iou, SymmetricBoundedAndMatchesRaster) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const Boxd a = random_int_box(rng, 30, 12), b = random_int_box(rng, 30, 12);
    const double v = iou(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_DOUBLE_EQ(v, iou(b, a));
    EXPECT_NEAR(v, raster_iou(a, b), 1e-12);
  }
}

TEST(Iou, ScaleInvariant) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Boxd a = random_int_box(rng, 30, 12), b = random_int_box(rng, 30, 12);
    const Boxd a3{3 * a.x, 3 * a.y, 3 * a.w, 3 * a.h}, b3{3 * b.x, 3 * b.y, 3 * b.w, 3 * b.h};
    EXPECT_NEAR(iou(a, b), iou(a3, b3), 1e-12);
  }
}

TEST(MaxIou, Examples) {
  const std::vector<Boxd> gts{{20, 20, 2, 2}, {1, 1, 2, 2}};
  EXPECT_DOUBLE_EQ(max_iou<double>(Boxd{1, 1, 2, 2}, gts), 1.0);
  EXPECT_NEAR(max_iou<double>(Boxd{2, 1, 2, 2}, gts), raster_iou(Boxd{2, 1, 2, 2}, gts[1]), 1e-12);
  EXPECT_DOUBLE_EQ(max_iou<double>(Boxd{50, 50, 2, 2}, gts), 0.0);
  EXPECT_THROW(max_iou<double>(Boxd{1, 1, 2, 2}, std::vector<Boxd>{}), DomainError);
}

TEST(BorderlineFlag, Examples) {
  EXPECT_EQ(borderline_flag(0.5, 0.6, 0.3), 1);
  EXPECT_EQ(borderline_flag(0.6, 0.6, 0.3), 0);
  EXPECT_EQ(borderline_flag(0.3, 0.6, 0.3), 1);
  EXPECT_EQ(borderline_flag(0.29999, 0.6, 0.3), 0);
  EXPECT_THROW(borderline_flag(0.5, 0.3, 0.3), ConfigError);
  EXPECT_THROW(borderline_flag(0.5, 0.2, 0.3), ConfigError);
}

TEST(Classify, ExactMatch) {
  const GroundTruthSet g{{{5, 5, 4, 4}}, "img"};
  const std::vector<Detection<double>> d{{0.9, {5, 5, 4, 4}}};
  const auto m = classify(d, g, 0.5);
  ASSERT_EQ(m.tp.size(), 1u);
  EXPECT_EQ(m.tp[0], (std::pair<std::size_t, std::size_t>{0, 0}));
  EXPECT_TRUE(m.fp.empty());
  EXPECT_TRUE(m.fn.empty());
}

TEST(Classify, NoDetectionsMeansEveryGtIsMissed) {
  const GroundTruthSet g{{{5, 5, 4, 4}}, "img"};
  const auto m = classify({}, g, 0.5);
  EXPECT_EQ(m.fn, std::vector<std::size_t>{0});
}

TEST(Classify, TwoDetectionsOneAboveThreshold) {
  // widths chosen so the overlaps are 0.6 and 0.4 against a 10x10 GT sharing its left edge
  const GroundTruthSet g{{{5, 5, 10, 10}}, "img"};
  const std::vector<Detection<double>> d{{0.9, {3, 5, 6, 10}}, {0.8, {2, 5, 4, 10}}};
  const auto m = classify(d, g, 0.5);
  EXPECT_NEAR(m.per_detection_max_iou[0], 0.6, 1e-12);
  EXPECT_NEAR(m.per_detection_max_iou[1], 0.4, 1e-12);
  EXPECT_EQ(m.tp.size(), 1u);
  EXPECT_EQ(m.fp, std::vector<std::size_t>{1});
  EXPECT_TRUE(m.fn.empty());
}

TEST(Classify, OneGtMayCertifySeveralDetections) {
  const GroundTruthSet g{{{5, 5, 10, 10}}, "img"};
  const std::vector<Detection<double>> d{{0.9, {5, 5, 10, 10}}, {0.8, {5.5, 5, 10, 10}}};
  const auto m = classify(d, g, 0.5);
  EXPECT_EQ(m.tp.size(), 2u);
  EXPECT_EQ(m.matched_gt_count(g.size()), 1u);
}

TEST(Classify, PartitionsDetectionsAndGts) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    GroundTruthSet g;
    std::vector<Detection<double>> d;
    const int ng = 1 + trial % 3, nd = trial % 5;
    for (int k = 0; k < ng; ++k) g.boxes.push_back(random_int_box(rng, 20, 10));
    for (int j = 0; j < nd; ++j) d.push_back({0.5, random_int_box(rng, 20, 10)});
    const auto m = classify(d, g, 0.5);
    std::vector<int> seen(d.size(), 0);
    for (auto [j, k] : m.tp) {
      ++seen[j];
      EXPECT_GE(iou(d[j].box, g.boxes[k]), 0.5);
    }
    for (auto j : m.fp) ++seen[j];
    for (int s : seen) EXPECT_EQ(s, 1);
    for (std::size_t k = 0; k < g.size(); ++k) {
      bool reached = false;
      for (const auto& det : d) reached |= iou(det.box, g.boxes[k]) >= 0.5;
      EXPECT_EQ(reached, std::find(m.fn.begin(), m.fn.end(), k) == m.fn.end());
    }
  }
}

TEST(Classify, RejectsThresholdOutsideUnitInterval) {
  const GroundTruthSet g{{{5, 5, 4, 4}}, "img"};
  EXPECT_THROW(classify({}, g, 0.0), ConfigError);
  EXPECT_THROW(classify({}, g, 1.0), ConfigError);
}
