#include <gtest/gtest.h>

#include "support.hpp"

using namespace irisseg;

TEST(Confusion, PerfectPredictionIsDiagonal) {
  Rng rng(1);
  const auto m = oracle::random_labels(rng, 6, 7, 4);
  const auto cm = confusion(m, m, 4);
  for (int t = 0; t < 4; ++t)
    for (int p = 0; p < 4; ++p) {
      const auto n = std::count(m.values().begin(), m.values().end(), t);
      EXPECT_EQ(cm.at(t, p), t == p ? static_cast<std::uint64_t>(n) : 0u);
    }
}

TEST(Confusion, Enumerable) {
  const auto cm = confusion(make_label_mask(1, 2, {1, 1}), make_label_mask(1, 2, {0, 1}), 2);
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.at(1, 1), 1u);
  EXPECT_EQ(cm.at(0, 0), 0u);
  EXPECT_EQ(cm.at(1, 0), 0u);
}

TEST(Confusion, PartitionAndErrors) {
  Rng rng(2);
  for (int t = 0; t < 30; ++t) {
    const int h = rng.uniform_int(1, 10), w = rng.uniform_int(1, 10);
    const auto cm = confusion(oracle::random_labels(rng, h, w, 4), oracle::random_labels(rng, h, w, 4), 4);
    EXPECT_EQ(cm.total(), static_cast<std::uint64_t>(h * w));
  }
  EXPECT_THROW(confusion(LabelMask(2, 2), LabelMask(2, 3), 4), DimensionError);
  EXPECT_THROW(confusion(LabelMask(1, 1, 1, 5), LabelMask(1, 1), 4), InvalidLabelError);
}

TEST(Scores, PerfectPrediction) {
  Rng rng(3);
  const auto m = oracle::random_labels(rng, 8, 8, 4);
  const auto s = metrics_from_confusion(confusion(m, m, 4));
  EXPECT_EQ(s.accuracy, 1.0);
  EXPECT_EQ(s.precision, 1.0);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.mean_iou, 1.0);
}

TEST(Scores, ConstantPredictionOnBalancedTruth) {
  const auto truth = make_label_mask(2, 2, {0, 0, 1, 1});
  const auto pred = make_label_mask(2, 2, {0, 0, 0, 0});
  const auto s = metrics_from_confusion(confusion(pred, truth, 2));
  EXPECT_EQ(s.accuracy, 0.5);
  // class 0: IoU 2/4, precision 2/4, recall 1; class 1: all 0
  EXPECT_DOUBLE_EQ(s.mean_iou, 0.25);
  EXPECT_DOUBLE_EQ(s.precision, 0.25);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  const auto o = oracle::brute_scores(pred, truth, 2);
  EXPECT_EQ(s.mean_iou, o.mean_iou);
}

TEST(Scores, MatchSetOracle) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const int k = rng.uniform_int(2, 4);
    const auto truth = t % 3 ? oracle::random_labels(rng, 8, 8, k) : oracle::random_blob_labels(rng, 8, 8, k);
    const auto pred = t % 2 ? oracle::random_labels(rng, 8, 8, k) : oracle::random_blob_labels(rng, 8, 8, k);
    const auto s = metrics_from_confusion(confusion(pred, truth, k));
    const auto o = oracle::brute_scores(pred, truth, k);
    EXPECT_NEAR(s.accuracy, o.accuracy, 1e-12);
    EXPECT_NEAR(s.precision, o.precision, 1e-12);
    EXPECT_NEAR(s.recall, o.recall, 1e-12);
    EXPECT_NEAR(s.mean_iou, o.mean_iou, 1e-12);
    for (double v : {s.accuracy, s.precision, s.recall, s.mean_iou}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Scores, PermutationInvariant) {
  Rng rng(5);
  const std::uint8_t perm[4] = {3, 1, 0, 2};
  for (int t = 0; t < 50; ++t) {
    auto a = oracle::random_labels(rng, 6, 6, 4), b = oracle::random_labels(rng, 6, 6, 4);
    const auto s = metrics_from_confusion(confusion(a, b, 4));
    for (auto& v : a.values()) v = perm[v];
    for (auto& v : b.values()) v = perm[v];
    const auto q = metrics_from_confusion(confusion(a, b, 4));
    EXPECT_NEAR(s.mean_iou, q.mean_iou, 1e-12);
    EXPECT_NEAR(s.precision, q.precision, 1e-12);
    EXPECT_NEAR(s.recall, q.recall, 1e-12);
    EXPECT_EQ(s.accuracy, q.accuracy);
  }
}

TEST(Scores, EmptyMatrixIsAnError) { EXPECT_THROW(metrics_from_confusion(ConfusionMatrix(4)), DataError); }

TEST(Scores, ClassIou) {
  const auto cm = confusion(make_label_mask(1, 3, {0, 1, 1}), make_label_mask(1, 3, {0, 0, 1}), 4);
  EXPECT_DOUBLE_EQ(*class_iou(cm, 1), 0.5);
  EXPECT_FALSE(class_iou(cm, 3).has_value());
}

TEST(IcRate, FilledDisc) {
  LabelMask m(11, 11);
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j)
      if ((i - 5) * (i - 5) + (j - 5) * (j - 5) <= 16) m(i, j) = 3;
  EXPECT_EQ(*ic_rate(m), 1.0);
}

TEST(IcRate, LRegion) {
  const auto m = make_label_mask(3, 3, {3, 0, 0, 3, 0, 0, 3, 3, 3});
  EXPECT_DOUBLE_EQ(*ic_rate(m), 5.0 / 6.0);
}

TEST(IcRate, PupilCountsAsPartOfTheDisc) {
  // Iris ring with a pupil hole is convex as a disc.
  const auto m = make_label_mask(3, 3, {3, 3, 3, 3, 2, 3, 3, 3, 3});
  EXPECT_EQ(*ic_rate(m), 1.0);
}

TEST(IcRate, AbsentIrisIsUndefined) {
  EXPECT_FALSE(ic_rate(LabelMask(4, 4)).has_value());
  EXPECT_FALSE(ic_rate(make_label_mask(1, 2, {2, 1})).has_value());
}

TEST(IcRate, AfterConvexifyIsOne) {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const auto m = oracle::random_labels(rng, rng.uniform_int(2, 12), rng.uniform_int(2, 12), 4);
    const auto c = convexify_labels(m, {PriorMode::plugin, t % 2 == 0});
    if (auto r = ic_rate(c)) {
      EXPECT_EQ(*r, 1.0);
    }
  }
}
