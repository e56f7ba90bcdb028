#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "support.hpp"

using namespace irisseg;

namespace {

LabelMask centre_only(int label) {
  LabelMask m(3, 3);
  m(1, 1) = static_cast<std::uint8_t>(label);
  return m;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(BoundaryPixels, IsolatedPixel) {
  const auto b = boundary_pixels(centre_only(3), ClassId::iris);
  EXPECT_EQ(count_set(b), 1u);
  EXPECT_EQ(b(1, 1), 1);
}

TEST(BoundaryPixels, WholeImageIsFrame) {
  const LabelMask m(4, 4, 1, label_of(ClassId::pupil));
  const auto b = boundary_pixels(m, ClassId::pupil);
  EXPECT_EQ(count_set(b), 12u);
  EXPECT_EQ(b(1, 1), 0);
  EXPECT_EQ(b(2, 2), 0);
  EXPECT_EQ(b(0, 2), 1);
}

TEST(BoundaryPixels, AbsentClass) {
  const auto b = boundary_pixels(centre_only(3), ClassId::eyeball);
  EXPECT_EQ(count_set(b), 0u);
}

TEST(BoundaryPixels, FrameAloneIsNotBoundary) {
  // Region touching the frame on one side: frame pixels away from the transition are interior.
  LabelMask m(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = 1;
  const auto b = boundary_pixels(m, ClassId::eyeball);
  EXPECT_EQ(b(0, 0), 0);
  EXPECT_EQ(b(0, 2), 1);
  EXPECT_EQ(count_set(b), 5u);
}

TEST(SignedDistance, CentrePixel) {
  const auto s = signed_distance_field(centre_only(1), 2);
  EXPECT_EQ(s(1, 1, 1), 0.0);
  EXPECT_EQ(s(0, 1, 1), 1.0);
  EXPECT_EQ(s(1, 0, 1), 1.0);
  EXPECT_DOUBLE_EQ(s(0, 0, 1), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(s(2, 2, 1), std::sqrt(2.0));
}

TEST(SignedDistance, OneByFive) {
  const auto m = make_label_mask(1, 5, {0, 1, 1, 1, 0});
  const auto s = signed_distance_field(m, 2);
  const double expect[5] = {1, 0, -1, 0, 1};
  for (int j = 0; j < 5; ++j) EXPECT_EQ(s(0, j, 1), expect[j]) << j;
}

TEST(SignedDistance, WholeImageRegion) {
  const LabelMask m(7, 6, 1, 2);
  const auto s = signed_distance_field(m, 4);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 6; ++j) {
      EXPECT_LE(s(i, j, 2), 0.0);
      const double frame = std::min({i, j, 6 - i, 5 - j});
      EXPECT_EQ(s(i, j, 2), frame == 0 ? 0.0 : -frame);
    }
  EXPECT_EQ(s(3, 3, 2), -2.0);
}

TEST(SignedDistance, AbsentClassSentinel) {
  const auto s = signed_distance_field(centre_only(1), 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      EXPECT_EQ(s(i, j, 3), 6.0);
      EXPECT_GT(s(i, j, 3), std::hypot(2.0, 2.0));
    }
}

TEST(SignedDistance, BoundaryIsPositiveZero) {
  const auto s = signed_distance_field(make_label_mask(1, 3, {0, 1, 1}), 2);
  EXPECT_FALSE(std::signbit(s(0, 1, 1)));
  EXPECT_FALSE(std::signbit(s(0, 0, 0)));
}

TEST(SignedDistance, MatchesBruteForceBitForBit) {
  Rng rng(2024);
  for (int t = 0; t < 120; ++t) {
    const int h = rng.uniform_int(1, 16), w = rng.uniform_int(1, 16), k = rng.uniform_int(2, 4);
    const auto m = t % 2 ? oracle::random_labels(rng, h, w, k) : oracle::random_blob_labels(rng, h, w, k);
    const auto fast = signed_distance_field(m, k);
    const auto slow = oracle::brute_sdf(m, k);
    for (std::size_t n = 0; n < fast.size(); ++n)
      ASSERT_TRUE(bit_equal(fast.values()[n], slow.values()[n]))
          << "trial " << t << " index " << n << ": " << fast.values()[n] << " vs " << slow.values()[n];
  }
}

TEST(SignedDistance, SignConvention) {
  Rng rng(5);
  for (int t = 0; t < 40; ++t) {
    const auto m = oracle::random_blob_labels(rng, 12, 12, 4);
    const auto s = signed_distance_field(m, 4);
    for (int k = 0; k < 4; ++k) {
      const auto region = region_of(m, static_cast<std::uint8_t>(k));
      if (count_set(region) == 0) continue;
      const auto edge = boundary_pixels(region);
      for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) {
          if (edge(i, j))
            EXPECT_EQ(s(i, j, k), 0.0);
          else if (region(i, j))
            EXPECT_LT(s(i, j, k), 0.0);
          else
            EXPECT_GT(s(i, j, k), 0.0);
        }
    }
  }
}

TEST(SignedDistance, BinaryMaskHasTwoChannels) {
  const auto s = signed_distance_field(make_binary_mask(1, 5, {0, 1, 1, 1, 0}));
  EXPECT_EQ(s.channels(), 2);
  EXPECT_EQ(s(0, 2, 1), -1.0);
  EXPECT_EQ(s(0, 2, 0), 2.0);  // nearest background boundary pixel is column 0
}

TEST(BoundaryMap, UniformMaskIsZero) {
  const LabelMask m(6, 6, 1, 2);
  for (int width : {1, 3}) {
    for (double sigma : {0.0, 1.0}) {
      const auto b = boundary_map(m, {width, sigma});
      for (double v : b.values()) EXPECT_EQ(v, 0.0);
    }
  }
}

TEST(BoundaryMap, WidthOneNoBlur) {
  const auto b = boundary_map(make_label_mask(1, 4, {0, 0, 1, 1}), {1, 0.0});
  const double expect[4] = {0, 1, 1, 0};
  for (int j = 0; j < 4; ++j) EXPECT_EQ(b(0, j), expect[j]);
}

TEST(BoundaryMap, WidthTwoNoBlur) {
  const auto b = boundary_map(make_label_mask(1, 4, {0, 0, 1, 1}), {2, 0.0});
  for (int j = 0; j < 4; ++j) EXPECT_EQ(b(0, j), 1.0);
}

TEST(BoundaryMap, PermutationInvariant) {
  Rng rng(8);
  const std::uint8_t perm[4] = {2, 0, 3, 1};
  for (int t = 0; t < 20; ++t) {
    auto m = oracle::random_blob_labels(rng, 10, 9, 4);
    auto q = m;
    for (auto& v : q.values()) v = perm[v];
    EXPECT_EQ(boundary_map(m), boundary_map(q));
  }
}

TEST(BoundaryMap, BlurStaysInUnitRangeAndKeepsSupport) {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const auto m = oracle::random_blob_labels(rng, 12, 12, 4);
    const auto sharp = boundary_map(m, {3, 0.0});
    const auto soft = boundary_map(m, {3, 1.0});
    for (std::size_t n = 0; n < soft.size(); ++n) {
      EXPECT_GE(soft.values()[n], 0.0);
      EXPECT_LE(soft.values()[n], 1.0);
      if (sharp.values()[n] > 0.0) {
        EXPECT_GT(soft.values()[n], 0.0);
      }
    }
  }
}

TEST(BoundaryMap, BadParameters) {
  const LabelMask m(3, 3);
  EXPECT_THROW(boundary_map(m, {0, 1.0}), ParameterError);
  EXPECT_THROW(boundary_map(m, {1, -1.0}), ParameterError);
}

TEST(Gaussian, KernelIsNormalized) {
  const auto k = gaussian_kernel(1.0);
  EXPECT_EQ(k.size(), 7u);
  double sum = 0.0;
  for (double v : k) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(k[2], k[4]);
}
