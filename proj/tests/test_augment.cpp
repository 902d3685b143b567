// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "lead/augment.hpp"
#include "lead/spectral.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace {

using lead::ErrorKind;
using lead::Matrix;
using lead::Rng;
namespace aug = lead::aug;

Matrix window(Rng& rng, Eigen::Index t = 128, Eigen::Index c = 19) {
  // Offset keeps every entry away from zero so masks are unambiguous.
  return (lead::testing::random_matrix(rng, t, c).array().abs() + 1.0).matrix();
}

aug::AugmentationParams only(aug::Kind k) {
  aug::AugmentationParams p;
  p.enabled_kinds = {k};
  return p;
}

TEST(Augment, KindNamesRoundTrip) {
  for (auto k : aug::kAllKinds) EXPECT_EQ(aug::parse_kind(aug::to_string(k)), k);
  EXPECT_LEAD_ERROR(aug::parse_kind("mixup"), ErrorKind::kConfig);
}

TEST(Augment, ShapePreservedForAllKinds) {
  Rng rng(1);
  const Matrix x = window(rng);
  aug::AugmentationParams p;
  for (auto k : aug::kAllKinds) {
    const Matrix y = aug::apply(x, k, p, rng);
    EXPECT_EQ(y.rows(), x.rows());
    EXPECT_EQ(y.cols(), x.cols());
  }
}

TEST(Augment, FlipIsInvolution) {
  Rng rng(2);
  const Matrix x = window(rng);
  auto p = only(aug::Kind::kFlip);
  p.flip_prob = 1.0;
  const Matrix once = aug::apply(x, aug::Kind::kFlip, p, rng);
  EXPECT_TRUE(once.row(0) == x.row(x.rows() - 1));
  EXPECT_TRUE(aug::apply(once, aug::Kind::kFlip, p, rng) == x);
}

TEST(Augment, ZeroRatioMasksAreIdentity) {
  Rng rng(3);
  const Matrix x = window(rng);
  aug::AugmentationParams p;
  p.mask_ratio = 0.0;
  for (auto k : {aug::Kind::kTimeMask, aug::Kind::kChannelMask, aug::Kind::kDropout})
    EXPECT_TRUE(aug::apply(x, k, p, rng) == x) << aug::to_string(k);
}

TEST(Augment, TimeMaskZeroesCeilingRowsAndKeepsTheRest) {
  Rng rng(4);
  const Matrix x = window(rng);
  const Matrix y = aug::apply(x, aug::Kind::kTimeMask, only(aug::Kind::kTimeMask), rng);
  int zero_rows = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (y.row(r).isZero(0.0)) {
      ++zero_rows;
    } else {
      EXPECT_TRUE(y.row(r) == x.row(r));
    }
  }
  EXPECT_EQ(zero_rows, 13);  // ceil(0.1 * 128)
}

TEST(Augment, ChannelMaskZeroesCeilingColumnsAndKeepsTheRest) {
  Rng rng(5);
  const Matrix x = window(rng);
  const Matrix y = aug::apply(x, aug::Kind::kChannelMask, only(aug::Kind::kChannelMask), rng);
  int zero_cols = 0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (y.col(c).isZero(0.0)) {
      ++zero_cols;
    } else {
      EXPECT_TRUE(y.col(c) == x.col(c));
    }
  }
  EXPECT_EQ(zero_cols, 2);  // ceil(0.1 * 19)
}

TEST(Augment, MaskCountUsesCeiling) {
  EXPECT_EQ(aug::mask_count(0.1, 128), 13u);
  EXPECT_EQ(aug::mask_count(0.1, 65), 7u);
  EXPECT_EQ(aug::mask_count(0.1, 19), 2u);
  EXPECT_EQ(aug::mask_count(0.1, 10), 1u);
  EXPECT_EQ(aug::mask_count(0.01, 5), 1u);
  EXPECT_EQ(aug::mask_count(0.0, 5), 0u);
  EXPECT_EQ(aug::mask_count(1.0, 5), 5u);
}

TEST(Augment, FrequencyMaskLeavesNoImaginaryResidue) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(128);
    for (auto& v : x) v = rng.normal();
    const auto bins = aug::choose_distinct(65, aug::mask_count(0.1, 65), rng);
    for (const auto& z : aug::masked_inverse(x, bins)) EXPECT_LT(std::abs(z.imag()), 1e-9);
  }
}

TEST(Augment, FrequencyMaskRemovesChosenBins) {
  Rng rng(7);
  const Matrix x = window(rng, 128, 3);
  const Matrix y = aug::apply(x, aug::Kind::kFreqMask, only(aug::Kind::kFreqMask), rng);
  // Exactly ceil(0.1 * 65) = 7 bins vanish, the same ones in every channel.
  std::vector<int> zeroed_per_channel;
  std::vector<double> col(128);
  std::vector<std::vector<bool>> zero(3, std::vector<bool>(65));
  for (Eigen::Index c = 0; c < 3; ++c) {
    for (int t = 0; t < 128; ++t) col[static_cast<std::size_t>(t)] = y(t, c);
    const auto spec = lead::spectral::rfft(col);
    int n = 0;
    for (int k = 0; k <= 64; ++k) {
      zero[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] = std::abs(spec[static_cast<std::size_t>(k)]) < 1e-9;
      n += zero[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
    }
    zeroed_per_channel.push_back(n);
  }
  for (int n : zeroed_per_channel) EXPECT_EQ(n, 7);
  EXPECT_EQ(zero[0], zero[1]);
  EXPECT_EQ(zero[0], zero[2]);
}

TEST(Augment, JitterIsUniformOnZeroToScale) {
  Rng rng(8);
  const Matrix x = window(rng);
  const Matrix d = aug::apply(x, aug::Kind::kJitter, only(aug::Kind::kJitter), rng) - x;
  EXPECT_GE(d.minCoeff(), 0.0);
  EXPECT_LT(d.maxCoeff(), 0.1);
  EXPECT_NEAR(d.mean(), 0.05, 0.005);
}

TEST(Augment, DropoutZeroCountWithinThreeSigma) {
  Rng rng(9);
  const Matrix x = window(rng);
  const auto p = only(aug::Kind::kDropout);
  const double n = 128.0 * 19.0, mean = 0.1 * n, sigma = std::sqrt(n * 0.1 * 0.9);
  for (int seed = 0; seed < 100; ++seed) {
    Rng r(static_cast<std::uint64_t>(seed));
    const Matrix y = aug::apply(x, aug::Kind::kDropout, p, r);
    const double zeros = static_cast<double>((y.array() == 0.0).count());
    EXPECT_LE(std::abs(zeros - mean), 3.0 * sigma + 1.0) << seed;
    // Survivors are untouched.
    EXPECT_TRUE(((y.array() == 0.0) || (y.array() == x.array())).all());
  }
}

TEST(Augment, DisabledKindIsConfigError) {
  Rng rng(10);
  const Matrix x = window(rng, 8, 2);
  EXPECT_LEAD_ERROR(aug::apply(x, aug::Kind::kJitter, only(aug::Kind::kFlip), rng), ErrorKind::kConfig);
}

TEST(Augment, InvalidParamsRejected) {
  aug::AugmentationParams p;
  p.flip_prob = 1.5;
  EXPECT_LEAD_ERROR(p.validate(), ErrorKind::kConfig);
  p = {};
  p.enabled_kinds.clear();
  EXPECT_LEAD_ERROR(p.validate(), ErrorKind::kConfig);
}

TEST(Views, DegenerateBankReturnsInput) {
  Rng rng(11);
  const Matrix x = window(rng);
  auto p = only(aug::Kind::kFlip);
  p.flip_prob = 0.0;
  const auto [a, b] = aug::make_views(x, p, rng);
  EXPECT_TRUE(a == x);
  EXPECT_TRUE(b == x);
}

TEST(Views, DeterministicForFixedState) {
  Rng seed(12);
  const Matrix x = window(seed);
  aug::AugmentationParams p;
  Rng r1(99), r2(99);
  const auto v1 = aug::make_views(x, p, r1);
  const auto v2 = aug::make_views(x, p, r2);
  EXPECT_TRUE(v1.first == v2.first);
  EXPECT_TRUE(v1.second == v2.second);
}

/// Recognizes which augmentation produced y from x (flip_prob = 1).
aug::Kind identify(const Matrix& x, const Matrix& y) {
  if (y == x.colwise().reverse().eval()) return aug::Kind::kFlip;
  const Matrix d = y - x;
  if ((d.array() >= 0.0).all() && (d.array() < 0.1).all() && (d.array() > 0.0).any())
    return aug::Kind::kJitter;
  int zero_rows = 0, zero_cols = 0;
  for (Eigen::Index r = 0; r < y.rows(); ++r) zero_rows += y.row(r).isZero(0.0);
  for (Eigen::Index c = 0; c < y.cols(); ++c) zero_cols += y.col(c).isZero(0.0);
  const bool rest_same = ((y.array() == 0.0) || (y.array() == x.array())).all();
  if (rest_same && zero_rows > 0 && (y.array() == 0.0).count() == zero_rows * y.cols())
    return aug::Kind::kTimeMask;
  if (rest_same && zero_cols > 0 && (y.array() == 0.0).count() == zero_cols * y.rows())
    return aug::Kind::kChannelMask;
  if (rest_same) return aug::Kind::kDropout;
  return aug::Kind::kFreqMask;
}

TEST(Views, KindsDrawnWithEqualProbability) {
  Rng rng(13);
  const Matrix x = window(rng, 16, 8);
  aug::AugmentationParams p;
  p.flip_prob = 1.0;
  std::map<aug::Kind, int> count;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto [a, b] = aug::make_views(x, p, rng);
    ++count[identify(x, a)];
    ++count[identify(x, b)];
  }
  const double n = 2.0 * draws, mean = n / 6.0, sigma = std::sqrt(n * (1.0 / 6.0) * (5.0 / 6.0));
  for (auto k : aug::kAllKinds) EXPECT_LE(std::abs(count[k] - mean), 3.0 * sigma) << aug::to_string(k);
}

TEST(Views, SampleOverloadKeepsTags) {
  Rng rng(14);
  lead::EpochSample s;
  s.data = window(rng, 16, 4).cast<float>();
  s.subject_id = 9;
  s.label = 1;
  s.dataset_id = "D";
  const auto [a, b] = aug::make_views(s, aug::AugmentationParams{}, rng);
  EXPECT_EQ(a.subject_id, 9);
  EXPECT_EQ(b.label, 1);
  EXPECT_EQ(b.dataset_id, "D");
}

}  // namespace
