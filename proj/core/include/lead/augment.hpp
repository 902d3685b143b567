// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <complex>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "lead/rng.hpp"
#include "lead/sample.hpp"

namespace lead::aug {

enum class Kind { kFlip, kTimeMask, kFreqMask, kChannelMask, kJitter, kDropout };

inline constexpr std::array<Kind, 6> kAllKinds{Kind::kFlip,        Kind::kTimeMask,
                                               Kind::kFreqMask,    Kind::kChannelMask,
                                               Kind::kJitter,      Kind::kDropout};

std::string_view to_string(Kind kind);
/// "flip", "tmask", "fmask", "cmask", "jitter", "dropout".
Kind parse_kind(std::string_view name);

struct AugmentationParams {
  double flip_prob = 0.5;
  double mask_ratio = 0.1;
  double jitter_scale = 0.1;
  std::vector<Kind> enabled_kinds{kAllKinds.begin(), kAllKinds.end()};

  void validate() const;
};

/// ceil(ratio * n), clamped to n.
std::size_t mask_count(double ratio, std::size_t n);

/// `count` distinct indices drawn uniformly from [0, n), in draw order.
std::vector<std::size_t> choose_distinct(std::size_t n, std::size_t count, Rng& rng);

/// Zeroes DFT bins `bins` (each k with 0 <= k <= n/2, together with its
/// mirror n - k) and returns the full complex inverse transform.
std::vector<std::complex<double>> masked_inverse(std::span<const double> x,
                                                 const std::vector<std::size_t>& bins);

/// One augmentation of a T x C window. `kind` must be enabled in `params`.
Matrix apply(const Matrix& x, Kind kind, const AugmentationParams& params, Rng& rng);
EpochSample apply(const EpochSample& sample, Kind kind, const AugmentationParams& params,
                  Rng& rng);

/// Two views, each from an independently drawn kind.
std::pair<Matrix, Matrix> make_views(const Matrix& x, const AugmentationParams& params, Rng& rng);
std::pair<EpochSample, EpochSample> make_views(const EpochSample& sample,
                                               const AugmentationParams& params, Rng& rng);

}  // namespace lead::aug
