// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string_view>

namespace lead {

struct FrequencyBand {
  std::string_view name;
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr std::array<FrequencyBand, 5> kEegBands{{
    {"delta", 0.5, 4.0},
    {"theta", 4.0, 7.0},
    {"alpha", 8.0, 12.0},
    {"beta", 12.0, 30.0},
    {"gamma", 30.0, 45.0},
}};

inline constexpr FrequencyBand kFullBand{"all", 0.5, 45.0};

enum BandIndex { kDelta = 0, kTheta, kAlpha, kBeta, kGamma };

}  // namespace lead
