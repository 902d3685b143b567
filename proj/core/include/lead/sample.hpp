// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace lead {

/// Stored sample window: T rows (time) by C columns (channels), row-major so
/// the memory order matches the on-disk layout.
using SampleMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Working precision for signal processing and the network.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One T x C window with its subject, class and dataset tags.
struct EpochSample {
  SampleMatrix data;
  std::int32_t subject_id = 0;
  std::int32_t label = 0;
  std::string dataset_id;

  Eigen::Index timesteps() const { return data.rows(); }
  Eigen::Index channels() const { return data.cols(); }
};

using SampleList = std::vector<EpochSample>;

/// Subject/class/dataset tags for windows produced from raw data or read
/// back from a tensor file (which stores data only).
struct SampleTag {
  std::int32_t subject_id = 0;
  std::int32_t label = 0;
  std::string dataset_id;
};

inline constexpr double kTargetRate = 128.0;
inline constexpr int kWindow = 128;
inline constexpr int kMontageSize = 19;

}  // namespace lead
