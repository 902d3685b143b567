// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lead/filter.hpp"
#include "lead/montage.hpp"
#include "lead/sample.hpp"

namespace lead::prep {

/// One continuous recording, T rows by C channels, before alignment.
struct RawTrial {
  Matrix data;
  std::vector<std::string> channel_names;
  std::vector<Vec3> coords;
  double fs = 0.0;

  Eigen::Index timesteps() const { return data.rows(); }
  Eigen::Index channels() const { return data.cols(); }
  /// Unique names, unit coordinates (1e-6), fs > 0, finite data.
  void validate() const;
};

/// Per target channel: copy one source, or a convex combination of sources.
struct AlignmentSource {
  std::size_t index = 0;
  double weight = 1.0;
};

struct AlignmentEntry {
  enum class Kind { kSelect, kInterpolate };
  Kind kind = Kind::kSelect;
  std::vector<AlignmentSource> sources;
};

struct AlignmentPlan {
  std::vector<AlignmentEntry> entries;  // one per montage channel, canonical order
};

struct PreprocessConfig {
  double target_fs = kTargetRate;
  double lo = 0.5;
  double hi = 45.0;
  int win = kWindow;
  int stride = kWindow;
  int filter_order = 4;
};

/// Rational polyphase resampling with a Kaiser-windowed sinc anti-alias
/// filter (beta 8.6, passband to 0.95 of the lower Nyquist).
RawTrial resample(const RawTrial& trial, double target_fs);

/// Zero-phase Butterworth bandpass (order 4 highpass + order 4 lowpass,
/// applied forward and backward).
RawTrial bandpass(const RawTrial& trial, double lo, double hi, int order = 4);

/// Designed bandpass reusable across many signals of the same rate.
class Bandpass {
 public:
  Bandpass(double lo, double hi, double fs, int order = 4);
  std::vector<double> apply(std::span<const double> x) const;
  void apply_columns(Matrix& data) const;
  const SosFilter& sections() const { return sos_; }
  std::size_t pad() const { return pad_; }

 private:
  SosFilter sos_;
  std::size_t pad_ = 0;
};

/// Name/alias matches are selected; with at least as many sources as
/// targets the remaining targets select the nearest source; otherwise they
/// are interpolated by inverse squared distance over all sources.
AlignmentPlan plan_alignment(const RawTrial& trial, const Montage& montage);
RawTrial apply_alignment(const RawTrial& trial, const AlignmentPlan& plan,
                         const Montage& montage);
RawTrial align_channels(const RawTrial& trial, const Montage& montage = Montage::standard());

/// floor((T - win) / stride) + 1 for T >= win, else 0.
std::size_t segment_count(std::size_t timesteps, std::size_t win, std::size_t stride);
SampleList segment(const RawTrial& trial, int win, int stride, const SampleTag& tag = {});

/// Per-channel standardization; constant channels (std < 1e-8) become zeros.
EpochSample normalize(const EpochSample& sample);
void normalize_columns(Matrix& data);

/// resample -> bandpass -> align -> segment -> normalize.
SampleList preprocess_trial(const RawTrial& trial, const PreprocessConfig& cfg,
                            const Montage& montage = Montage::standard(),
                            const SampleTag& tag = {});

void validate(const PreprocessConfig& cfg);

}  // namespace lead::prep
