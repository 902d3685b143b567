// SPDX-License-Identifier: Apache-2.0
#include "lead/signal_prep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "lead/error.hpp"

namespace lead::prep {
namespace {

constexpr double kKaiserBeta = 8.6;
constexpr std::int64_t kMaxDenominator = 10000;
constexpr double kStdFloor = 1e-8;

std::vector<double> column(const Matrix& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index t = 0; t < m.rows(); ++t) out[static_cast<std::size_t>(t)] = m(t, c);
  return out;
}

}  // namespace

void RawTrial::validate() const {
  if (!(fs > 0.0) || !std::isfinite(fs)) fail(ErrorKind::kConfig, "sampling rate must be positive");
  if (static_cast<std::size_t>(data.cols()) != channel_names.size() ||
      channel_names.size() != coords.size())
    fail(ErrorKind::kShape, "channel names, coordinates and data columns disagree");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < channel_names.size(); ++i) {
    std::string lower = channel_names[i];
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (!seen.insert(lower).second)
      fail(ErrorKind::kData, "duplicate channel name '" + channel_names[i] + "'");
    if (std::abs(norm(coords[i]) - 1.0) > 1e-6)
      fail(ErrorKind::kData, "channel '" + channel_names[i] + "' coordinate is not on the unit sphere");
  }
  if (!data.allFinite()) fail(ErrorKind::kData, "trial contains non-finite samples");
}

void validate(const PreprocessConfig& cfg) {
  if (!(cfg.target_fs > 0.0)) fail(ErrorKind::kConfig, "target_fs must be positive");
  if (!(cfg.lo > 0.0 && cfg.lo < cfg.hi))
    fail(ErrorKind::kConfig, "bandpass requires 0 < lo < hi");
  if (!(cfg.hi < cfg.target_fs / 2.0))
    fail(ErrorKind::kConfig, "bandpass hi must be below the Nyquist frequency");
  if (cfg.win <= 0) fail(ErrorKind::kConfig, "window length must be positive");
  if (cfg.stride <= 0 || cfg.stride > cfg.win)
    fail(ErrorKind::kConfig, "stride must satisfy 0 < stride <= win");
  if (cfg.filter_order < 1) fail(ErrorKind::kConfig, "filter order must be >= 1");
}

// --- resampling -----------------------------------------------------------

RawTrial resample(const RawTrial& trial, double target_fs) {
  if (!(trial.fs > 0.0) || !(target_fs > 0.0))
    fail(ErrorKind::kConfig, "sampling rates must be positive");
  if (trial.fs == target_fs) return trial;
  const auto [up, down] = rational_approx(target_fs / trial.fs, kMaxDenominator);
  if (up == 0)
    fail(ErrorKind::kConfig, "resampling ratio " + std::to_string(target_fs) + "/" +
                                 std::to_string(trial.fs) +
                                 " is not a rational with denominator <= 10000");

  const double low_nyquist = std::min(trial.fs, target_fs) / 2.0;
  const double fs_up = trial.fs * static_cast<double>(up);
  const auto taps = kaiser_lowpass(0.975 * low_nyquist / fs_up, 0.05 * low_nyquist / fs_up,
                                   kKaiserBeta, static_cast<double>(up));

  RawTrial out;
  out.channel_names = trial.channel_names;
  out.coords = trial.coords;
  out.fs = target_fs;
  const std::int64_t n = trial.timesteps();
  out.data.resize((2 * n * up + down) / (2 * down), trial.channels());
  for (Eigen::Index c = 0; c < trial.channels(); ++c) {
    const auto x = column(trial.data, c);
    const auto y = resample_poly(x, up, down, taps);
    for (Eigen::Index t = 0; t < out.data.rows(); ++t) out.data(t, c) = y[static_cast<std::size_t>(t)];
  }
  return out;
}

// --- filtering ------------------------------------------------------------

Bandpass::Bandpass(double lo, double hi, double fs, int order) {
  if (!(fs > 0.0)) fail(ErrorKind::kConfig, "sampling rate must be positive");
  if (!(lo > 0.0 && lo < hi)) fail(ErrorKind::kConfig, "bandpass requires 0 < lo < hi");
  if (!(hi < fs / 2.0))
    fail(ErrorKind::kConfig, "bandpass hi " + std::to_string(hi) +
                                 " Hz is not below the Nyquist frequency " +
                                 std::to_string(fs / 2.0) + " Hz");
  sos_ = butter_bandpass(order, lo, hi, fs);
  pad_ = 3 * impulse_length(sos_);
}

std::vector<double> Bandpass::apply(std::span<const double> x) const {
  return sosfiltfilt(sos_, x, pad_);
}

void Bandpass::apply_columns(Matrix& data) const {
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const auto y = apply(column(data, c));
    for (Eigen::Index t = 0; t < data.rows(); ++t) data(t, c) = y[static_cast<std::size_t>(t)];
  }
}

RawTrial bandpass(const RawTrial& trial, double lo, double hi, int order) {
  const Bandpass filter(lo, hi, trial.fs, order);
  RawTrial out = trial;
  filter.apply_columns(out.data);
  return out;
}

// --- channel alignment ----------------------------------------------------

AlignmentPlan plan_alignment(const RawTrial& trial, const Montage& montage) {
  const std::size_t n_src = trial.channel_names.size();
  if (n_src == 0) fail(ErrorKind::kData, "trial has no channels to align");
  if (trial.coords.size() != n_src)
    fail(ErrorKind::kShape, "every channel needs a coordinate");

  AlignmentPlan plan;
  plan.entries.resize(montage.size());
  std::vector<bool> matched_target(montage.size(), false);
  std::vector<bool> matched_source(n_src, false);

  for (std::size_t s = 0; s < n_src; ++s) {
    const auto t = montage.index_of(trial.channel_names[s]);
    if (t && !matched_target[*t]) {
      matched_target[*t] = true;
      matched_source[s] = true;
      plan.entries[*t] = {AlignmentEntry::Kind::kSelect, {{s, 1.0}}};
    }
  }

  std::vector<std::size_t> surplus;
  for (std::size_t s = 0; s < n_src; ++s)
    if (!matched_source[s]) surplus.push_back(s);

  auto nearest = [&](const Vec3& target, const std::vector<std::size_t>& candidates) {
    std::size_t best = candidates.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t s : candidates) {
      const double d = distance(trial.coords[s], target);
      if (d < best_d || (d == best_d && trial.channel_names[s] < trial.channel_names[best])) {
        best = s;
        best_d = d;
      }
    }
    return std::pair{best, best_d};
  };

  std::vector<std::size_t> all(n_src);
  for (std::size_t s = 0; s < n_src; ++s) all[s] = s;
  const bool enough_sources = n_src >= montage.size();

  for (std::size_t t = 0; t < montage.size(); ++t) {
    if (matched_target[t]) continue;
    const Vec3& target = montage.positions()[t];
    if (enough_sources) {
      const auto [best, d] = nearest(target, surplus.empty() ? all : surplus);
      plan.entries[t] = {AlignmentEntry::Kind::kSelect, {{best, 1.0}}};
      continue;
    }
    const auto [best, d] = nearest(target, all);
    if (d < 1e-12) {
      plan.entries[t] = {AlignmentEntry::Kind::kSelect, {{best, 1.0}}};
      continue;
    }
    AlignmentEntry entry{AlignmentEntry::Kind::kInterpolate, {}};
    double total = 0.0;
    for (std::size_t s = 0; s < n_src; ++s) {
      const double dist = distance(trial.coords[s], target);
      const double w = 1.0 / (dist * dist);
      entry.sources.push_back({s, w});
      total += w;
    }
    for (auto& src : entry.sources) src.weight /= total;
    plan.entries[t] = std::move(entry);
  }
  return plan;
}

RawTrial apply_alignment(const RawTrial& trial, const AlignmentPlan& plan,
                         const Montage& montage) {
  if (plan.entries.size() != montage.size())
    fail(ErrorKind::kShape, "alignment plan does not cover the montage");
  RawTrial out;
  out.fs = trial.fs;
  out.channel_names = montage.names();
  out.coords = montage.positions();
  out.data = Matrix::Zero(trial.timesteps(), static_cast<Eigen::Index>(montage.size()));
  for (std::size_t t = 0; t < plan.entries.size(); ++t) {
    const auto& e = plan.entries[t];
    const auto col = static_cast<Eigen::Index>(t);
    if (e.kind == AlignmentEntry::Kind::kSelect) {
      out.data.col(col) = trial.data.col(static_cast<Eigen::Index>(e.sources.front().index));
    } else {
      for (const auto& src : e.sources)
        out.data.col(col) += src.weight * trial.data.col(static_cast<Eigen::Index>(src.index));
    }
  }
  return out;
}

RawTrial align_channels(const RawTrial& trial, const Montage& montage) {
  return apply_alignment(trial, plan_alignment(trial, montage), montage);
}

// --- segmentation and normalization ---------------------------------------

std::size_t segment_count(std::size_t timesteps, std::size_t win, std::size_t stride) {
  if (win == 0 || stride == 0 || timesteps < win) return 0;
  return (timesteps - win) / stride + 1;
}

SampleList segment(const RawTrial& trial, int win, int stride, const SampleTag& tag) {
  if (win <= 0) fail(ErrorKind::kConfig, "window length must be positive");
  if (stride <= 0 || stride > win) fail(ErrorKind::kConfig, "stride must satisfy 0 < stride <= win");
  const std::size_t count = segment_count(static_cast<std::size_t>(trial.timesteps()),
                                          static_cast<std::size_t>(win),
                                          static_cast<std::size_t>(stride));
  SampleList out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    EpochSample s;
    s.data = trial.data.middleRows(static_cast<Eigen::Index>(k) * stride, win).cast<float>();
    s.subject_id = tag.subject_id;
    s.label = tag.label;
    s.dataset_id = tag.dataset_id;
    out.push_back(std::move(s));
  }
  return out;
}

void normalize_columns(Matrix& data) {
  const auto n = static_cast<double>(data.rows());
  if (data.rows() == 0) return;
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    auto col = data.col(c);
    const double mean = col.sum() / n;
    const double var = (col.array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    if (sd < kStdFloor) {
      col.setZero();
    } else {
      col = (col.array() - mean) / sd;
    }
  }
}

EpochSample normalize(const EpochSample& sample) {
  if (!sample.data.allFinite()) fail(ErrorKind::kData, "cannot normalize non-finite sample");
  Matrix work = sample.data.cast<double>();
  normalize_columns(work);
  EpochSample out = sample;
  out.data = work.cast<float>();
  return out;
}

SampleList preprocess_trial(const RawTrial& trial, const PreprocessConfig& cfg,
                            const Montage& montage, const SampleTag& tag) {
  validate(cfg);
  trial.validate();
  RawTrial x = trial.fs == cfg.target_fs ? trial : resample(trial, cfg.target_fs);
  x = bandpass(x, cfg.lo, cfg.hi, cfg.filter_order);
  x = align_channels(x, montage);
  SampleList windows = segment(x, cfg.win, cfg.stride, tag);
  for (auto& w : windows) w = normalize(w);
  return windows;
}

}  // namespace lead::prep
