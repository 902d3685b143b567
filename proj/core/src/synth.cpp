// SPDX-License-Identifier: Apache-2.0
#include "lead/synth.hpp"

#include <algorithm>
#include <cmath>

#include "lead/bands.hpp"
#include "lead/error.hpp"
#include "lead/rng.hpp"
#include "lead/spectral.hpp"

namespace lead::io {
namespace {

constexpr double kFingerprintLo = 2.0;
constexpr double kFingerprintHi = 40.0;
constexpr double kFingerprintWidth = 1.0;

std::vector<bool> signal_mask(const SynthSpec& spec) {
  const auto& montage = prep::Montage::standard();
  std::vector<bool> mask(montage.size(), spec.signal_channels.empty());
  for (const auto& name : spec.signal_channels) {
    const auto idx = montage.index_of(name);
    if (!idx) fail(ErrorKind::kConfig, "unknown signal channel '" + name + "'");
    mask[*idx] = true;
  }
  return mask;
}

void add(Matrix& data, Eigen::Index c, const std::vector<double>& x, double gain = 1.0) {
  for (Eigen::Index t = 0; t < data.rows(); ++t) data(t, c) += gain * x[static_cast<std::size_t>(t)];
}

}  // namespace

void SynthSpec::validate() const {
  if (n_subjects < 4) fail(ErrorKind::kConfig, "synthetic corpus needs n_subjects >= 4");
  if (n_classes < 2) fail(ErrorKind::kConfig, "synthetic corpus needs at least 2 classes");
  if (class_band_power.size() != static_cast<std::size_t>(n_classes))
    fail(ErrorKind::kConfig, "class_band_power needs one row per class");
  for (const auto& row : class_band_power)
    for (double m : row)
      if (!(m > 0.0) || !std::isfinite(m))
        fail(ErrorKind::kConfig, "class band multipliers must be strictly positive");
  for (double p : base_band_power)
    if (!(p >= 0.0) || !std::isfinite(p))
      fail(ErrorKind::kConfig, "base band power must be non-negative");
  if (!(subject_nuisance_strength >= 0.0))
    fail(ErrorKind::kConfig, "subject_nuisance_strength must be >= 0");
  if (!(trial_seconds > 0.0)) fail(ErrorKind::kConfig, "trial_seconds must be positive");
  if (fingerprint_sources < 0) fail(ErrorKind::kConfig, "fingerprint_sources must be >= 0");
  if (!(white_noise >= 0.0)) fail(ErrorKind::kConfig, "white_noise must be >= 0");
  if (dataset_id.empty()) fail(ErrorKind::kConfig, "dataset_id must not be empty");
}

std::int32_t synth_label(const SynthSpec& spec, std::int32_t subject_id) {
  return (subject_id - 1) % spec.n_classes;
}

Matrix synth_subject_signal(const SynthSpec& spec, std::int32_t subject_id, double fs,
                            const std::vector<bool>& signal) {
  const auto n = static_cast<std::size_t>(std::llround(spec.trial_seconds * fs));
  const auto n_ch = static_cast<Eigen::Index>(signal.size());
  const std::int32_t label = synth_label(spec, subject_id);
  const BandPowers& mult = spec.class_band_power[static_cast<std::size_t>(label)];
  Rng rng = Rng(spec.seed, hash_string(spec.dataset_id)).fork(static_cast<std::uint64_t>(subject_id));

  Matrix data = Matrix::Zero(static_cast<Eigen::Index>(n), n_ch);

  for (Eigen::Index c = 0; c < n_ch; ++c) {
    for (std::size_t b = 0; b < kEegBands.size(); ++b) {
      double power = spec.base_band_power[b];
      if (signal[static_cast<std::size_t>(c)]) power *= std::min(mult[b], 1.0);
      add(data, c, spectral::band_limited_noise(n, fs, kEegBands[b].lo, kEegBands[b].hi, power, rng));
    }
  }

  for (std::size_t b = 0; b < kEegBands.size(); ++b) {
    const double extra = (mult[b] - 1.0) * spec.base_band_power[b];
    if (extra <= 0.0) continue;
    const auto shared = spectral::band_limited_noise(n, fs, kEegBands[b].lo, kEegBands[b].hi, extra, rng);
    for (Eigen::Index c = 0; c < n_ch; ++c)
      if (signal[static_cast<std::size_t>(c)]) add(data, c, shared);
  }

  if (spec.subject_nuisance_strength > 0.0) {
    for (int k = 0; k < spec.fingerprint_sources; ++k) {
      const double f0 = rng.uniform(kFingerprintLo, kFingerprintHi);
      const auto source = spectral::band_limited_noise(n, fs, f0, f0 + kFingerprintWidth,
                                                       spec.subject_nuisance_strength, rng);
      for (Eigen::Index c = 0; c < n_ch; ++c) add(data, c, source, rng.normal());
    }
  }

  double background = 0.0;
  for (double p : spec.base_band_power) background += p;
  const double white_sd = std::sqrt(spec.white_noise * background);
  if (white_sd > 0.0)
    for (Eigen::Index t = 0; t < data.rows(); ++t)
      for (Eigen::Index c = 0; c < n_ch; ++c) data(t, c) += white_sd * rng.normal();
  return data;
}

Corpus synth_generate(const SynthSpec& spec) {
  spec.validate();
  const auto mask = signal_mask(spec);
  const auto& montage = prep::Montage::standard();
  const prep::Bandpass filter(kFullBand.lo, kFullBand.hi, kTargetRate);

  LabelTable labels;
  SampleList samples;
  for (std::int32_t id = 1; id <= spec.n_subjects; ++id) {
    const std::int32_t label = synth_label(spec, id);
    labels.rows.push_back({label, id});
    prep::RawTrial trial;
    trial.data = synth_subject_signal(spec, id, kTargetRate, mask);
    trial.channel_names = montage.names();
    trial.coords = montage.positions();
    trial.fs = kTargetRate;
    filter.apply_columns(trial.data);
    auto windows = prep::segment(trial, kWindow, kWindow, {id, label, spec.dataset_id});
    for (auto& w : windows) samples.push_back(prep::normalize(w));
  }

  std::map<std::int32_t, std::string> names;
  for (int c = 0; c < spec.n_classes; ++c)
    names[c] = spec.n_classes == 2 ? (c == 0 ? "HC" : "AD") : "class" + std::to_string(c);
  return assemble_corpus(spec.dataset_id, std::move(labels), std::move(samples), std::move(names),
                         "synthetic seed=" + std::to_string(spec.seed));
}

std::vector<RawRecording> synth_raw(const SynthSpec& spec, double fs,
                                    const std::vector<std::string>& channel_names,
                                    const prep::CoordinateTable& coords) {
  spec.validate();
  if (!(fs > 0.0)) fail(ErrorKind::kConfig, "sampling rate must be positive");
  if (channel_names.empty()) fail(ErrorKind::kConfig, "raw synthesis needs at least one channel");
  std::vector<prep::Vec3> positions;
  for (const auto& name : channel_names) {
    const auto pos = coords.find(name);
    if (!pos) fail(ErrorKind::kConfig, "no coordinates for channel '" + name + "'");
    positions.push_back(*pos);
  }
  const std::vector<bool> mask(channel_names.size(), true);
  std::vector<RawRecording> out;
  for (std::int32_t id = 1; id <= spec.n_subjects; ++id) {
    RawRecording rec;
    rec.tag = {id, synth_label(spec, id), spec.dataset_id};
    rec.trial.data = synth_subject_signal(spec, id, fs, mask);
    rec.trial.channel_names = channel_names;
    rec.trial.coords = positions;
    rec.trial.fs = fs;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace lead::io
