// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lead/corpus_io.hpp"
#include "lead/signal_prep.hpp"

namespace lead::io {

using BandPowers = std::array<double, 5>;  // delta, theta, alpha, beta, gamma

/// Synthetic EEG corpus recipe. Every channel carries independent
/// band-limited background noise with `base_band_power`; the class of a
/// subject multiplies per-band power by `class_band_power[label]`, the extra
/// power being a source shared by all `signal_channels`. Each subject also
/// carries `fingerprint_sources` narrowband sources with random frequency
/// and channel weights, scaled by `subject_nuisance_strength`.
struct SynthSpec {
  std::string dataset_id = "SYNTH";
  int n_subjects = 60;
  int n_classes = 2;
  std::vector<BandPowers> class_band_power{{1, 1, 1, 1, 1}, {2, 2, 1, 1, 1}};
  BandPowers base_band_power{1.0, 0.8, 1.0, 0.6, 0.3};
  double subject_nuisance_strength = 0.5;
  double trial_seconds = 60.0;
  std::uint64_t seed = 41;
  /// Montage channels carrying the class signal; empty means all 19.
  std::vector<std::string> signal_channels;
  int fingerprint_sources = 3;
  double white_noise = 0.1;

  void validate() const;
};

/// Labels alternate by subject ID: label = (id - 1) mod n_classes.
std::int32_t synth_label(const SynthSpec& spec, std::int32_t subject_id);

/// One subject's continuous recording: round(trial_seconds * fs) rows by
/// `channel_names.size()` columns. `signal` flags the class-signal channels.
Matrix synth_subject_signal(const SynthSpec& spec, std::int32_t subject_id, double fs,
                            const std::vector<bool>& signal);

/// Preprocessed corpus: bandpass, 1-second windows, per-window normalization.
Corpus synth_generate(const SynthSpec& spec);

struct RawRecording {
  SampleTag tag;
  prep::RawTrial trial;
};

/// Unprocessed recordings at an arbitrary rate and electrode set (names must
/// exist in the coordinate table). Every channel carries the class signal.
std::vector<RawRecording> synth_raw(const SynthSpec& spec, double fs,
                                    const std::vector<std::string>& channel_names,
                                    const prep::CoordinateTable& coords = prep::standard_coordinates());

}  // namespace lead::io
