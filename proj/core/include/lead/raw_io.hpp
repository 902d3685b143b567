// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lead/corpus_io.hpp"
#include "lead/signal_prep.hpp"

namespace lead::io {

// Raw input directory consumed by `lead preprocess`:
//   <dir>/raw.json     {dataset_id, sampling_rate, class_names, subjects}
//   <dir>/<trial>.csv  header row of channel names, one row per time step

struct RawSubject {
  std::int32_t subject_id = 0;
  std::int32_t label = 0;
  std::vector<std::string> trials;  // relative to the directory
};

struct RawIndex {
  std::string dataset_id;
  double sampling_rate = 0.0;
  std::map<std::int32_t, std::string> class_names;
  std::vector<RawSubject> subjects;
};

RawIndex read_raw_index(const std::filesystem::path& dir);
void write_raw_index(const RawIndex& index, const std::filesystem::path& dir);

/// Channel coordinates are looked up in `coords`; an unknown name is a
/// configuration error naming the channel and the file.
prep::RawTrial read_raw_csv(const std::filesystem::path& path, double fs,
                            const prep::CoordinateTable& coords);
void write_raw_csv(const prep::RawTrial& trial, const std::filesystem::path& path);

/// Runs every trial through preprocess_trial and assembles the corpus.
Corpus preprocess_raw_dataset(const std::filesystem::path& dir, const prep::PreprocessConfig& cfg,
                              const prep::CoordinateTable& coords = prep::standard_coordinates(),
                              const prep::Montage& montage = prep::Montage::standard());

}  // namespace lead::io
