// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lead/sample.hpp"

namespace lead::io {

// On-disk corpus layout:
//   <root>/manifest.json
//   <root>/Feature/feature_<ID>.leadt   one file per subject, [N, T, C] float32
//   <root>/Label/label.leadl            one (label, subject_id) row per subject

inline constexpr std::string_view kTensorMagic = "LEADT";
inline constexpr std::string_view kLabelMagic = "LEADL";
inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::uint16_t kLabelVersion = 1;
/// magic(5) + version(2) + n(4) + t(4) + c(4)
inline constexpr std::size_t kTensorHeaderBytes = 19;

struct TensorHeader {
  std::uint16_t version = kTensorVersion;
  std::uint32_t n_samples = 0;
  std::uint32_t timesteps = 0;
  std::uint32_t channels = 0;
};

/// Writes one subject's windows. `empty_dims` gives (T, C) for the header
/// when `samples` is empty; otherwise dims come from the samples, which
/// must all agree.
void write_subject_tensor(std::span<const EpochSample> samples,
                          const std::filesystem::path& path,
                          std::pair<std::uint32_t, std::uint32_t> empty_dims = {
                              kWindow, kMontageSize});

TensorHeader read_tensor_header(const std::filesystem::path& path);
SampleList read_subject_tensor(const std::filesystem::path& path,
                               const SampleTag& tag = {});

struct LabelRow {
  std::int32_t label = 0;
  std::int32_t subject_id = 0;
  bool operator==(const LabelRow&) const = default;
};

struct LabelTable {
  std::vector<LabelRow> rows;

  /// Unique, contiguous 1..N subject IDs; labels within `classes` when given.
  void validate(std::span<const std::int32_t> classes = {}) const;
  std::optional<std::int32_t> label_of(std::int32_t subject_id) const;
  std::size_t size() const { return rows.size(); }
};

void write_label_table(const LabelTable& table, const std::filesystem::path& path);
LabelTable read_label_table(const std::filesystem::path& path);

struct SubjectEntry {
  std::int32_t subject_id = 0;
  std::string file;  // relative to the corpus root
  std::uint32_t n_samples = 0;
};

struct CorpusManifest {
  std::string dataset_id;
  double sampling_rate = kTargetRate;
  std::uint32_t n_channels = kMontageSize;
  std::uint32_t n_timesteps = kWindow;
  std::vector<SubjectEntry> subjects;
  std::map<std::int32_t, std::string> class_names;
  std::string provenance;
};

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);
CorpusManifest read_manifest(const std::filesystem::path& path);

/// Fully loaded corpus. `samples` are grouped by subject in ascending ID order.
struct Corpus {
  CorpusManifest manifest;
  LabelTable labels;
  SampleList samples;

  std::vector<std::int32_t> class_set() const;
};

/// Builds the manifest from samples and labels; every labelled subject gets a
/// file entry even when it has no windows.
Corpus assemble_corpus(std::string dataset_id, LabelTable labels, SampleList samples,
                       std::map<std::int32_t, std::string> class_names,
                       std::string provenance);

std::string feature_file_name(std::int32_t subject_id);

void write_corpus(const Corpus& corpus, const std::filesystem::path& root);
/// Reads and cross-checks manifest, labels and every tensor header.
Corpus load_corpus(const std::filesystem::path& root);

// --- subject-independent splitting ---------------------------------------

enum class Split { kTrain, kVal, kTest };
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct SplitAssignment {
  std::map<std::int32_t, Split> by_subject;
  std::uint64_t seed = 0;
  SplitRatios ratios;
  std::vector<std::string> warnings;

  Split of(std::int32_t subject_id) const;
  std::vector<std::int32_t> subjects(Split split) const;
};

/// Stratified by class: subjects of each class are shuffled with a generator
/// keyed on (seed, dataset_id, class) and cut by the ratios. A class with
/// fewer subjects than non-empty splits is still assigned, with a warning.
SplitAssignment split_subjects(const LabelTable& labels, SplitRatios ratios,
                               std::uint64_t seed, std::string_view dataset_id = {});

/// Samples whose subject falls in `split`, in stored order.
SampleList select_split(const Corpus& corpus, const SplitAssignment& assignment,
                        Split split);

}  // namespace lead::io
