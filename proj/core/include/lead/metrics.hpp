// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lead/corpus_io.hpp"

namespace lead::metrics {

inline constexpr std::int32_t kPositiveClass = 1;

double accuracy(std::span<const std::int32_t> truth, std::span<const std::int32_t> pred);

/// Unweighted mean of per-class F1 over every class that occurs in either
/// `truth` or `pred`. F1 = 2TP / (2TP + FP + FN).
double macro_f1(std::span<const std::int32_t> truth, std::span<const std::int32_t> pred);

struct SamplePrediction {
  std::int32_t subject_id = 0;
  std::int32_t predicted = 0;
  double positive_prob = 0.0;  // probability of class 1
};

struct SubjectVote {
  std::int32_t subject_id = 0;
  std::int32_t truth = 0;
  std::map<std::int32_t, std::int64_t> tally;  // class -> window count
  double mean_positive_prob = 0.0;
  std::int32_t label = 0;
};

/// Modal class of the tally. A two-way tie between classes 0 and 1 goes to
/// the positive class when the mean positive probability is at least 0.5;
/// any other tie goes to the largest tied class index.
std::int32_t vote_label(const std::map<std::int32_t, std::int64_t>& tally, double mean_positive_prob);

struct VoteResult {
  std::vector<SubjectVote> subjects;  // ascending subject id
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Subjects with no predictions are left out.
VoteResult vote_subjects(std::span<const SamplePrediction> predictions, const io::LabelTable& truth);

struct DatasetMetrics {
  std::string dataset_id;
  std::size_t n_samples = 0;
  std::size_t n_subjects = 0;
  double sample_accuracy = 0.0;
  double sample_macro_f1 = 0.0;
  double subject_accuracy = 0.0;
  double subject_macro_f1 = 0.0;
  std::vector<SubjectVote> votes;
};

struct MetricsReport {
  std::string split;
  std::vector<DatasetMetrics> datasets;

  double mean_sample_f1() const;
  double mean_subject_f1() const;
  const DatasetMetrics& at(const std::string& dataset_id) const;
};

std::string to_json(const MetricsReport& report, int indent = 2);
std::string to_json(const DatasetMetrics& m, int indent = -1);

}  // namespace lead::metrics
