// SPDX-License-Identifier: Apache-2.0
#include "lead/metrics.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "lead/error.hpp"

namespace lead::metrics {
using nlohmann::json;

double accuracy(std::span<const std::int32_t> truth, std::span<const std::int32_t> pred) {
  if (truth.size() != pred.size()) fail(ErrorKind::kShape, "accuracy: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double macro_f1(std::span<const std::int32_t> truth, std::span<const std::int32_t> pred) {
  if (truth.size() != pred.size()) fail(ErrorKind::kShape, "macro_f1: length mismatch");
  if (truth.empty()) return 0.0;
  std::set<std::int32_t> classes(truth.begin(), truth.end());
  classes.insert(pred.begin(), pred.end());
  double sum = 0.0;
  for (std::int32_t c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      else if (pred[i] == c) ++fp;
      else if (truth[i] == c) ++fn;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    sum += denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
  }
  return sum / static_cast<double>(classes.size());
}

std::int32_t vote_label(const std::map<std::int32_t, std::int64_t>& tally, double mean_positive_prob) {
  if (tally.empty()) fail(ErrorKind::kData, "cannot vote on an empty tally");
  std::int64_t best = 0;
  for (const auto& [c, n] : tally) best = std::max(best, n);
  std::vector<std::int32_t> tied;
  for (const auto& [c, n] : tally)
    if (n == best) tied.push_back(c);
  if (tied.size() == 1) return tied.front();
  if (tied.size() == 2 && tied[0] == 0 && tied[1] == kPositiveClass)
    return mean_positive_prob >= 0.5 ? kPositiveClass : 0;
  return tied.back();
}

VoteResult vote_subjects(std::span<const SamplePrediction> predictions, const io::LabelTable& truth) {
  std::map<std::int32_t, SubjectVote> by_subject;
  for (const auto& p : predictions) {
    const auto label = truth.label_of(p.subject_id);
    if (!label) fail(ErrorKind::kData, "prediction for unknown subject " + std::to_string(p.subject_id));
    auto& v = by_subject[p.subject_id];
    v.subject_id = p.subject_id;
    v.truth = *label;
    ++v.tally[p.predicted];
    v.mean_positive_prob += p.positive_prob;
  }
  VoteResult out;
  std::vector<std::int32_t> t, y;
  for (auto& [id, v] : by_subject) {
    std::int64_t n = 0;
    for (const auto& [c, k] : v.tally) n += k;
    v.mean_positive_prob /= static_cast<double>(n);
    v.label = vote_label(v.tally, v.mean_positive_prob);
    t.push_back(v.truth);
    y.push_back(v.label);
    out.subjects.push_back(v);
  }
  out.accuracy = accuracy(t, y);
  out.macro_f1 = macro_f1(t, y);
  return out;
}

double MetricsReport::mean_sample_f1() const {
  if (datasets.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : datasets) s += d.sample_macro_f1;
  return s / static_cast<double>(datasets.size());
}

double MetricsReport::mean_subject_f1() const {
  if (datasets.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : datasets) s += d.subject_macro_f1;
  return s / static_cast<double>(datasets.size());
}

const DatasetMetrics& MetricsReport::at(const std::string& dataset_id) const {
  for (const auto& d : datasets)
    if (d.dataset_id == dataset_id) return d;
  fail(ErrorKind::kData, "report has no dataset '" + dataset_id + "'");
}

namespace {

json dataset_json(const DatasetMetrics& m, bool with_votes) {
  json j{{"dataset_id", m.dataset_id},
         {"n_samples", m.n_samples},
         {"n_subjects", m.n_subjects},
         {"sample_accuracy", m.sample_accuracy},
         {"sample_macro_f1", m.sample_macro_f1},
         {"subject_accuracy", m.subject_accuracy},
         {"subject_macro_f1", m.subject_macro_f1}};
  if (with_votes) {
    json votes = json::array();
    for (const auto& v : m.votes) {
      json tally = json::object();
      for (const auto& [c, n] : v.tally) tally[std::to_string(c)] = n;
      votes.push_back({{"subject_id", v.subject_id},
                       {"truth", v.truth},
                       {"label", v.label},
                       {"mean_positive_prob", v.mean_positive_prob},
                       {"tally", tally}});
    }
    j["subjects"] = votes;
  }
  return j;
}

}  // namespace

std::string to_json(const MetricsReport& report, int indent) {
  json j;
  j["split"] = report.split;
  j["datasets"] = json::array();
  for (const auto& d : report.datasets) j["datasets"].push_back(dataset_json(d, true));
  j["mean_sample_macro_f1"] = report.mean_sample_f1();
  j["mean_subject_macro_f1"] = report.mean_subject_f1();
  return j.dump(indent);
}

std::string to_json(const DatasetMetrics& m, int indent) { return dataset_json(m, false).dump(indent); }

}  // namespace lead::metrics
