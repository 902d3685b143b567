// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "lead/corpus_io.hpp"
#include "lead/error.hpp"
#include "lead/rng.hpp"

namespace lead::io {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  fail(ErrorKind::kConfig, "unknown split '" + std::string(name) + "' (train|val|test)");
}

Split SplitAssignment::of(std::int32_t subject_id) const {
  const auto it = by_subject.find(subject_id);
  if (it == by_subject.end())
    fail(ErrorKind::kData, "subject " + std::to_string(subject_id) + " has no split");
  return it->second;
}

std::vector<std::int32_t> SplitAssignment::subjects(Split split) const {
  std::vector<std::int32_t> out;
  for (const auto& [id, s] : by_subject)
    if (s == split) out.push_back(id);
  return out;
}

SplitAssignment split_subjects(const LabelTable& labels, SplitRatios ratios,
                               std::uint64_t seed, std::string_view dataset_id) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    fail(ErrorKind::kConfig, "split ratios must be non-negative and sum to 1");
  if (labels.rows.empty()) fail(ErrorKind::kData, "cannot split an empty label table");

  SplitAssignment out;
  out.seed = seed;
  out.ratios = ratios;

  std::vector<std::int32_t> classes;
  for (const auto& r : labels.rows) classes.push_back(r.label);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  const int nonempty = (ratios.train > 0) + (ratios.val > 0) + (ratios.test > 0);
  const std::uint64_t dataset_key = hash_string(dataset_id);

  for (const std::int32_t cls : classes) {
    std::vector<std::int32_t> ids;
    for (const auto& r : labels.rows)
      if (r.label == cls) ids.push_back(r.subject_id);
    std::sort(ids.begin(), ids.end());

    Rng rng(hash_combine(seed, dataset_key), static_cast<std::uint64_t>(cls));
    rng.shuffle(ids.begin(), ids.end());

    const auto n = static_cast<long>(ids.size());
    if (n < nonempty)
      out.warnings.push_back("class " + std::to_string(cls) + " has " + std::to_string(n) +
                             " subject(s), fewer than the " + std::to_string(nonempty) +
                             " splits; stratification is approximate");
    long n_test = std::lround(static_cast<double>(n) * ratios.test);
    long n_val = std::lround(static_cast<double>(n) * ratios.val);
    if (n_test + n_val > n) n_val = n - n_test;
    const long n_train = n - n_test - n_val;

    for (long i = 0; i < n; ++i) {
      const Split s = i < n_train ? Split::kTrain
                                  : (i < n_train + n_val ? Split::kVal : Split::kTest);
      out.by_subject[ids[static_cast<std::size_t>(i)]] = s;
    }
  }
  return out;
}

SampleList select_split(const Corpus& corpus, const SplitAssignment& assignment,
                        Split split) {
  SampleList out;
  for (const auto& s : corpus.samples)
    if (assignment.of(s.subject_id) == split) out.push_back(s);
  return out;
}

}  // namespace lead::io
