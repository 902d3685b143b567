// SPDX-License-Identifier: Apache-2.0
#include "lead/batching.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "lead/error.hpp"
#include "lead/rng.hpp"

namespace lead::batch {

std::uint64_t epoch_seed(std::uint64_t run_seed, std::uint64_t epoch) {
  return hash_combine(run_seed, epoch);
}

BatchPlan shuffle_indices(std::span<const std::int64_t> subject_ids, std::size_t batch_size,
                          std::size_t group_size, std::uint64_t seed) {
  if (subject_ids.empty()) fail(ErrorKind::kData, "cannot shuffle an empty index set");
  if (group_size == 0 || batch_size == 0)
    fail(ErrorKind::kConfig, "batch_size and group_size must be positive");
  if (batch_size % group_size != 0)
    fail(ErrorKind::kConfig, "batch_size " + std::to_string(batch_size) +
                                 " is not a multiple of group_size " + std::to_string(group_size));

  const std::size_t n = subject_ids.size();
  std::vector<std::size_t> sorted(n);
  std::iota(sorted.begin(), sorted.end(), std::size_t{0});
  std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
    return subject_ids[a] < subject_ids[b];
  });

  // Only full groups are shuffled; a trailing partial group stays last so it
  // cannot push later groups across a batch boundary.
  std::vector<std::size_t> group_starts;
  for (std::size_t i = 0; i < n; i += group_size) group_starts.push_back(i);
  const std::size_t full = n / group_size;
  Rng rng(seed);
  rng.shuffle(group_starts.begin(), group_starts.begin() + static_cast<std::ptrdiff_t>(full));

  BatchPlan plan;
  plan.batch_size = batch_size;
  plan.group_size = group_size;
  plan.epoch_seed = seed;
  plan.order.reserve(n);
  for (std::size_t start : group_starts)
    for (std::size_t i = start; i < std::min(n, start + group_size); ++i)
      plan.order.push_back(sorted[i]);

  for (std::size_t b = 0; b < n; b += batch_size) {
    const auto first = plan.order.begin() + static_cast<std::ptrdiff_t>(b);
    const auto last = plan.order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch_size));
    rng.shuffle(first, last);
  }
  return plan;
}

std::vector<std::vector<std::size_t>> make_batches(const BatchPlan& plan, bool drop_last) {
  std::vector<std::vector<std::size_t>> out;
  const std::size_t n = plan.order.size();
  if (plan.batch_size == 0) fail(ErrorKind::kConfig, "batch_size must be positive");
  for (std::size_t b = 0; b < n; b += plan.batch_size) {
    const std::size_t end = std::min(n, b + plan.batch_size);
    if (drop_last && end - b < plan.batch_size) break;
    out.emplace_back(plan.order.begin() + static_cast<std::ptrdiff_t>(b),
                     plan.order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace lead::batch
