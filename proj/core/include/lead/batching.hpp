// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lead::batch {

struct BatchPlan {
  std::vector<std::size_t> order;  // permutation of 0..N-1
  std::size_t batch_size = 512;
  std::size_t group_size = 2;
  std::uint64_t epoch_seed = 0;
};

/// Per-epoch seed derived from the run seed.
std::uint64_t epoch_seed(std::uint64_t run_seed, std::uint64_t epoch);

/// Indices sorted by subject (index as secondary key), cut into groups of
/// `group_size`, full groups shuffled (a partial group stays last), cut into batches of `batch_size`, indices
/// shuffled within each batch. batch_size must be a multiple of group_size.
BatchPlan shuffle_indices(std::span<const std::int64_t> subject_ids, std::size_t batch_size,
                          std::size_t group_size, std::uint64_t epoch_seed);

/// Consecutive chunks of plan.order; a short final chunk is dropped when
/// `drop_last` is set.
std::vector<std::vector<std::size_t>> make_batches(const BatchPlan& plan, bool drop_last);

}  // namespace lead::batch
