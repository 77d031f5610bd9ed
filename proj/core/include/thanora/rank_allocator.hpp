// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace thanora {

struct AllocationConfig {
  std::size_t r_total = 64;
  std::size_t r_min = 2;
  double tau = 0.2;
  std::size_t num_tasks = 1;

  /// Throws BudgetError / ConfigError when the budget cannot be met.
  void validate() const;
};

/// Per-layer split of the rank budget. Task ranks are indexed by task
/// declaration order.
struct RankAllocation {
  std::size_t layer_id = 0;
  std::vector<std::size_t> task_ranks;
  std::size_t coop_rank = 0;
  std::vector<double> soft_weights;

  std::size_t total() const;
};

/// floor(r_total / (num_tasks + 1)).
std::size_t coop_rank(std::size_t r_total, std::size_t num_tasks);

/// Softmax of entropies / tau, computed with the maximum subtracted.
std::vector<double> soft_weights(std::span<const double> entropies, double tau);

/// Splits r_total - coop_rank across tasks: floor of the softmax share,
/// raised to r_min, then units are added by descending fractional part (ties
/// to the lower task index) or removed from the largest allocation until the
/// task ranks sum to r_task exactly.
RankAllocation allocate(std::span<const double> entropies, const AllocationConfig& cfg,
                        std::size_t layer_id = 0);

}  // namespace thanora
