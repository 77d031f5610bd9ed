// SPDX-License-Identifier: Apache-2.0
#include "thanora/rank_allocator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "thanora/error.hpp"

namespace thanora {

void AllocationConfig::validate() const {
  if (num_tasks == 0) throw ConfigError("allocation: num_tasks must be positive");
  if (r_min == 0) throw ConfigError("allocation: r_min must be positive");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("allocation: tau must be positive");
  const std::size_t coop = coop_rank(r_total, num_tasks);
  if (r_min * num_tasks + coop > r_total) {
    throw BudgetError(fmt::format(
        "allocation: r_min {} x {} tasks does not fit in r_task = {} (r_total {}, coop {})", r_min,
        num_tasks, r_total - coop, r_total, coop));
  }
}

std::size_t RankAllocation::total() const {
  return std::accumulate(task_ranks.begin(), task_ranks.end(), coop_rank);
}

std::size_t coop_rank(std::size_t r_total, std::size_t num_tasks) {
  if (num_tasks == 0) throw BudgetError("coop_rank: at least one task is required");
  if (r_total < num_tasks + 1) {
    throw BudgetError(
        fmt::format("coop_rank: r_total {} is below num_tasks + 1 = {}", r_total, num_tasks + 1));
  }
  return r_total / (num_tasks + 1);
}

std::vector<double> soft_weights(std::span<const double> entropies, double tau) {
  if (entropies.empty()) return {};
  for (double h : entropies) {
    if (!std::isfinite(h)) throw NumericError("soft_weights: non-finite entropy");
  }
  const double top = *std::max_element(entropies.begin(), entropies.end());
  std::vector<double> w(entropies.size());
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp((entropies[i] - top) / tau);
    z += w[i];
  }
  for (double& x : w) x /= z;
  return w;
}

RankAllocation allocate(std::span<const double> entropies, const AllocationConfig& cfg,
                        std::size_t layer_id) {
  if (entropies.size() != cfg.num_tasks) {
    throw DimensionError(fmt::format("allocate: {} entropies for {} tasks", entropies.size(),
                                     cfg.num_tasks));
  }
  cfg.validate();
  const std::size_t t_count = cfg.num_tasks;

  RankAllocation out;
  out.layer_id = layer_id;
  out.coop_rank = coop_rank(cfg.r_total, t_count);
  const std::size_t r_task = cfg.r_total - out.coop_rank;
  out.soft_weights = soft_weights(entropies, cfg.tau);

  std::vector<double> frac(t_count);
  out.task_ranks.resize(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    const double raw = static_cast<double>(r_task) * out.soft_weights[t];
    const double fl = std::floor(raw);
    frac[t] = raw - fl;
    out.task_ranks[t] = std::max(cfg.r_min, static_cast<std::size_t>(fl));
  }

  std::size_t assigned = std::accumulate(out.task_ranks.begin(), out.task_ranks.end(),
                                         std::size_t{0});
  if (assigned < r_task) {
    std::vector<std::size_t> order(t_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; assigned < r_task; ++i, ++assigned) {
      ++out.task_ranks[order[i % t_count]];
    }
  }
  while (assigned > r_task) {
    // Largest allocation above r_min; ties go to the higher task index.
    std::size_t pick = t_count;
    for (std::size_t t = 0; t < t_count; ++t) {
      if (out.task_ranks[t] <= cfg.r_min) continue;
      if (pick == t_count || out.task_ranks[t] >= out.task_ranks[pick]) pick = t;
    }
    if (pick == t_count) throw BudgetError("allocate: cannot reduce below r_min");
    --out.task_ranks[pick];
    --assigned;
  }
  return out;
}

}  // namespace thanora
