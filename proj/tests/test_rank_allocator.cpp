// SPDX-License-Identifier: Apache-2.0
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "thanora/error.hpp"
#include "thanora/rank_allocator.hpp"

namespace thanora {
namespace {

AllocationConfig config(std::size_t r_total, std::size_t tasks, double tau = 0.2, std::size_t r_min = 2) {
  AllocationConfig c;
  c.r_total = r_total;
  c.num_tasks = tasks;
  c.tau = tau;
  c.r_min = r_min;
  return c;
}

TEST(CoopRank, FloorOfBudgetOverTasksPlusOne) {
  EXPECT_EQ(coop_rank(64, 2), 21u);
  EXPECT_EQ(coop_rank(64, 4), 12u);
  EXPECT_EQ(coop_rank(6, 2), 2u);
  EXPECT_THROW(coop_rank(2, 2), BudgetError);
}

TEST(Allocate, WorkedExample) {
  // Oracle from a scalar recomputation: weights (0.9241418, 0.0758582),
  // raw shares (39.74, 3.26), floors (39, 3), one unit to task 0.
  const std::vector<double> h{1.0, 0.5};
  const RankAllocation a = allocate(h, config(64, 2));
  EXPECT_EQ(a.coop_rank, 21u);
  EXPECT_EQ(a.task_ranks, (std::vector<std::size_t>{40, 3}));
  EXPECT_NEAR(a.soft_weights[0], 0.92414, 1e-5);
  EXPECT_NEAR(a.soft_weights[1], 0.07586, 1e-5);
}

TEST(Allocate, EqualEntropiesGiveExtraUnitToFirstTask) {
  const std::vector<double> h{0.7, 0.7};
  const RankAllocation a = allocate(h, config(64, 2));
  EXPECT_EQ(a.task_ranks, (std::vector<std::size_t>{22, 21}));
  EXPECT_EQ(a.coop_rank, 21u);
}

TEST(Allocate, HugeTemperatureFlattensWeights) {
  const std::vector<double> h{0.1, 2.0, 0.3};
  const RankAllocation a = allocate(h, config(64, 3, 1e9));
  EXPECT_EQ(a.task_ranks, (std::vector<std::size_t>{16, 16, 16}));
  EXPECT_EQ(a.coop_rank, 16u);
}

TEST(Allocate, MinimumRankRaisesSmallTasksAndBudgetStillHolds) {
  // Scalar recomputation: floors (10, 0, 0, 0) -> raised to (10, 2, 2, 2),
  // overshoot 2 taken from the largest allocation.
  const std::vector<double> h{3.0, 0.0, 0.0, 0.0};
  const RankAllocation a = allocate(h, config(20, 4));
  EXPECT_EQ(a.coop_rank, 4u);
  EXPECT_EQ(a.task_ranks, (std::vector<std::size_t>{10, 2, 2, 2}));
}

TEST(Allocate, SingleTask) {
  const std::vector<double> h{1.3};
  const RankAllocation a = allocate(h, config(64, 1));
  EXPECT_EQ(a.coop_rank, 32u);
  EXPECT_EQ(a.task_ranks, (std::vector<std::size_t>{32}));
}

TEST(Allocate, InfeasibleMinimumIsRejected) {
  const std::vector<double> h{1.0, 1.0, 1.0};
  EXPECT_THROW(allocate(h, config(8, 3, 0.2, 3)), BudgetError);
  const std::vector<double> two{1.0, 1.0};
  EXPECT_THROW(allocate(two, config(64, 3)), DimensionError);
}

TEST(Allocate, ExactBudgetAndLowerBoundOnRandomTables) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> h(0.0, 4.0);
  std::uniform_real_distribution<double> tau(0.05, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t t = 1 + trial % 6;
    const std::size_t r_total = 64 + trial % 37;
    std::vector<double> e(t);
    for (double& v : e) v = h(rng);
    const AllocationConfig c = config(r_total, t, tau(rng));
    const RankAllocation a = allocate(e, c);
    EXPECT_EQ(a.total(), r_total);
    EXPECT_EQ(std::accumulate(a.task_ranks.begin(), a.task_ranks.end(), std::size_t{0}) + a.coop_rank,
              r_total);
    for (std::size_t r : a.task_ranks) EXPECT_GE(r, c.r_min);
  }
}

TEST(Allocate, ShiftInvariant) {
  const std::vector<double> h{0.3, 1.1, 0.8};
  std::vector<double> shifted = h;
  for (double& v : shifted) v += 17.0;
  const AllocationConfig c = config(64, 3);
  EXPECT_EQ(allocate(h, c).task_ranks, allocate(shifted, c).task_ranks);
}

TEST(SoftWeights, MonotoneInEntropyAndNormalized) {
  const std::vector<double> h{0.2, 1.5, 0.9, 1.5};
  const std::vector<double> w = soft_weights(h, 0.3);
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-15);
  EXPECT_GT(w[1], w[2]);
  EXPECT_GT(w[2], w[0]);
  EXPECT_DOUBLE_EQ(w[1], w[3]);
}

TEST(Allocate, Deterministic) {
  const std::vector<double> h{0.4, 0.9};
  const AllocationConfig c = config(40, 2);
  const RankAllocation a = allocate(h, c, 3);
  const RankAllocation b = allocate(h, c, 3);
  EXPECT_EQ(a.task_ranks, b.task_ranks);
  EXPECT_EQ(a.layer_id, 3u);
}

}  // namespace
}  // namespace thanora
