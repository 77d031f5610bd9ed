// SPDX-License-Identifier: Apache-2.0
#include <numeric>

#include <gtest/gtest.h>

#include "thanora/error.hpp"
#include "thanora/pipeline.hpp"

namespace thanora {
namespace {

ExperimentConfig small_config(ArmMode mode = ArmMode::hasi_spr, std::size_t tasks = 2) {
  ExperimentConfig cfg;
  cfg.model.dims = {16, 16, 16};
  cfg.model.nonlinearity = Nonlinearity::tanh;
  for (std::size_t t = 0; t < tasks; ++t) {
    TaskSpec s;
    s.task_id = "task" + std::to_string(t);
    s.true_ranks = {2, 2};
    s.spectrum_decay = 0.5 + double(t);
    s.noise_std = 0.01;
    s.num_train = 128;
    s.num_eval = 64;
    s.seed = 100 + t;
    s.input_floor = 0.01;
    cfg.tasks.push_back(s);
  }
  cfg.alloc.r_total = 12;
  cfg.alloc.r_min = 1;
  cfg.alloc.num_tasks = tasks;
  cfg.alloc.tau = 0.5;
  cfg.gamma = 2.0;
  cfg.lambda = 0.05;
  cfg.mode = mode;
  cfg.trainer.lr = 1e-3;
  cfg.trainer.steps = 20;
  cfg.trainer.batch = 8;
  cfg.trainer.log_every = 5;
  cfg.trainer.overlap_every = 10;
  cfg.preview_samples_per_task = 64;
  return cfg;
}

std::size_t total_rank(const ModelSnapshot& m, std::size_t layer) {
  return m.layers[layer].adapter.total_rank();
}

TEST(Pipeline, ZeroLambdaMakesRegularizedArmIdenticalToHasiOnly) {
  ExperimentConfig a = small_config(ArmMode::hasi_only);
  ExperimentConfig b = small_config(ArmMode::hasi_spr);
  b.lambda = 0.0;
  const ExperimentResult ra = run(a);
  const ExperimentResult rb = run(b);
  for (std::size_t l = 0; l < 2; ++l) EXPECT_EQ(ra.merged_weights[l], rb.merged_weights[l]);
  EXPECT_EQ(ra.final_eval_losses, rb.final_eval_losses);
}

TEST(Pipeline, RunsAreDeterministic) {
  const ExperimentResult a = run(small_config());
  const ExperimentResult b = run(small_config());
  EXPECT_EQ(a.final_eval_losses, b.final_eval_losses);
  EXPECT_EQ(a.merged_weights[1], b.merged_weights[1]);
  EXPECT_EQ(a.log.size(), b.log.size());
}

TEST(Pipeline, EveryArmSpendsTheSameRankBudget) {
  for (auto mode : {ArmMode::lora_baseline, ArmMode::hasi_only, ArmMode::hasi_spr}) {
    const ExperimentResult r = run(small_config(mode));
    for (std::size_t l = 0; l < 2; ++l) EXPECT_EQ(total_rank(r.model, l), 12u) << to_string(mode);
  }
}

TEST(Pipeline, AllocationsSumToBudgetWithCoopShare) {
  const ExperimentResult r = run(small_config());
  ASSERT_EQ(r.allocations.size(), 2u);
  for (const auto& a : r.allocations) {
    EXPECT_EQ(a.coop_rank, 4u);
    EXPECT_EQ(std::accumulate(a.task_ranks.begin(), a.task_ranks.end(), std::size_t{0}) + a.coop_rank, 12u);
  }
}

TEST(Pipeline, OutputPreservingInitLeavesInitialLossAtBase) {
  ExperimentConfig cfg = small_config(ArmMode::hasi_only);
  cfg.trainer.steps = 0;
  const ExperimentResult r = run(cfg);
  const ModelSnapshot base = build_base_model(cfg.model);
  const auto data = build_datasets(cfg, base);
  for (std::size_t t = 0; t < data.size(); ++t) {
    EXPECT_NEAR(r.initial_eval_losses[t], eval_loss(base, data[t]), 1e-9);
  }
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_LE(max_abs_diff(r.merged_weights[l], r.original_weights[l]), 1e-9);
  }
}

TEST(Pipeline, MergedWeightsReproduceAdaptedOutputs) {
  const ExperimentResult r = run(small_config());
  EXPECT_LE(r.max_merge_deviation, 1e-9);
  for (std::size_t t = 0; t < r.final_eval_losses.size(); ++t) {
    EXPECT_NEAR(r.final_eval_losses[t], r.merged_eval_losses[t], 1e-9);
  }
}

TEST(Pipeline, SingleTaskHasNoOverlapPairs) {
  const ExperimentResult r = run(small_config(ArmMode::hasi_spr, 1));
  EXPECT_EQ(r.mean_overlap, 0.0);
  EXPECT_TRUE(r.final_overlap.empty());
  EXPECT_EQ(r.allocations[0].coop_rank, 6u);
  EXPECT_EQ(r.allocations[0].task_ranks[0], 6u);
}

TEST(Pipeline, TrainingReducesAverageLoss) {
  ExperimentConfig cfg = small_config(ArmMode::hasi_only);
  cfg.trainer.steps = 200;
  const ExperimentResult r = run(cfg);
  const double before =
      std::accumulate(r.initial_eval_losses.begin(), r.initial_eval_losses.end(), 0.0) / 2.0;
  EXPECT_LT(r.average_eval_loss, before);
}

TEST(Pipeline, LogCadence) {
  const ExperimentResult r = run(small_config());
  ASSERT_FALSE(r.log.empty());
  EXPECT_EQ(r.log.front().step, 0u);
  EXPECT_EQ(r.log.back().step, 20u);
  EXPECT_EQ(r.log.size(), 5u);
  for (const auto& row : r.log) EXPECT_EQ(row.task_losses.size(), 2u);
}

TEST(Pipeline, EntropyOverrideDrivesAllocation) {
  ExperimentConfig cfg = small_config();
  cfg.entropy_override = std::vector<std::vector<double>>{{1.0, 0.0}, {0.0, 1.0}};
  cfg.trainer.steps = 0;
  const ExperimentResult r = run(cfg);
  EXPECT_GT(r.allocations[0].task_ranks[0], r.allocations[0].task_ranks[1]);
  EXPECT_LT(r.allocations[1].task_ranks[0], r.allocations[1].task_ranks[1]);
}

TEST(CollapseProbe, RequiresMatchingRuns) {
  ExperimentConfig off = small_config(ArmMode::hasi_only);
  off.trainer.steps = 5;
  ExperimentConfig on = small_config(ArmMode::hasi_spr);
  on.trainer.steps = 5;
  const ExperimentResult a = run(off);
  const ExperimentResult b = run(on);
  const CollapseComparison c = collapse_probe(a, b);
  EXPECT_DOUBLE_EQ(c.ratio, c.overlap_with_spr / c.overlap_without_spr);
  EXPECT_THROW(collapse_probe(b, a), ConfigError);
  on.trainer.steps = 6;
  EXPECT_THROW(collapse_probe(a, run(on)), ConfigError);
}

TEST(CollapseProbe, LargeLambdaLowersOverlap) {
  ExperimentConfig off = small_config(ArmMode::hasi_only);
  ExperimentConfig on = small_config(ArmMode::hasi_spr);
  on.lambda = 1.0;
  const CollapseComparison c = collapse_probe(run(off), run(on));
  EXPECT_LE(c.overlap_with_spr, c.overlap_without_spr);
  EXPECT_LT(c.ratio, 1.0);
}

TEST(CollapseProbe, ZeroLambdaGivesIdenticalOverlaps) {
  ExperimentConfig on = small_config(ArmMode::hasi_spr);
  on.lambda = 0.0;
  const CollapseComparison c = collapse_probe(run(small_config(ArmMode::hasi_only)), run(on));
  EXPECT_EQ(c.overlap_with_spr, c.overlap_without_spr);
  EXPECT_EQ(c.ratio, 1.0);
}

TEST(Validate, RejectsBadConfigs) {
  ExperimentConfig cfg = small_config();
  cfg.alloc.r_total = 17;
  EXPECT_THROW(cfg.validate(), BudgetError);
  cfg = small_config();
  cfg.tasks[1].task_id = "task0";
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.tasks[0].task_id = "coop";
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.lambda = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(arm_mode_from_string("hasi"), ConfigError);
}

TEST(DeriveSeed, StreamsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

}  // namespace
}  // namespace thanora
