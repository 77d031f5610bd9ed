// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "thanora/error.hpp"
#include "thanora/synthetic_tasks.hpp"
#include "thanora/task_prior.hpp"

namespace thanora {
namespace {

ModelSnapshot base_model(std::vector<std::size_t> dims, Nonlinearity nl = Nonlinearity::none) {
  return model_from_weights(random_base_weights(dims, BaseInit::orthogonal, 5), nl);
}

TaskSpec spec(std::string id, std::vector<std::size_t> ranks, double decay, std::uint64_t seed) {
  TaskSpec s;
  s.task_id = std::move(id);
  s.true_ranks = std::move(ranks);
  s.spectrum_decay = decay;
  s.num_train = 256;
  s.num_eval = 64;
  s.seed = seed;
  s.input_floor = 0.01;
  return s;
}

// Independent per-sample loop: (1/N) Σ_n Σ_i (y_in − ŷ_in)².
double loop_mse(const DenseMatrix& pred, const DenseMatrix& target) {
  double s = 0.0;
  for (std::size_t n = 0; n < pred.cols(); ++n)
    for (std::size_t i = 0; i < pred.rows(); ++i) {
      const double e = pred(i, n) - target(i, n);
      s += e * e;
    }
  return s / double(pred.cols());
}

TEST(SyntheticTasks, NoiselessTargetsComeFromTeacher) {
  const ModelSnapshot base = base_model({12, 12, 12}, Nonlinearity::tanh);
  const std::vector<TaskSpec> specs{spec("a", {2, 2}, 1.0, 1), spec("b", {3, 1}, 1.0, 2)};
  const auto data = generate_mixture(specs, base, 9);
  for (const auto& ds : data) {
    std::vector<DenseMatrix> teacher = base.merged_weights();
    for (std::size_t l = 0; l < teacher.size(); ++l) teacher[l] += ds.true_deltas[l];
    EXPECT_LE(max_abs_diff(forward_dense(teacher, Nonlinearity::tanh, ds.train_inputs), ds.train_targets),
              1e-12);
    EXPECT_LE(max_abs_diff(forward_dense(teacher, Nonlinearity::tanh, ds.eval_inputs), ds.eval_targets),
              1e-12);
  }
}

TEST(SyntheticTasks, TrueUpdatesHaveRequestedRankAndAreMutuallyOrthogonal) {
  const ModelSnapshot base = base_model({16, 16, 16});
  const std::vector<TaskSpec> specs{spec("a", {3, 2}, 1.0, 1), spec("b", {2, 4}, 1.0, 2)};
  const auto data = generate_mixture(specs, base, 4);
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_EQ(numerical_rank(data[0].true_deltas[l]), specs[0].true_ranks[l]);
    EXPECT_EQ(numerical_rank(data[1].true_deltas[l]), specs[1].true_ranks[l]);
    EXPECT_LE(std::abs(frobenius_inner(data[0].true_deltas[l], data[1].true_deltas[l])), 1e-12);
    EXPECT_LE(max_abs(matmul_tn(data[0].true_deltas[l], data[1].true_deltas[l])), 1e-12);
    EXPECT_LE(max_abs(matmul_nt(data[0].true_deltas[l], data[1].true_deltas[l])), 1e-12);
  }
}

TEST(SyntheticTasks, ZeroNoiseSplitsHaveExpectedShapes) {
  const ModelSnapshot base = base_model({8, 6});
  const std::vector<TaskSpec> specs{spec("only", {3}, 1.0, 3)};
  const auto data = generate_mixture(specs, base, 1);
  EXPECT_EQ(data[0].train_inputs.rows(), 8u);
  EXPECT_EQ(data[0].train_inputs.cols(), 256u);
  EXPECT_EQ(data[0].eval_targets.rows(), 6u);
  EXPECT_EQ(data[0].eval_targets.cols(), 64u);
  EXPECT_EQ(data[0].input_spectrum.size(), 8u);
  EXPECT_DOUBLE_EQ(data[0].input_spectrum[1], 0.5);
}

TEST(SyntheticTasks, SharperSpectrumGivesLowerEntropy) {
  const ModelSnapshot base = base_model({16, 16});
  const double decays[] = {0.0625, 0.25, 1.0, 2.0, 4.0};
  double previous = std::numeric_limits<double>::infinity();
  for (double decay : decays) {
    TaskSpec s = spec("t", {4}, decay, 21);
    s.num_train = 2000;
    const TaskDataset ds = generate(s, base);
    CovarianceAccumulator acc(16);
    acc.accumulate(ds.train_inputs);
    const TaskPrior p = compute_prior("t", 0, base.layers[0].base_w, acc, 8);
    EXPECT_LT(p.entropy, previous) << "decay " << decay;
    previous = p.entropy;
  }
}

TEST(SyntheticTasks, ReproducibleForFixedSeeds) {
  const ModelSnapshot base = base_model({10, 10});
  std::vector<TaskSpec> specs{spec("a", {2}, 1.0, 1), spec("b", {2}, 0.5, 2)};
  specs[0].noise_std = 0.1;
  const auto x = generate_mixture(specs, base, 8);
  const auto y = generate_mixture(specs, base, 8);
  for (std::size_t t = 0; t < 2; ++t) {
    EXPECT_EQ(x[t].train_inputs, y[t].train_inputs);
    EXPECT_EQ(x[t].train_targets, y[t].train_targets);
    EXPECT_EQ(x[t].true_deltas[0], y[t].true_deltas[0]);
  }
  const auto z = generate_mixture(specs, base, 9);
  EXPECT_FALSE(z[0].true_deltas[0] == x[0].true_deltas[0]);
}

TEST(SyntheticTasks, EvalLossMatchesLoopOracle) {
  const ModelSnapshot base = base_model({8, 8, 8}, Nonlinearity::tanh);
  TaskSpec s = spec("a", {2, 2}, 1.0, 6);
  s.noise_std = 0.05;
  const TaskDataset ds = generate(s, base);
  const DenseMatrix pred = forward_dense(base.merged_weights(), Nonlinearity::tanh, ds.eval_inputs);
  EXPECT_NEAR(eval_loss(base, ds), loop_mse(pred, ds.eval_targets), 1e-12);
  EXPECT_GT(eval_loss(base, ds), 0.0);
}

TEST(SyntheticTasks, RejectsUnplaceableRanks) {
  const ModelSnapshot base = base_model({8, 8});
  const std::vector<TaskSpec> wide{spec("a", {5}, 1.0, 1), spec("b", {1}, 1.0, 2)};
  EXPECT_THROW(generate_mixture(wide, base, 1), DimensionError);
  const std::vector<TaskSpec> layers{spec("a", {1, 1}, 1.0, 1)};
  EXPECT_THROW(generate_mixture(layers, base, 1), DimensionError);
  TaskSpec bad = spec("a", {1}, 0.0, 1);
  EXPECT_THROW(generate(bad, base), ConfigError);
}

}  // namespace
}  // namespace thanora
