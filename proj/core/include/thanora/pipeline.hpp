// SPDX-License-Identifier: Apache-2.0
//
// End-to-end experiment driver: preview activations, per-task priors, rank
// allocation, adapter initialization, regularized training, merge and
// evaluation. Three arms share everything except initialization and the
// regularization weight.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thanora/hasi.hpp"
#include "thanora/model.hpp"
#include "thanora/rank_allocator.hpp"
#include "thanora/spr.hpp"
#include "thanora/synthetic_tasks.hpp"
#include "thanora/task_prior.hpp"

namespace thanora {

enum class ArmMode { lora_baseline, hasi_only, hasi_spr };

std::string_view to_string(ArmMode mode);
ArmMode arm_mode_from_string(std::string_view name);

struct ModelConfig {
  std::vector<std::size_t> dims{64, 64, 64};
  Nonlinearity nonlinearity = Nonlinearity::none;
  BaseInit base_init = BaseInit::orthogonal;
  std::uint64_t seed = 1;
};

struct TrainerConfig {
  double lr = 1e-2;
  std::size_t steps = 1000;
  std::size_t batch = 32;
  std::uint64_t seed = 7;
  /// Training-log cadence (rows at step 0, every log_every steps, and the end).
  std::size_t log_every = 50;
  /// Overlap-report and merge-equivalence cadence.
  std::size_t overlap_every = 100;
};

struct ExperimentConfig {
  ModelConfig model;
  std::vector<TaskSpec> tasks;
  /// Seed of the shared task bases.
  std::uint64_t data_seed = 3;
  AllocationConfig alloc;
  double gamma = 5.0;
  double lambda = 1e-4;
  ArmMode mode = ArmMode::hasi_spr;
  CompensationMode compensation_mode = CompensationMode::output_preserving;
  TrainerConfig trainer;
  std::size_t preview_samples_per_task = 500;
  /// Damping of the covariance inverse; negative selects default_damping.
  double damping = -1.0;
  /// Optional [layer][task] entropy table that replaces computed priors for
  /// allocation (priors are still computed for initialization).
  std::optional<std::vector<std::vector<double>>> entropy_override;

  /// Throws ConfigError or BudgetError.
  void validate() const;
};

struct TrainingLogRow {
  std::size_t step = 0;
  std::vector<double> task_losses;  // eval MSE per task
  double spr_total = 0.0;
  double total_loss = 0.0;          // mean task loss + lambda · spr_total
};

struct OverlapLogRow {
  std::size_t step = 0;
  OverlapReport report;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<std::string> task_ids;
  std::vector<DenseMatrix> original_weights;
  std::vector<std::vector<TaskPrior>> priors;  // [layer][task], empty for lora_baseline
  std::vector<RankAllocation> allocations;     // empty for lora_baseline
  ModelSnapshot model;                         // trained adapted model
  std::vector<DenseMatrix> merged_weights;
  std::vector<double> initial_eval_losses;
  std::vector<double> final_eval_losses;
  std::vector<double> merged_eval_losses;
  double average_eval_loss = 0.0;
  std::vector<OverlapReport> final_overlap;  // per layer
  double mean_overlap = 0.0;
  std::vector<TrainingLogRow> log;
  std::vector<OverlapLogRow> overlap_log;
  /// Largest factored-vs-merged output deviation seen at the sampled steps.
  double max_merge_deviation = 0.0;
  double seconds = 0.0;
};

/// Frozen base model for the configured dims and seed.
ModelSnapshot build_base_model(const ModelConfig& cfg);

std::vector<TaskDataset> build_datasets(const ExperimentConfig& cfg, const ModelSnapshot& base);

/// Covariance-aware priors [layer][task] from the first
/// `preview_samples_per_task` training inputs of every task, forwarded
/// through the frozen model.
std::vector<std::vector<TaskPrior>> compute_priors(const ModelSnapshot& base,
                                                   std::span<const TaskDataset> datasets,
                                                   std::size_t preview_samples, std::size_t r_total,
                                                   double damping = -1.0);

/// One allocation per layer from the [layer][task] entropy table.
std::vector<RankAllocation> allocate_layers(const std::vector<std::vector<double>>& entropies,
                                            const AllocationConfig& cfg);

std::vector<std::vector<double>> entropy_table(const std::vector<std::vector<TaskPrior>>& priors);

/// Adapted model for the configured arm.
ModelSnapshot initialize_model(const ExperimentConfig& cfg, const ModelSnapshot& base,
                               const std::vector<std::vector<TaskPrior>>& priors,
                               const std::vector<RankAllocation>& allocations);

/// Deterministic 64-bit seed for a numbered stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Round-robin mixed batch: column j comes from task (start + j) mod T.
class BatchSampler {
 public:
  BatchSampler(std::span<const TaskDataset> datasets, std::uint64_t seed);
  void next(std::size_t batch, DenseMatrix& inputs, DenseMatrix& targets);

 private:
  void reshuffle(std::size_t task);

  std::span<const TaskDataset> datasets_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> order_;
  std::vector<std::size_t> cursor_;
  std::size_t next_task_ = 0;
};

/// SGD over adapter factors on the mixed objective; fills the logs of `result`.
void train(ModelSnapshot& model, std::span<const TaskDataset> datasets, const TrainerConfig& cfg,
           double lambda, ExperimentResult& result);

/// Runs the configured arm end to end.
ExperimentResult run(const ExperimentConfig& cfg);

struct CollapseComparison {
  double overlap_without_spr = 0.0;
  double overlap_with_spr = 0.0;
  /// overlap_with_spr / overlap_without_spr (1 when both are 0).
  double ratio = 1.0;
};

/// Compares the final mean pairwise overlap of a hasi_only run against a
/// hasi_spr run. Throws ConfigError unless the two runs differ only in arm
/// and lambda.
CollapseComparison collapse_probe(const ExperimentResult& without_spr,
                                  const ExperimentResult& with_spr);

}  // namespace thanora
