// SPDX-License-Identifier: Apache-2.0
//
// Teacher-student multi-task regression problems with known low-rank task
// updates. Each task owns a disjoint slice of a shared orthonormal basis on
// both sides of every layer, so ground-truth updates of different tasks are
// exactly orthogonal.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "thanora/linalg.hpp"
#include "thanora/model.hpp"

namespace thanora {

struct TaskSpec {
  std::string task_id;
  /// Rank of the ground-truth update at each layer.
  std::vector<std::size_t> true_ranks;
  /// Input covariance eigenvalues on the task's subspace are i^(-decay).
  double spectrum_decay = 1.0;
  double noise_std = 0.0;
  std::size_t num_train = 2048;
  std::size_t num_eval = 512;
  std::uint64_t seed = 0;
  /// Every non-zero singular value of a ground-truth update.
  double update_scale = 1.0;
  /// Isotropic variance added to every input direction.
  double input_floor = 0.0;
};

struct TaskDataset {
  std::string task_id;
  DenseMatrix train_inputs;   // d_0 x num_train
  DenseMatrix train_targets;  // d_L x num_train
  DenseMatrix eval_inputs;
  DenseMatrix eval_targets;
  std::vector<DenseMatrix> true_deltas;  // E_t^ℓ, one per layer
  /// Eigenvalues of the task's input covariance on its own subspace.
  std::vector<double> input_spectrum;
};

/// Generates all tasks of a mixture against the given frozen model. Task t
/// draws its inputs from the t-th block of a shared input basis (block width
/// d_0 / T); layer ℓ > 0 bases follow the base model's image of layer ℓ-1.
/// Throws DimensionError when the ranks cannot be placed disjointly.
std::vector<TaskDataset> generate_mixture(std::span<const TaskSpec> specs,
                                          const ModelSnapshot& base, std::uint64_t mixture_seed);

/// Single-task convenience wrapper; the task's own seed fixes the basis.
TaskDataset generate(const TaskSpec& spec, const ModelSnapshot& base);

/// Mean squared error of the model on the eval split.
double eval_loss(const ModelSnapshot& model, const TaskDataset& dataset);

/// Same, on the training split.
double train_loss(const ModelSnapshot& model, const TaskDataset& dataset);

}  // namespace thanora
