// SPDX-License-Identifier: Apache-2.0
//
// Blockwise low-rank adapters: task blocks built from covariance-aware SVD
// priors, a cooperative block, and the merge back into a dense weight.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "thanora/linalg.hpp"
#include "thanora/task_prior.hpp"

namespace thanora {

inline constexpr std::string_view kCoopBlockId = "coop";

struct TaskBlock {
  std::string task_id;
  DenseMatrix b;  // d_out x r_t
  DenseMatrix a;  // r_t x d_in

  std::size_t rank() const noexcept { return b.cols(); }
};

struct LayoutEntry {
  std::string block_id;
  std::size_t offset = 0;
  std::size_t width = 0;

  bool operator==(const LayoutEntry&) const = default;
};

/// Task blocks followed by the cooperative block, viewed as one pair of
/// concatenated factors B = [B_1, …, B_T, B_coop], A = [A_1; …; A_T; A_coop].
struct BlockAdapter {
  std::size_t layer_id = 0;
  std::size_t d_out = 0;
  std::size_t d_in = 0;
  std::vector<TaskBlock> task_blocks;
  DenseMatrix coop_b;  // d_out x r_coop
  DenseMatrix coop_a;  // r_coop x d_in
  double gamma = 1.0;
  std::vector<LayoutEntry> column_layout;

  std::size_t coop_rank() const noexcept { return coop_b.cols(); }
  std::size_t total_rank() const;

  DenseMatrix concatenated_b() const;
  DenseMatrix concatenated_a() const;

  /// Recomputes column_layout from the current blocks.
  void rebuild_layout();
  /// Shapes, layout partition and finiteness. Throws DimensionError.
  void validate() const;
};

enum class CompensationMode { output_preserving, injective };

std::string_view to_string(CompensationMode mode);
CompensationMode compensation_mode_from_string(std::string_view name);

/// A frozen base weight plus its adapter. The effective weight is
/// base_w + delta(adapter).
struct AdaptedLayer {
  DenseMatrix base_w;
  BlockAdapter adapter;
  CompensationMode compensation_mode = CompensationMode::output_preserving;
};

/// Leading r_t triples of the prior, split as b = √γ·U·√Σ, a = √γ·√Σ·V̂ so
/// that b·a = γ·Σ σᵢuᵢv̂ᵢᵀ.
TaskBlock build_task_block(const TaskPrior& prior, std::size_t r_t, double gamma);

/// Concatenates task blocks in the given order and appends a cooperative
/// block of width r_coop: A_coop ~ √γ·kaiming_uniform(fan_in = d_in) drawn
/// from `seed`, B_coop = 0. When expected_total is set the widths must add
/// up to it.
BlockAdapter assemble(std::vector<TaskBlock> blocks, std::size_t r_coop, double gamma,
                      std::uint64_t seed, std::size_t layer_id = 0,
                      std::optional<std::size_t> expected_total = std::nullopt);

/// Single shared block of width r_total with kaiming-uniform A and zero B.
BlockAdapter lora_adapter(std::size_t d_out, std::size_t d_in, std::size_t r_total,
                          std::uint64_t seed, std::size_t layer_id = 0);

/// Composed product of the concatenated factors, B·A.
DenseMatrix delta(const BlockAdapter& adapter);

/// Σ_t B_t·A_t + B_coop·A_coop, accumulated block by block.
DenseMatrix blockwise_delta(const BlockAdapter& adapter);

/// Factored application Σ B_t·(A_t·x) without forming the dense update.
DenseMatrix apply_adapter(const BlockAdapter& adapter, const DenseMatrix& x);

AdaptedLayer compensate(const DenseMatrix& original_w, BlockAdapter adapter,
                        CompensationMode mode);

/// base_w + delta(adapter).
DenseMatrix merge(const AdaptedLayer& layer);

}  // namespace thanora
