// SPDX-License-Identifier: Apache-2.0
//
// Subspace-preserving regularization over task blocks of an adapter. The
// cooperative block never enters a pair sum.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "thanora/hasi.hpp"
#include "thanora/linalg.hpp"

namespace thanora {

struct SprConfig {
  double lambda = 1e-4;
};

/// Gradient (or any per-factor quantity) laid out like a BlockAdapter.
struct FactorPair {
  DenseMatrix b;
  DenseMatrix a;
};

struct AdapterGradient {
  std::vector<FactorPair> task_blocks;
  FactorPair coop;

  /// Zero gradient shaped like `adapter`.
  static AdapterGradient zeros_like(const BlockAdapter& adapter);
  /// this += scale · other
  void add_scaled(const AdapterGradient& other, double scale);
};

/// Σ_{t1<t2} ‖B_t1ᵀB_t2‖²_F + ‖A_t1A_t2ᵀ‖²_F. Zero for fewer than two tasks.
double spr_loss(const BlockAdapter& adapter, MultiplyCounter* counter = nullptr);

/// Analytic gradient of spr_loss:
///   ∂/∂B_t = 2 Σ_{s≠t} B_s B_sᵀ B_t,   ∂/∂A_t = 2 Σ_{s≠t} A_t A_sᵀ A_s.
/// The cooperative entries are zero.
AdapterGradient spr_grad(const BlockAdapter& adapter);

/// task_loss + lambda · Σ spr_per_layer.
double total_loss(double task_loss, std::span<const double> spr_per_layer, double lambda);

/// Σ_{i<j} ‖(B_iA_i)ᵀ(B_jA_j)‖₁ (elementwise L1 of a d_in x d_in product).
/// Kept as an oracle and cost baseline; training never uses it.
double pego_loss(const BlockAdapter& adapter, MultiplyCounter* counter = nullptr);

struct PairOverlap {
  std::size_t first = 0;
  std::size_t second = 0;
  /// |⟨W_first, W_second⟩_F| / (‖W_first‖_F ‖W_second‖_F), in [0, 1].
  double overlap = 0.0;
  /// Set when either update has zero norm; overlap is then reported as 0.
  bool degenerate = false;
};

struct OverlapReport {
  std::size_t layer_id = 0;
  std::vector<PairOverlap> pairs;
  double spr_value = 0.0;
  std::optional<double> pego_value;

  double mean_overlap() const;
};

/// Normalized overlaps of the full task updates, computed through the factor
/// cross products so no d_out x d_in matrix is formed.
OverlapReport overlap_report(const BlockAdapter& adapter, bool with_pego = true);

}  // namespace thanora
