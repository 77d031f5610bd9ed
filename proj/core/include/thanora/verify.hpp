// SPDX-License-Identifier: Apache-2.0
//
// Executable property suite: blockwise composition, the sufficient
// orthogonality condition in both branches, the covariance-weighted SVD
// identity, spectral-entropy properties and finite-difference gradient
// checks, all on seeded random instances.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "thanora/hasi.hpp"
#include "thanora/model.hpp"

namespace thanora {

struct CheckResult {
  std::string name;
  bool passed = false;
  /// Worst residual over all instances, in the unit the tolerance uses.
  double measured = 0.0;
  double tolerance = 0.0;
  std::size_t instances = 0;
  double seconds = 0.0;
  std::string detail;
};

struct VerifyOptions {
  /// Instance count for the orthogonality checks; the other checks scale
  /// from it (composition uses trials / 5, at least 1).
  std::size_t trials = 1000;
  std::uint64_t seed = 20250101;
  /// Test hook: perturbs the enforced orthogonality so the orthogonality
  /// checks must fail.
  bool break_orthogonality = false;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_passed() const;
};

/// ‖B·A − Σ_t B_t·A_t‖_F over random adapters (d ≤ 64, 2–4 task blocks of
/// mixed rank plus a cooperative block). Tolerance 1e-12.
CheckResult check_blockwise_composition(std::size_t trials, std::uint64_t seed);

enum class OrthogonalBranch { b_factors, a_factors };

/// Random pairs with B_1ᵀB_2 = 0 (or A_1A_2ᵀ = 0). Reports the worst
/// |⟨W_1, W_2⟩_F| / (‖W_1‖‖W_2‖); tolerance 1e-10. The PEGO oracle is checked
/// on the same instances (absolute, 1e-10) in the orientation in which the
/// branch forces it to vanish: (W_1)ᵀW_2 for the B branch, W_1W_2ᵀ (PEGO of
/// the transposed updates) for the A branch.
CheckResult check_orthogonality(OrthogonalBranch branch, std::size_t trials, std::uint64_t seed,
                                bool break_orthogonality = false);

/// Largest elementwise-L1 of (W_1)ᵀW_2 over A-branch instances. Not a check:
/// this orientation does not vanish under A_1A_2ᵀ = 0, and the suite prints
/// it so the difference is visible.
double pego_printed_orientation_on_a_branch(std::size_t trials, std::uint64_t seed);

/// Full-rank context_svd with zero damping on random (w, SPD c), d = 8.
/// Worst relative Frobenius reconstruction error; tolerance 1e-8.
CheckResult check_context_svd_identity(std::size_t trials, std::uint64_t seed);

/// Uniform spectrum → ln R, scale and permutation invariance, H(3, 1).
CheckResult check_entropy_properties(std::size_t trials, std::uint64_t seed);

/// spr_grad against central differences (step 1e-6) on random adapters
/// (d ≤ 32, T ≤ 4). Worst relative error; tolerance 1e-5.
CheckResult check_spr_gradient(std::size_t trials, std::uint64_t seed);

/// backward() against central differences of mse + λ·Σ spr on d = 8, T = 2
/// two-layer models (linear and tanh). Worst relative error; tolerance 1e-4.
CheckResult check_model_gradient(std::size_t trials, std::uint64_t seed);

VerifyReport run_verification(const VerifyOptions& options);

/// Central-difference gradient of f with respect to every entry of m.
/// m is perturbed in place and restored.
DenseMatrix central_difference(DenseMatrix& m, const std::function<double()>& f, double step);

/// ‖g − g_ref‖_F / max(‖g_ref‖_F, floor)
double relative_error(const DenseMatrix& g, const DenseMatrix& g_ref, double floor = 1e-12);

/// Random adapter with the given task ranks and cooperative width.
BlockAdapter random_adapter(std::size_t d_out, std::size_t d_in, const std::vector<std::size_t>& ranks,
                            std::size_t r_coop, Rng& rng);

}  // namespace thanora
