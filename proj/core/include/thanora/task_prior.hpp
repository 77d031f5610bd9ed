// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "thanora/linalg.hpp"

namespace thanora {

/// Running sum of activation outer products, C = Σ x·xᵀ over every column
/// seen so far. The sum is left unnormalized.
class CovarianceAccumulator {
 public:
  explicit CovarianceAccumulator(std::size_t dim);

  /// Adds x·xᵀ; x has `dim` rows and one column per activation.
  void accumulate(const DenseMatrix& x);

  std::size_t dim() const noexcept { return sum_outer_.rows(); }
  std::size_t count() const noexcept { return count_; }
  const DenseMatrix& sum_outer() const noexcept { return sum_outer_; }
  /// sum_outer() / count(). Throws NumericError before any activation is seen.
  DenseMatrix covariance() const;

 private:
  DenseMatrix sum_outer_;
  std::size_t count_ = 0;
};

/// Top-r_total SVD of w·c with the right factors mapped back through
/// (c + delta·I)⁻¹, so that Σ σᵢ uᵢ v̂ᵢᵀ is the covariance-aware estimate of w.
SvdTriple context_svd(const DenseMatrix& w, const DenseMatrix& c, std::size_t r_total,
                      double delta);

/// Shannon entropy (nats) of sigma normalized to a probability vector.
/// Zero entries contribute nothing. Throws NumericError for an all-zero or
/// negative spectrum.
double spectral_entropy(std::span<const double> sigma);

struct TaskPrior {
  std::string task_id;
  std::size_t layer_id = 0;
  SvdTriple svd;
  double entropy = 0.0;
};

/// context_svd over the mean covariance followed by spectral_entropy over the
/// retained spectrum. A negative delta selects default_damping of that
/// covariance. Using the mean rather than the raw sum keeps the singular values
/// independent of how many preview samples were drawn.
TaskPrior compute_prior(std::string task_id, std::size_t layer_id, const DenseMatrix& w,
                        const CovarianceAccumulator& acc, std::size_t r_total,
                        double delta = -1.0);

}  // namespace thanora
