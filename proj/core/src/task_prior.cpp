// SPDX-License-Identifier: Apache-2.0
#include "thanora/task_prior.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "thanora/error.hpp"

namespace thanora {

CovarianceAccumulator::CovarianceAccumulator(std::size_t dim) : sum_outer_(dim, dim) {
  if (dim == 0) throw DimensionError("CovarianceAccumulator: dim must be positive");
}

void CovarianceAccumulator::accumulate(const DenseMatrix& x) {
  if (x.rows() != dim()) {
    throw DimensionError(
        fmt::format("accumulate: activations have {} rows, expected {}", x.rows(), dim()));
  }
  if (x.cols() == 0) return;
  // Rank-k update of the lower triangle, mirrored so the sum stays exactly
  // symmetric.
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(x.rows(), x.rows());
  update.selfadjointView<Eigen::Lower>().rankUpdate(Eigen::MatrixXd(x.view()));
  auto s = sum_outer_.view();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      s(i, j) += update(i, j);
      s(j, i) = s(i, j);
    }
  }
  count_ += x.cols();
}

DenseMatrix CovarianceAccumulator::covariance() const {
  if (count_ == 0) throw NumericError("covariance: no activations accumulated");
  return (1.0 / static_cast<double>(count_)) * sum_outer_;
}

SvdTriple context_svd(const DenseMatrix& w, const DenseMatrix& c, std::size_t r_total,
                      double delta) {
  if (c.rows() != c.cols() || c.rows() != w.cols()) {
    throw DimensionError(fmt::format("context_svd: weight {}x{} with covariance {}x{}", w.rows(),
                                     w.cols(), c.rows(), c.cols()));
  }
  const DenseMatrix c_inv = damped_inverse(c, delta);
  SvdTriple t = svd(matmul(w, c), r_total);
  t.v = matmul(t.v, c_inv);
  return t;
}

double spectral_entropy(std::span<const double> sigma) {
  double total = 0.0;
  for (double s : sigma) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw NumericError("spectral_entropy: singular values must be finite and non-negative");
    }
    total += s;
  }
  if (total <= 0.0) throw NumericError("spectral_entropy: all-zero spectrum");
  double h = 0.0;
  for (double s : sigma) {
    if (s > 0.0) {
      const double p = s / total;
      h -= p * std::log(p);
    }
  }
  return std::max(0.0, h);
}

TaskPrior compute_prior(std::string task_id, std::size_t layer_id, const DenseMatrix& w,
                        const CovarianceAccumulator& acc, std::size_t r_total, double delta) {
  const DenseMatrix c = acc.covariance();
  const double d = delta < 0.0 ? default_damping(c) : delta;
  TaskPrior prior{std::move(task_id), layer_id, context_svd(w, c, r_total, d), 0.0};
  prior.entropy = spectral_entropy(prior.svd.sigma);
  return prior;
}

}  // namespace thanora
