// SPDX-License-Identifier: Apache-2.0
#include "thanora/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <fmt/format.h>

#include "thanora/error.hpp"

namespace thanora {

namespace {

void require_finite(std::span<const double> data, const char* what) {
  for (double x : data) {
    if (!std::isfinite(x)) {
      throw NumericError(fmt::format("{}: non-finite entry", what));
    }
  }
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(fmt::format("{}: shape mismatch {}x{} vs {}x{}", what, a.rows(),
                                     a.cols(), b.rows(), b.cols()));
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError(fmt::format("DenseMatrix: {} values for a {}x{} matrix", data_.size(),
                                     rows_, cols_));
  }
  require_finite(data_, "DenseMatrix");
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("DenseMatrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  require_finite(data_, "DenseMatrix");
}

DenseMatrix::DenseMatrix(const RowMatrix& m)
    : rows_(static_cast<std::size_t>(m.rows())),
      cols_(static_cast<std::size_t>(m.cols())),
      data_(m.data(), m.data() + m.size()) {
  require_finite(data_, "DenseMatrix");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
  require_finite(d, "DenseMatrix::diagonal");
  DenseMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b, MultiplyCounter* counter) {
  if (a.cols() != b.rows()) {
    throw DimensionError(fmt::format("matmul: {}x{} times {}x{}", a.rows(), a.cols(), b.rows(),
                                     b.cols()));
  }
  if (counter) counter->add_product(a.rows(), a.cols(), b.cols());
  if (a.cols() == 0) return DenseMatrix(a.rows(), b.cols());
  return DenseMatrix(RowMatrix(a.view() * b.view()));
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b, MultiplyCounter* counter) {
  if (a.rows() != b.rows()) {
    throw DimensionError(fmt::format("matmul_tn: ({}x{})ᵀ times {}x{}", a.rows(), a.cols(),
                                     b.rows(), b.cols()));
  }
  if (counter) counter->add_product(a.cols(), a.rows(), b.cols());
  if (a.rows() == 0) return DenseMatrix(a.cols(), b.cols());
  return DenseMatrix(RowMatrix(a.view().transpose() * b.view()));
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b, MultiplyCounter* counter) {
  if (a.cols() != b.cols()) {
    throw DimensionError(fmt::format("matmul_nt: {}x{} times ({}x{})ᵀ", a.rows(), a.cols(),
                                     b.rows(), b.cols()));
  }
  if (counter) counter->add_product(a.rows(), a.cols(), b.rows());
  if (a.cols() == 0) return DenseMatrix(a.rows(), b.rows());
  return DenseMatrix(RowMatrix(a.view() * b.view().transpose()));
}

DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols(), m.rows());
  t.view() = m.view().transpose();
  return t;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out = a;
  out += b;
  return out;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out = a;
  out -= b;
  return out;
}

DenseMatrix operator*(double s, const DenseMatrix& m) {
  DenseMatrix out = m;
  for (double& x : out.data()) x *= s;
  require_finite(out.data(), "scale");
  return out;
}

DenseMatrix& operator+=(DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "add");
  auto dst = a.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return a;
}

DenseMatrix& operator-=(DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "subtract");
  auto dst = a.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  return a;
}

DenseMatrix hstack(std::span<const DenseMatrix> parts, std::size_t rows) {
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("hstack: row count mismatch");
    cols += p.cols();
  }
  DenseMatrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    if (p.cols() > 0 && rows > 0) {
      out.view().middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(p.cols())) =
          p.view();
    }
    offset += p.cols();
  }
  return out;
}

DenseMatrix vstack(std::span<const DenseMatrix> parts, std::size_t cols) {
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionError("vstack: column count mismatch");
    rows += p.rows();
  }
  DenseMatrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    if (p.rows() > 0 && cols > 0) {
      out.view().middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(p.rows())) =
          p.view();
    }
    offset += p.rows();
  }
  return out;
}

DenseMatrix slice_cols(const DenseMatrix& m, std::size_t offset, std::size_t width) {
  if (offset + width > m.cols()) throw DimensionError("slice_cols: out of range");
  DenseMatrix out(m.rows(), width);
  if (width > 0 && m.rows() > 0) {
    out.view() =
        m.view().middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(width));
  }
  return out;
}

DenseMatrix slice_rows(const DenseMatrix& m, std::size_t offset, std::size_t height) {
  if (offset + height > m.rows()) throw DimensionError("slice_rows: out of range");
  DenseMatrix out(height, m.cols());
  if (height > 0 && m.cols() > 0) {
    out.view() =
        m.view().middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(height));
  }
  return out;
}

double frobenius_norm(const DenseMatrix& m) { return m.empty() ? 0.0 : m.view().norm(); }

double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "frobenius_inner");
  auto x = a.data();
  auto y = b.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += x[i] * y[i];
  return sum;
}

double max_abs(const DenseMatrix& m) {
  double best = 0.0;
  for (double x : m.data()) best = std::max(best, std::abs(x));
  return best;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double best = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) best = std::max(best, std::abs(x[i] - y[i]));
  return best;
}

std::size_t numerical_rank(const DenseMatrix& m, double rel_tol) {
  if (m.empty()) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> solver(m.view());
  const auto& s = solver.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++rank;
  }
  return rank;
}

SvdTriple svd(const DenseMatrix& m, std::size_t k) {
  const std::size_t full = std::min(m.rows(), m.cols());
  if (k > full) {
    throw DimensionError(
        fmt::format("svd: requested rank {} exceeds min({}, {})", k, m.rows(), m.cols()));
  }
  // DenseMatrix guarantees finiteness, but a default-constructed empty matrix
  // has no spectrum at all.
  if (full == 0) throw DimensionError("svd: empty matrix");

  Eigen::JacobiSVD<Eigen::MatrixXd> solver(m.view(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = solver.singularValues();
  const Eigen::MatrixXd& u = solver.matrixU();
  const Eigen::MatrixXd& v = solver.matrixV();

  std::vector<std::size_t> order(full);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s(static_cast<Eigen::Index>(a)) > s(static_cast<Eigen::Index>(b));
  });

  SvdTriple out{DenseMatrix(m.rows(), k), std::vector<double>(k), DenseMatrix(k, m.cols())};
  for (std::size_t c = 0; c < k; ++c) {
    const auto src = static_cast<Eigen::Index>(order[c]);
    Eigen::Index pivot = 0;
    u.col(src).cwiseAbs().maxCoeff(&pivot);
    const double sign = u(pivot, src) < 0.0 ? -1.0 : 1.0;
    out.sigma[c] = std::max(0.0, s(src));
    for (std::size_t i = 0; i < m.rows(); ++i) {
      out.u(i, c) = sign * u(static_cast<Eigen::Index>(i), src);
    }
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out.v(c, j) = sign * v(static_cast<Eigen::Index>(j), src);
    }
  }
  return out;
}

DenseMatrix reconstruct(const SvdTriple& t) {
  DenseMatrix us = t.u;
  for (std::size_t i = 0; i < us.rows(); ++i) {
    for (std::size_t c = 0; c < us.cols(); ++c) us(i, c) *= t.sigma[c];
  }
  return matmul(us, t.v);
}

DenseMatrix damped_inverse(const DenseMatrix& c, double delta) {
  if (c.rows() != c.cols() || c.rows() == 0) {
    throw DimensionError(fmt::format("damped_inverse: {}x{} is not square", c.rows(), c.cols()));
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw NumericError("damped_inverse: damping must be finite and non-negative");
  }
  const double scale = std::max(1.0, max_abs(c));
  const auto cv = c.view();
  if ((cv - cv.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DimensionError("damped_inverse: matrix is not symmetric");
  }
  const Eigen::Index n = cv.rows();
  Eigen::MatrixXd shifted = cv;
  shifted.diagonal().array() += delta;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("damped_inverse: matrix plus damping is not positive definite");
  }
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  RowMatrix sym = 0.5 * (inv + inv.transpose());
  return DenseMatrix(sym);
}

double default_damping(const DenseMatrix& c) {
  if (c.rows() == 0) return 0.0;
  return 1e-6 * c.view().trace() / static_cast<double>(c.rows());
}

DenseMatrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = dist(rng);
  return m;
}

DenseMatrix kaiming_uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                                   std::size_t fan_in) {
  if (fan_in == 0) throw DimensionError("kaiming_uniform: fan_in must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = dist(rng);
  return m;
}

DenseMatrix seeded_random(std::size_t rows, std::size_t cols, std::uint64_t seed,
                          Distribution distribution, std::size_t fan_in) {
  Rng rng(seed);
  switch (distribution) {
    case Distribution::gaussian:
      return gaussian_matrix(rng, rows, cols);
    case Distribution::kaiming_uniform:
      return kaiming_uniform_matrix(rng, rows, cols, fan_in == 0 ? cols : fan_in);
  }
  throw Error("seeded_random: unknown distribution");
}

DenseMatrix random_orthogonal(Rng& rng, std::size_t n) {
  const DenseMatrix g = gaussian_matrix(rng, n, n);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g.view());
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                                     static_cast<Eigen::Index>(n));
  // Fix column signs against R's diagonal so the draw is Haar distributed.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return DenseMatrix(RowMatrix(q));
}

}  // namespace thanora
