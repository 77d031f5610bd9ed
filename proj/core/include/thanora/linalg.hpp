// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision linear algebra shared by every other module.
// Storage is row-major; Eigen does the heavy lifting behind the maps.
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace thanora {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Real dense matrix with explicit extents. Every entry is finite at
/// construction; zero extents are allowed so that empty blocks and empty
/// batches have a representation.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);
  explicit DenseMatrix(const RowMatrix& m);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> d);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Eigen::Map<const RowMatrix> view() const {
    return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
  }
  Eigen::Map<RowMatrix> view() {
    return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
  }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Tallies scalar multiplications performed by counted products.
struct MultiplyCounter {
  std::uint64_t multiplies = 0;
  void add_product(std::size_t m, std::size_t k, std::size_t n) noexcept {
    multiplies += static_cast<std::uint64_t>(m) * k * n;
  }
};

// Products. The optional counter receives rows*inner*cols per call.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b, MultiplyCounter* counter = nullptr);
/// aᵀ·b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b, MultiplyCounter* counter = nullptr);
/// a·bᵀ
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b, MultiplyCounter* counter = nullptr);

DenseMatrix transpose(const DenseMatrix& m);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& m);
DenseMatrix& operator+=(DenseMatrix& a, const DenseMatrix& b);
DenseMatrix& operator-=(DenseMatrix& a, const DenseMatrix& b);

/// Column-wise concatenation; all parts share the row count.
DenseMatrix hstack(std::span<const DenseMatrix> parts, std::size_t rows);
/// Row-wise concatenation; all parts share the column count.
DenseMatrix vstack(std::span<const DenseMatrix> parts, std::size_t cols);
DenseMatrix slice_cols(const DenseMatrix& m, std::size_t offset, std::size_t width);
DenseMatrix slice_rows(const DenseMatrix& m, std::size_t offset, std::size_t height);

double frobenius_norm(const DenseMatrix& m);
/// Tr(aᵀb), the sum of elementwise products.
double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b);
double max_abs(const DenseMatrix& m);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
/// Number of singular values above rel_tol * sigma_max.
std::size_t numerical_rank(const DenseMatrix& m, double rel_tol = 1e-8);

/// Truncated singular value decomposition m ≈ u·diag(sigma)·v.
struct SvdTriple {
  DenseMatrix u;             // d_out x k, orthonormal columns
  std::vector<double> sigma; // non-increasing, non-negative
  DenseMatrix v;             // k x d_in
};

/// Top-k singular triples of m. Each left singular vector is oriented so its
/// largest-magnitude entry is non-negative; equal singular values keep the
/// order the decomposition produced them in.
SvdTriple svd(const DenseMatrix& m, std::size_t k);

/// u·diag(sigma)·v
DenseMatrix reconstruct(const SvdTriple& t);

/// (c + delta·I)⁻¹ through a Cholesky factorization. Throws SingularityError
/// when the shifted matrix is not positive definite.
DenseMatrix damped_inverse(const DenseMatrix& c, double delta);

/// 1e-6 · trace(c) / dim.
double default_damping(const DenseMatrix& c);

/// Seeded generator passed around by value; no hidden global state.
using Rng = std::mt19937_64;

enum class Distribution { gaussian, kaiming_uniform };

DenseMatrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev = 1.0);
/// Uniform on [-sqrt(6 / fan_in), sqrt(6 / fan_in)].
DenseMatrix kaiming_uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, std::size_t fan_in);

/// Deterministic for a fixed seed. fan_in is used only by kaiming_uniform and
/// defaults to cols.
DenseMatrix seeded_random(std::size_t rows, std::size_t cols, std::uint64_t seed,
                          Distribution distribution, std::size_t fan_in = 0);

/// n x n orthogonal matrix from the QR factorization of a Gaussian draw.
DenseMatrix random_orthogonal(Rng& rng, std::size_t n);

}  // namespace thanora
