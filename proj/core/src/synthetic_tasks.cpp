// SPDX-License-Identifier: Apache-2.0
#include "thanora/synthetic_tasks.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/QR>
#include <fmt/format.h>

#include "thanora/error.hpp"

namespace thanora {

namespace {

// Orthonormal basis whose leading column spans match those of `m` (square).
DenseMatrix orthonormalize(const DenseMatrix& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m.view());
  const auto n = static_cast<Eigen::Index>(m.rows());
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return DenseMatrix(RowMatrix(q));
}

DenseMatrix draw_inputs(Rng& rng, const DenseMatrix& basis, std::size_t offset,
                        std::span<const double> spectrum, double floor, std::size_t count) {
  const std::size_t d = basis.rows();
  DenseMatrix coeff = gaussian_matrix(rng, spectrum.size(), count);
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    const double s = std::sqrt(spectrum[i]);
    for (std::size_t n = 0; n < count; ++n) coeff(i, n) *= s;
  }
  DenseMatrix x = matmul(slice_cols(basis, offset, spectrum.size()), coeff);
  if (floor > 0.0) x += gaussian_matrix(rng, d, count, std::sqrt(floor));
  return x;
}

DenseMatrix teacher_targets(Rng& rng, std::span<const DenseMatrix> teacher, Nonlinearity nl,
                            const DenseMatrix& x, double noise_std) {
  DenseMatrix y = forward_dense(teacher, nl, x);
  if (noise_std > 0.0) y += gaussian_matrix(rng, y.rows(), y.cols(), noise_std);
  return y;
}

}  // namespace

std::vector<TaskDataset> generate_mixture(std::span<const TaskSpec> specs,
                                          const ModelSnapshot& base, std::uint64_t mixture_seed) {
  if (specs.empty()) throw DimensionError("generate_mixture: no tasks");
  const auto dims = base.dims();
  const std::size_t n_layers = base.layers.size();
  const std::size_t t_count = specs.size();
  const std::vector<DenseMatrix> weights = base.merged_weights();

  for (const auto& s : specs) {
    if (s.true_ranks.size() != n_layers) {
      throw DimensionError(fmt::format("task '{}': {} true ranks for {} layers", s.task_id,
                                       s.true_ranks.size(), n_layers));
    }
    if (!(s.spectrum_decay > 0.0)) {
      throw ConfigError(fmt::format("task '{}': spectrum_decay must be positive", s.task_id));
    }
    if (s.num_train == 0 || s.num_eval == 0) {
      throw ConfigError(fmt::format("task '{}': sample counts must be positive", s.task_id));
    }
  }

  Rng rng(mixture_seed);
  std::vector<DenseMatrix> left(n_layers), right(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t d_in = dims[l];
    const std::size_t d_out = dims[l + 1];
    left[l] = random_orthogonal(rng, d_out);
    if (l > 0 && d_in == dims[l - 1]) {
      right[l] = orthonormalize(matmul(weights[l - 1], right[l - 1]));
    } else {
      right[l] = random_orthogonal(rng, d_in);
    }

    std::size_t used_left = 0;
    const std::size_t block = d_in / t_count;
    for (const auto& s : specs) {
      const std::size_t k = s.true_ranks[l];
      used_left += k;
      if (k == 0 || k > block || used_left > d_out) {
        throw DimensionError(fmt::format(
            "generate_mixture: layer {} cannot place rank {} of task '{}' orthogonally "
            "(block width {}, output width {})",
            l, k, s.task_id, block, d_out));
      }
    }
  }

  std::vector<TaskDataset> out;
  out.reserve(t_count);
  std::vector<std::size_t> left_offsets(n_layers, 0);
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto& s = specs[t];
    TaskDataset ds;
    ds.task_id = s.task_id;

    std::vector<DenseMatrix> teacher = weights;
    for (std::size_t l = 0; l < n_layers; ++l) {
      const std::size_t k = s.true_ranks[l];
      const std::size_t block = dims[l] / t_count;
      const DenseMatrix p = slice_cols(left[l], left_offsets[l], k);
      const DenseMatrix q = transpose(slice_cols(right[l], t * block, k));
      left_offsets[l] += k;
      ds.true_deltas.push_back(s.update_scale * matmul(p, q));
      teacher[l] += ds.true_deltas.back();
    }

    const std::size_t block = dims[0] / t_count;
    ds.input_spectrum.resize(block);
    for (std::size_t i = 0; i < block; ++i) {
      ds.input_spectrum[i] = std::pow(static_cast<double>(i + 1), -s.spectrum_decay);
    }

    Rng task_rng(s.seed);
    ds.train_inputs =
        draw_inputs(task_rng, right[0], t * block, ds.input_spectrum, s.input_floor, s.num_train);
    ds.eval_inputs =
        draw_inputs(task_rng, right[0], t * block, ds.input_spectrum, s.input_floor, s.num_eval);
    ds.train_targets =
        teacher_targets(task_rng, teacher, base.nonlinearity, ds.train_inputs, s.noise_std);
    ds.eval_targets =
        teacher_targets(task_rng, teacher, base.nonlinearity, ds.eval_inputs, s.noise_std);
    out.push_back(std::move(ds));
  }
  return out;
}

TaskDataset generate(const TaskSpec& spec, const ModelSnapshot& base) {
  auto all = generate_mixture(std::span<const TaskSpec>(&spec, 1), base, spec.seed);
  return std::move(all.front());
}

double eval_loss(const ModelSnapshot& model, const TaskDataset& dataset) {
  return mse(forward(model, dataset.eval_inputs).output, dataset.eval_targets);
}

double train_loss(const ModelSnapshot& model, const TaskDataset& dataset) {
  return mse(forward(model, dataset.train_inputs).output, dataset.train_targets);
}

}  // namespace thanora
