// SPDX-License-Identifier: Apache-2.0
#include "thanora/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <Eigen/QR>
#include <fmt/format.h>

#include "thanora/error.hpp"
#include "thanora/pipeline.hpp"
#include "thanora/spr.hpp"
#include "thanora/task_prior.hpp"

namespace thanora {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Orthonormal basis of the column space of m (m has full column rank).
DenseMatrix column_basis(const DenseMatrix& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(m.view()));
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  return DenseMatrix(RowMatrix(q));
}

// m − Q(Qᵀm): removes the span of q's columns from m's columns.
DenseMatrix project_out(const DenseMatrix& m, const DenseMatrix& q) {
  return m - matmul(q, matmul_tn(q, m));
}

BlockAdapter two_block_adapter(DenseMatrix b1, DenseMatrix a1, DenseMatrix b2, DenseMatrix a2) {
  BlockAdapter adp;
  adp.d_out = b1.rows();
  adp.d_in = a1.cols();
  adp.task_blocks.push_back({"t0", std::move(b1), std::move(a1)});
  adp.task_blocks.push_back({"t1", std::move(b2), std::move(a2)});
  adp.coop_b = DenseMatrix(adp.d_out, 0);
  adp.coop_a = DenseMatrix(0, adp.d_in);
  adp.rebuild_layout();
  return adp;
}

BlockAdapter transposed(const BlockAdapter& adp) {
  BlockAdapter t;
  t.d_out = adp.d_in;
  t.d_in = adp.d_out;
  for (const auto& blk : adp.task_blocks) {
    t.task_blocks.push_back({blk.task_id, transpose(blk.a), transpose(blk.b)});
  }
  t.coop_b = transpose(adp.coop_a);
  t.coop_a = transpose(adp.coop_b);
  t.rebuild_layout();
  return t;
}

// One pair of blocks obeying the requested branch. Factor entries have
// variance 1/dim so the products stay O(1) regardless of the drawn sizes.
BlockAdapter orthogonal_instance(OrthogonalBranch branch, Rng& rng, bool broken) {
  const std::size_t r1 = uniform_int(rng, 1, 6);
  const std::size_t r2 = uniform_int(rng, 1, 6);
  const std::size_t wide = uniform_int(rng, r1 + r2, 32);
  const std::size_t other = uniform_int(rng, 2, 32);
  const std::size_t d_out = branch == OrthogonalBranch::b_factors ? wide : other;
  const std::size_t d_in = branch == OrthogonalBranch::b_factors ? other : wide;

  DenseMatrix b1 = gaussian_matrix(rng, d_out, r1, 1.0 / std::sqrt(double(d_out)));
  DenseMatrix b2 = gaussian_matrix(rng, d_out, r2, 1.0 / std::sqrt(double(d_out)));
  DenseMatrix a1 = gaussian_matrix(rng, r1, d_in, 1.0 / std::sqrt(double(d_in)));
  DenseMatrix a2 = gaussian_matrix(rng, r2, d_in, 1.0 / std::sqrt(double(d_in)));

  if (branch == OrthogonalBranch::b_factors) {
    b2 = project_out(b2, column_basis(b1));
    if (broken) b2 += 1e-3 * matmul(b1, gaussian_matrix(rng, r1, r2));
  } else {
    a2 = transpose(project_out(transpose(a2), column_basis(transpose(a1))));
    if (broken) a2 += 1e-3 * matmul(gaussian_matrix(rng, r2, r1), a1);
  }
  return two_block_adapter(std::move(b1), std::move(a1), std::move(b2), std::move(a2));
}

void finish(CheckResult& r, Clock::time_point start) {
  r.passed = r.passed && r.measured <= r.tolerance;
  r.seconds = elapsed(start);
}

DenseMatrix random_spd(Rng& rng, std::size_t d) {
  const DenseMatrix g = gaussian_matrix(rng, d, d);
  return (1.0 / double(d)) * matmul_nt(g, g) + 0.5 * DenseMatrix::identity(d);
}

// Squared norm of every factor gradient, summed.
struct ErrorAccumulator {
  double diff = 0.0;
  double ref = 0.0;
  void add(const DenseMatrix& g, const DenseMatrix& g_ref) {
    const double d = frobenius_norm(g - g_ref);
    const double n = frobenius_norm(g_ref);
    diff += d * d;
    ref += n * n;
  }
  double relative() const { return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12); }
};

}  // namespace

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

DenseMatrix central_difference(DenseMatrix& m, const std::function<double()>& f, double step) {
  DenseMatrix g(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double saved = m(i, j);
      m(i, j) = saved + step;
      const double up = f();
      m(i, j) = saved - step;
      const double down = f();
      m(i, j) = saved;
      g(i, j) = (up - down) / (2.0 * step);
    }
  }
  return g;
}

double relative_error(const DenseMatrix& g, const DenseMatrix& g_ref, double floor) {
  return frobenius_norm(g - g_ref) / std::max(frobenius_norm(g_ref), floor);
}

BlockAdapter random_adapter(std::size_t d_out, std::size_t d_in, const std::vector<std::size_t>& ranks,
                            std::size_t r_coop, Rng& rng) {
  BlockAdapter adp;
  adp.d_out = d_out;
  adp.d_in = d_in;
  const double sb = 1.0 / std::sqrt(double(d_out));
  const double sa = 1.0 / std::sqrt(double(d_in));
  for (std::size_t t = 0; t < ranks.size(); ++t) {
    adp.task_blocks.push_back({fmt::format("t{}", t), gaussian_matrix(rng, d_out, ranks[t], sb),
                               gaussian_matrix(rng, ranks[t], d_in, sa)});
  }
  adp.coop_b = gaussian_matrix(rng, d_out, r_coop, sb);
  adp.coop_a = gaussian_matrix(rng, r_coop, d_in, sa);
  adp.rebuild_layout();
  return adp;
}

CheckResult check_blockwise_composition(std::size_t trials, std::uint64_t seed) {
  const auto start = Clock::now();
  CheckResult r{"blockwise composition", true, 0.0, 1e-12, trials, 0.0, {}};
  Rng rng(seed);
  for (std::size_t i = 0; i < trials; ++i) {
    const std::size_t d_out = uniform_int(rng, 8, 64);
    const std::size_t d_in = uniform_int(rng, 8, 64);
    const std::size_t t_count = uniform_int(rng, 2, 4);
    std::vector<std::size_t> ranks;
    for (std::size_t t = 0; t < t_count; ++t) ranks.push_back(uniform_int(rng, 1, 8));
    const BlockAdapter adp = random_adapter(d_out, d_in, ranks, uniform_int(rng, 0, 4), rng);

    DenseMatrix sum(d_out, d_in);
    for (const auto& blk : adp.task_blocks) sum += matmul(blk.b, blk.a);
    sum += matmul(adp.coop_b, adp.coop_a);
    r.measured = std::max(r.measured, frobenius_norm(delta(adp) - sum));
  }
  r.detail = fmt::format("max ||BA - sum B_t A_t||_F = {:.3e}", r.measured);
  finish(r, start);
  return r;
}

CheckResult check_orthogonality(OrthogonalBranch branch, std::size_t trials, std::uint64_t seed,
                                bool break_orthogonality) {
  const auto start = Clock::now();
  const bool b_branch = branch == OrthogonalBranch::b_factors;
  CheckResult r{b_branch ? "orthogonality (B branch)" : "orthogonality (A branch)", true, 0.0, 1e-10,
                trials, 0.0, {}};
  Rng rng(seed);
  double worst_pego = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const BlockAdapter adp = orthogonal_instance(branch, rng, break_orthogonality);
    const DenseMatrix w1 = matmul(adp.task_blocks[0].b, adp.task_blocks[0].a);
    const DenseMatrix w2 = matmul(adp.task_blocks[1].b, adp.task_blocks[1].a);
    const double scale = frobenius_norm(w1) * frobenius_norm(w2);
    r.measured = std::max(r.measured, std::abs(frobenius_inner(w1, w2)) / scale);
    worst_pego = std::max(worst_pego, b_branch ? pego_loss(adp) : pego_loss(transposed(adp)));
  }
  constexpr double kPegoTolerance = 1e-10;
  if (worst_pego > kPegoTolerance) r.passed = false;
  r.detail = fmt::format("max normalized <W1,W2>_F = {:.3e}, max PEGO = {:.3e} (tol {:.0e})",
                         r.measured, worst_pego, kPegoTolerance);
  finish(r, start);
  return r;
}

double pego_printed_orientation_on_a_branch(std::size_t trials, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    worst = std::max(worst, pego_loss(orthogonal_instance(OrthogonalBranch::a_factors, rng, false)));
  }
  return worst;
}

CheckResult check_context_svd_identity(std::size_t trials, std::uint64_t seed) {
  const auto start = Clock::now();
  CheckResult r{"context SVD identity", true, 0.0, 1e-8, trials, 0.0, {}};
  Rng rng(seed);
  constexpr std::size_t d = 8;
  for (std::size_t i = 0; i < trials; ++i) {
    const DenseMatrix w = gaussian_matrix(rng, d, d);
    const DenseMatrix c = random_spd(rng, d);
    const SvdTriple t = context_svd(w, c, d, 0.0);
    r.measured = std::max(r.measured, frobenius_norm(reconstruct(t) - w) / frobenius_norm(w));
  }
  r.detail = fmt::format("max relative reconstruction error = {:.3e}", r.measured);
  finish(r, start);
  return r;
}

CheckResult check_entropy_properties(std::size_t trials, std::uint64_t seed) {
  const auto start = Clock::now();
  CheckResult r{"spectral entropy properties", true, 0.0, 1e-12, trials, 0.0, {}};
  Rng rng(seed);
  std::uniform_real_distribution<double> value(1e-3, 10.0);
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
  for (std::size_t i = 0; i < trials; ++i) {
    const std::size_t n = uniform_int(rng, 1, 64);
    const std::vector<double> flat(n, value(rng));
    r.measured = std::max(r.measured, std::abs(spectral_entropy(flat) - std::log(double(n))));

    std::vector<double> sigma(n);
    for (double& s : sigma) s = value(rng);
    const double h = spectral_entropy(sigma);
    const double c = std::pow(10.0, log_scale(rng));
    std::vector<double> scaled = sigma;
    for (double& s : scaled) s *= c;
    r.measured = std::max(r.measured, std::abs(spectral_entropy(scaled) - h));
    std::vector<double> shuffled = sigma;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    r.measured = std::max(r.measured, std::abs(spectral_entropy(shuffled) - h));
  }
  // p = (3/4, 1/4): -(3/4)ln(3/4) - (1/4)ln(1/4) = 0.5623351446...
  const std::vector<double> worked{3.0, 1.0};
  const double worked_err = std::abs(spectral_entropy(worked) - 0.5623351);
  if (worked_err > 1e-6) r.passed = false;
  r.detail = fmt::format("max invariance deviation = {:.3e}, |H(3,1) - 0.5623351| = {:.3e} (tol 1e-6)",
                         r.measured, worked_err);
  finish(r, start);
  return r;
}

CheckResult check_spr_gradient(std::size_t trials, std::uint64_t seed) {
  const auto start = Clock::now();
  CheckResult r{"SPR gradient", true, 0.0, 1e-5, trials, 0.0, {}};
  Rng rng(seed);
  for (std::size_t i = 0; i < trials; ++i) {
    const std::size_t d_out = uniform_int(rng, 2, 32);
    const std::size_t d_in = uniform_int(rng, 2, 32);
    std::vector<std::size_t> ranks(uniform_int(rng, 2, 4));
    for (auto& k : ranks) k = uniform_int(rng, 1, 4);
    BlockAdapter adp = random_adapter(d_out, d_in, ranks, uniform_int(rng, 0, 2), rng);
    const AdapterGradient g = spr_grad(adp);
    const auto f = [&] { return spr_loss(adp); };

    ErrorAccumulator acc;
    for (std::size_t t = 0; t < ranks.size(); ++t) {
      acc.add(g.task_blocks[t].b, central_difference(adp.task_blocks[t].b, f, 1e-6));
      acc.add(g.task_blocks[t].a, central_difference(adp.task_blocks[t].a, f, 1e-6));
    }
    acc.add(g.coop.b, central_difference(adp.coop_b, f, 1e-6));
    acc.add(g.coop.a, central_difference(adp.coop_a, f, 1e-6));
    r.measured = std::max(r.measured, acc.relative());
  }
  r.detail = fmt::format("max relative error vs central differences = {:.3e}", r.measured);
  finish(r, start);
  return r;
}

CheckResult check_model_gradient(std::size_t trials, std::uint64_t seed) {
  const auto start = Clock::now();
  CheckResult r{"full objective gradient", true, 0.0, 1e-4, trials, 0.0, {}};
  Rng rng(seed);
  constexpr std::size_t d = 8;
  constexpr double lambda = 0.1;
  for (std::size_t i = 0; i < trials; ++i) {
    ModelSnapshot model;
    model.nonlinearity = i % 2 == 0 ? Nonlinearity::none : Nonlinearity::tanh;
    for (std::size_t l = 0; l < 2; ++l) {
      BlockAdapter adp = random_adapter(d, d, {uniform_int(rng, 1, 3), uniform_int(rng, 1, 3)},
                                        uniform_int(rng, 0, 2), rng);
      adp.layer_id = l;
      model.layers.push_back({gaussian_matrix(rng, d, d, 1.0 / std::sqrt(double(d))), std::move(adp),
                              CompensationMode::injective});
    }
    const DenseMatrix x = gaussian_matrix(rng, d, 6);
    const DenseMatrix y = gaussian_matrix(rng, d, 6);

    const ModelGradient g = backward(model, forward(model, x), y, lambda);
    const auto f = [&] {
      double spr = 0.0;
      for (const auto& layer : model.layers) spr += spr_loss(layer.adapter);
      return mse(forward(model, x).output, y) + lambda * spr;
    };
    ErrorAccumulator acc;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      auto& adp = model.layers[l].adapter;
      for (std::size_t t = 0; t < adp.task_blocks.size(); ++t) {
        acc.add(g.layers[l].task_blocks[t].b, central_difference(adp.task_blocks[t].b, f, 1e-6));
        acc.add(g.layers[l].task_blocks[t].a, central_difference(adp.task_blocks[t].a, f, 1e-6));
      }
      acc.add(g.layers[l].coop.b, central_difference(adp.coop_b, f, 1e-6));
      acc.add(g.layers[l].coop.a, central_difference(adp.coop_a, f, 1e-6));
    }
    r.measured = std::max(r.measured, acc.relative());
  }
  r.detail = fmt::format("max relative error vs central differences = {:.3e}", r.measured);
  finish(r, start);
  return r;
}

VerifyReport run_verification(const VerifyOptions& o) {
  const std::size_t n = std::max<std::size_t>(1, o.trials);
  auto scaled = [n](std::size_t div) { return std::max<std::size_t>(1, n / div); };
  VerifyReport report;
  report.checks.push_back(check_blockwise_composition(scaled(5), derive_seed(o.seed, 1)));
  report.checks.push_back(
      check_orthogonality(OrthogonalBranch::b_factors, n, derive_seed(o.seed, 2), o.break_orthogonality));
  report.checks.push_back(
      check_orthogonality(OrthogonalBranch::a_factors, n, derive_seed(o.seed, 3), o.break_orthogonality));
  report.checks.push_back(check_context_svd_identity(scaled(10), derive_seed(o.seed, 4)));
  report.checks.push_back(check_entropy_properties(scaled(2), derive_seed(o.seed, 5)));
  report.checks.push_back(check_spr_gradient(scaled(50), derive_seed(o.seed, 6)));
  report.checks.push_back(check_model_gradient(scaled(100), derive_seed(o.seed, 7)));
  return report;
}

}  // namespace thanora
