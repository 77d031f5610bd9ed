// SPDX-License-Identifier: Apache-2.0
#include "thanora/spr.hpp"

#include <algorithm>
#include <cmath>

#include "thanora/error.hpp"

namespace thanora {

namespace {

double squared_norm(const DenseMatrix& m) {
  double s = 0.0;
  for (double x : m.data()) s += x * x;
  return s;
}

double trace_of_product(const DenseMatrix& x, const DenseMatrix& y) {
  // Tr(x·y) without forming the product.
  if (x.cols() != y.rows() || x.rows() != y.cols()) {
    throw DimensionError("trace_of_product: incompatible shapes");
  }
  double t = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < x.cols(); ++k) t += x(i, k) * y(k, i);
  }
  return t;
}

}  // namespace

AdapterGradient AdapterGradient::zeros_like(const BlockAdapter& adapter) {
  AdapterGradient g;
  g.task_blocks.reserve(adapter.task_blocks.size());
  for (const auto& blk : adapter.task_blocks) {
    g.task_blocks.push_back({DenseMatrix(blk.b.rows(), blk.b.cols()),
                             DenseMatrix(blk.a.rows(), blk.a.cols())});
  }
  g.coop = {DenseMatrix(adapter.coop_b.rows(), adapter.coop_b.cols()),
            DenseMatrix(adapter.coop_a.rows(), adapter.coop_a.cols())};
  return g;
}

void AdapterGradient::add_scaled(const AdapterGradient& other, double scale) {
  if (other.task_blocks.size() != task_blocks.size()) {
    throw DimensionError("AdapterGradient: block count mismatch");
  }
  for (std::size_t t = 0; t < task_blocks.size(); ++t) {
    task_blocks[t].b += scale * other.task_blocks[t].b;
    task_blocks[t].a += scale * other.task_blocks[t].a;
  }
  coop.b += scale * other.coop.b;
  coop.a += scale * other.coop.a;
}

double spr_loss(const BlockAdapter& adapter, MultiplyCounter* counter) {
  const auto& blocks = adapter.task_blocks;
  double loss = 0.0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (std::size_t j = i + 1; j < blocks.size(); ++j) {
      loss += squared_norm(matmul_tn(blocks[i].b, blocks[j].b, counter));
      loss += squared_norm(matmul_nt(blocks[i].a, blocks[j].a, counter));
    }
  }
  return loss;
}

AdapterGradient spr_grad(const BlockAdapter& adapter) {
  AdapterGradient g = AdapterGradient::zeros_like(adapter);
  const auto& blocks = adapter.task_blocks;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (std::size_t j = i + 1; j < blocks.size(); ++j) {
      const DenseMatrix bb = matmul_tn(blocks[i].b, blocks[j].b);  // r_i x r_j
      const DenseMatrix aa = matmul_nt(blocks[i].a, blocks[j].a);  // r_i x r_j
      g.task_blocks[i].b += 2.0 * matmul_nt(blocks[j].b, bb);
      g.task_blocks[j].b += 2.0 * matmul(blocks[i].b, bb);
      g.task_blocks[i].a += 2.0 * matmul(aa, blocks[j].a);
      g.task_blocks[j].a += 2.0 * matmul_tn(aa, blocks[i].a);
    }
  }
  return g;
}

double total_loss(double task_loss, std::span<const double> spr_per_layer, double lambda) {
  if (!(lambda >= 0.0)) throw NumericError("total_loss: lambda must be non-negative");
  double spr = 0.0;
  for (double s : spr_per_layer) spr += s;
  return task_loss + lambda * spr;
}

double pego_loss(const BlockAdapter& adapter, MultiplyCounter* counter) {
  const auto& blocks = adapter.task_blocks;
  std::vector<DenseMatrix> updates;
  updates.reserve(blocks.size());
  for (const auto& blk : blocks) updates.push_back(matmul(blk.b, blk.a, counter));
  double loss = 0.0;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    for (std::size_t j = i + 1; j < updates.size(); ++j) {
      const DenseMatrix cross = matmul_tn(updates[i], updates[j], counter);
      for (double x : cross.data()) loss += std::abs(x);
    }
  }
  return loss;
}

double OverlapReport::mean_overlap() const {
  if (pairs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : pairs) s += p.overlap;
  return s / static_cast<double>(pairs.size());
}

OverlapReport overlap_report(const BlockAdapter& adapter, bool with_pego) {
  const auto& blocks = adapter.task_blocks;
  OverlapReport report;
  report.layer_id = adapter.layer_id;

  std::vector<DenseMatrix> gram_b, gram_a;
  std::vector<double> norms;
  for (const auto& blk : blocks) {
    gram_b.push_back(matmul_tn(blk.b, blk.b));
    gram_a.push_back(matmul_nt(blk.a, blk.a));
    norms.push_back(std::sqrt(std::max(0.0, trace_of_product(gram_b.back(), gram_a.back()))));
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (std::size_t j = i + 1; j < blocks.size(); ++j) {
      // ⟨B_iA_i, B_jA_j⟩ = Tr((B_iᵀB_j)(A_jA_iᵀ))
      const double inner = trace_of_product(matmul_tn(blocks[i].b, blocks[j].b),
                                            matmul_nt(blocks[j].a, blocks[i].a));
      PairOverlap p{i, j, 0.0, false};
      if (norms[i] == 0.0 || norms[j] == 0.0) {
        p.degenerate = true;
      } else {
        p.overlap = std::clamp(std::abs(inner) / (norms[i] * norms[j]), 0.0, 1.0);
      }
      report.pairs.push_back(p);
    }
  }
  report.spr_value = spr_loss(adapter);
  if (with_pego) report.pego_value = pego_loss(adapter);
  return report;
}

}  // namespace thanora
