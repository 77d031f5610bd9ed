// SPDX-License-Identifier: Apache-2.0
#include "thanora/hasi.hpp"

#include <cmath>

#include <fmt/format.h>

#include "thanora/error.hpp"

namespace thanora {

std::size_t BlockAdapter::total_rank() const {
  std::size_t r = coop_rank();
  for (const auto& blk : task_blocks) r += blk.rank();
  return r;
}

DenseMatrix BlockAdapter::concatenated_b() const {
  std::vector<DenseMatrix> parts;
  parts.reserve(task_blocks.size() + 1);
  for (const auto& blk : task_blocks) parts.push_back(blk.b);
  parts.push_back(coop_b);
  return hstack(parts, d_out);
}

DenseMatrix BlockAdapter::concatenated_a() const {
  std::vector<DenseMatrix> parts;
  parts.reserve(task_blocks.size() + 1);
  for (const auto& blk : task_blocks) parts.push_back(blk.a);
  parts.push_back(coop_a);
  return vstack(parts, d_in);
}

void BlockAdapter::rebuild_layout() {
  column_layout.clear();
  std::size_t offset = 0;
  for (const auto& blk : task_blocks) {
    column_layout.push_back({blk.task_id, offset, blk.rank()});
    offset += blk.rank();
  }
  column_layout.push_back({std::string(kCoopBlockId), offset, coop_rank()});
}

void BlockAdapter::validate() const {
  auto check = [&](const DenseMatrix& b, const DenseMatrix& a, std::string_view id) {
    if (b.rows() != d_out || a.cols() != d_in || b.cols() != a.rows()) {
      throw DimensionError(fmt::format("adapter layer {}: block '{}' has b {}x{}, a {}x{}",
                                       layer_id, id, b.rows(), b.cols(), a.rows(), a.cols()));
    }
  };
  for (const auto& blk : task_blocks) check(blk.b, blk.a, blk.task_id);
  check(coop_b, coop_a, kCoopBlockId);

  if (column_layout.size() != task_blocks.size() + 1) {
    throw DimensionError(fmt::format("adapter layer {}: layout has {} entries for {} blocks",
                                     layer_id, column_layout.size(), task_blocks.size() + 1));
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < column_layout.size(); ++i) {
    const auto& e = column_layout[i];
    const std::size_t width = i < task_blocks.size() ? task_blocks[i].rank() : coop_rank();
    const std::string_view id =
        i < task_blocks.size() ? std::string_view(task_blocks[i].task_id) : kCoopBlockId;
    if (e.offset != offset || e.width != width || e.block_id != id) {
      throw DimensionError(
          fmt::format("adapter layer {}: layout entry {} is not contiguous", layer_id, i));
    }
    offset += width;
  }
}

std::string_view to_string(CompensationMode mode) {
  return mode == CompensationMode::output_preserving ? "output_preserving" : "injective";
}

CompensationMode compensation_mode_from_string(std::string_view name) {
  if (name == "output_preserving") return CompensationMode::output_preserving;
  if (name == "injective") return CompensationMode::injective;
  throw ConfigError(fmt::format("unknown compensation_mode '{}'", name));
}

TaskBlock build_task_block(const TaskPrior& prior, std::size_t r_t, double gamma) {
  const auto& s = prior.svd;
  if (r_t == 0) throw DimensionError("build_task_block: rank must be positive");
  if (r_t > s.sigma.size()) {
    throw DimensionError(fmt::format("build_task_block: rank {} exceeds the {} available triples",
                                     r_t, s.sigma.size()));
  }
  if (!(gamma > 0.0)) throw NumericError("build_task_block: gamma must be positive");

  const double root_gamma = std::sqrt(gamma);
  TaskBlock blk{prior.task_id, DenseMatrix(s.u.rows(), r_t), DenseMatrix(r_t, s.v.cols())};
  for (std::size_t c = 0; c < r_t; ++c) {
    if (s.sigma[c] < 0.0) throw NumericError("build_task_block: negative singular value");
    const double f = root_gamma * std::sqrt(s.sigma[c]);
    for (std::size_t i = 0; i < s.u.rows(); ++i) blk.b(i, c) = f * s.u(i, c);
    for (std::size_t j = 0; j < s.v.cols(); ++j) blk.a(c, j) = f * s.v(c, j);
  }
  return blk;
}

BlockAdapter assemble(std::vector<TaskBlock> blocks, std::size_t r_coop, double gamma,
                      std::uint64_t seed, std::size_t layer_id,
                      std::optional<std::size_t> expected_total) {
  if (blocks.empty()) throw DimensionError("assemble: at least one task block is required");
  if (!(gamma > 0.0)) throw NumericError("assemble: gamma must be positive");

  BlockAdapter adp;
  adp.layer_id = layer_id;
  adp.d_out = blocks.front().b.rows();
  adp.d_in = blocks.front().a.cols();
  adp.gamma = gamma;
  adp.task_blocks = std::move(blocks);

  Rng rng(seed);
  adp.coop_a = std::sqrt(gamma) * kaiming_uniform_matrix(rng, r_coop, adp.d_in, adp.d_in);
  adp.coop_b = DenseMatrix(adp.d_out, r_coop);
  adp.rebuild_layout();
  adp.validate();

  if (expected_total && adp.total_rank() != *expected_total) {
    throw BudgetError(fmt::format("assemble: block widths sum to {}, expected {}",
                                  adp.total_rank(), *expected_total));
  }
  return adp;
}

BlockAdapter lora_adapter(std::size_t d_out, std::size_t d_in, std::size_t r_total,
                          std::uint64_t seed, std::size_t layer_id) {
  Rng rng(seed);
  BlockAdapter adp;
  adp.layer_id = layer_id;
  adp.d_out = d_out;
  adp.d_in = d_in;
  adp.gamma = 1.0;
  adp.task_blocks.push_back(
      {"shared", DenseMatrix(d_out, r_total), kaiming_uniform_matrix(rng, r_total, d_in, d_in)});
  adp.coop_b = DenseMatrix(d_out, 0);
  adp.coop_a = DenseMatrix(0, d_in);
  adp.rebuild_layout();
  return adp;
}

DenseMatrix delta(const BlockAdapter& adapter) {
  return matmul(adapter.concatenated_b(), adapter.concatenated_a());
}

DenseMatrix blockwise_delta(const BlockAdapter& adapter) {
  DenseMatrix sum(adapter.d_out, adapter.d_in);
  for (const auto& blk : adapter.task_blocks) sum += matmul(blk.b, blk.a);
  sum += matmul(adapter.coop_b, adapter.coop_a);
  return sum;
}

DenseMatrix apply_adapter(const BlockAdapter& adapter, const DenseMatrix& x) {
  if (x.rows() != adapter.d_in) {
    throw DimensionError(fmt::format("apply_adapter: input has {} rows, adapter expects {}",
                                     x.rows(), adapter.d_in));
  }
  DenseMatrix out(adapter.d_out, x.cols());
  for (const auto& blk : adapter.task_blocks) out += matmul(blk.b, matmul(blk.a, x));
  if (adapter.coop_rank() > 0) out += matmul(adapter.coop_b, matmul(adapter.coop_a, x));
  return out;
}

AdaptedLayer compensate(const DenseMatrix& original_w, BlockAdapter adapter,
                        CompensationMode mode) {
  if (original_w.rows() != adapter.d_out || original_w.cols() != adapter.d_in) {
    throw DimensionError(fmt::format("compensate: weight {}x{} vs adapter {}x{}",
                                     original_w.rows(), original_w.cols(), adapter.d_out,
                                     adapter.d_in));
  }
  AdaptedLayer layer{original_w, std::move(adapter), mode};
  if (mode == CompensationMode::output_preserving) layer.base_w -= delta(layer.adapter);
  return layer;
}

DenseMatrix merge(const AdaptedLayer& layer) { return layer.base_w + delta(layer.adapter); }

}  // namespace thanora
