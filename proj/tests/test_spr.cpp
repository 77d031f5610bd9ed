// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "thanora/spr.hpp"
#include "thanora/verify.hpp"

namespace thanora {
namespace {

BlockAdapter from_blocks(std::vector<TaskBlock> blocks, std::size_t r_coop = 0) {
  BlockAdapter adp;
  adp.d_out = blocks.front().b.rows();
  adp.d_in = blocks.front().a.cols();
  adp.task_blocks = std::move(blocks);
  adp.coop_b = DenseMatrix(adp.d_out, r_coop);
  adp.coop_a = DenseMatrix(r_coop, adp.d_in);
  for (std::size_t i = 0; i < r_coop; ++i) {
    adp.coop_b(i % adp.d_out, i) = 1.0;
    adp.coop_a(i, i % adp.d_in) = 1.0;
  }
  adp.rebuild_layout();
  return adp;
}

BlockAdapter unit_overlap_pair() {
  return from_blocks({{"x", DenseMatrix{{1.0}, {0.0}}, DenseMatrix{{1.0, 0.0}}},
                      {"y", DenseMatrix{{1.0}, {0.0}}, DenseMatrix{{1.0, 0.0}}}});
}

TEST(SprLoss, ZeroForOrthogonalBlocks) {
  const BlockAdapter adp = from_blocks({{"x", DenseMatrix{{1.0}, {0.0}}, DenseMatrix{{1.0, 0.0}}},
                                        {"y", DenseMatrix{{0.0}, {1.0}}, DenseMatrix{{0.0, 1.0}}}},
                                       1);
  EXPECT_EQ(spr_loss(adp), 0.0);
  const AdapterGradient g = spr_grad(adp);
  EXPECT_EQ(max_abs(g.task_blocks[0].b), 0.0);
  EXPECT_EQ(max_abs(g.task_blocks[1].a), 0.0);
}

TEST(SprLoss, UnitOverlapExampleAndGradient) {
  const BlockAdapter adp = unit_overlap_pair();
  EXPECT_DOUBLE_EQ(spr_loss(adp), 2.0);
  const AdapterGradient g = spr_grad(adp);
  EXPECT_EQ(g.task_blocks[0].b, (DenseMatrix{{2.0}, {0.0}}));
  EXPECT_EQ(g.task_blocks[0].a, (DenseMatrix{{2.0, 0.0}}));
  EXPECT_DOUBLE_EQ(pego_loss(adp), 1.0);
}

TEST(SprLoss, HomogeneousOfDegreeFour) {
  Rng rng(1);
  BlockAdapter adp = random_adapter(7, 5, {2, 3, 1}, 2, rng);
  const double base = spr_loss(adp);
  const double c = 1.7;
  for (auto& blk : adp.task_blocks) {
    blk.b = c * blk.b;
    blk.a = c * blk.a;
  }
  EXPECT_NEAR(spr_loss(adp), std::pow(c, 4) * base, 1e-12 * std::pow(c, 4) * base);
}

TEST(SprLoss, SingleTaskIsZero) {
  Rng rng(2);
  EXPECT_EQ(spr_loss(random_adapter(4, 4, {3}, 1, rng)), 0.0);
}

TEST(SprLoss, IgnoresCoopBlock) {
  Rng rng(3);
  BlockAdapter adp = random_adapter(6, 6, {2, 2}, 3, rng);
  const double before = spr_loss(adp);
  adp.coop_b = 10.0 * adp.coop_b;
  EXPECT_EQ(spr_loss(adp), before);
  EXPECT_EQ(max_abs(spr_grad(adp).coop.b), 0.0);
  EXPECT_EQ(max_abs(spr_grad(adp).coop.a), 0.0);
}

TEST(SprLoss, InvariantUnderWithinBlockPermutation) {
  Rng rng(4);
  BlockAdapter adp = random_adapter(6, 5, {3, 2}, 0, rng);
  const double before = spr_loss(adp);
  auto& blk = adp.task_blocks[0];
  // Swap columns 0 and 2 of B with rows 0 and 2 of A.
  for (std::size_t i = 0; i < blk.b.rows(); ++i) std::swap(blk.b(i, 0), blk.b(i, 2));
  for (std::size_t j = 0; j < blk.a.cols(); ++j) std::swap(blk.a(0, j), blk.a(2, j));
  EXPECT_NEAR(spr_loss(adp), before, 1e-12 * before);
}

TEST(SprLoss, VanishesOnlyWithCrossProducts) {
  Rng rng(5);
  const BlockAdapter adp = random_adapter(6, 6, {2, 2}, 0, rng);
  const double loss = spr_loss(adp);
  const DenseMatrix bb = matmul_tn(adp.task_blocks[0].b, adp.task_blocks[1].b);
  const DenseMatrix aa = matmul_nt(adp.task_blocks[0].a, adp.task_blocks[1].a);
  const double direct = frobenius_norm(bb) * frobenius_norm(bb) + frobenius_norm(aa) * frobenius_norm(aa);
  EXPECT_NEAR(loss, direct, 1e-12);
  EXPECT_GT(loss, 0.0);
}

TEST(SprGrad, MatchesCentralDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    BlockAdapter adp = random_adapter(12, 9, {2, 3, 1, 2}, 1, rng);
    const AdapterGradient g = spr_grad(adp);
    const auto f = [&] { return spr_loss(adp); };
    for (std::size_t t = 0; t < adp.task_blocks.size(); ++t) {
      EXPECT_LE(relative_error(g.task_blocks[t].b, central_difference(adp.task_blocks[t].b, f, 1e-6)), 1e-5);
      EXPECT_LE(relative_error(g.task_blocks[t].a, central_difference(adp.task_blocks[t].a, f, 1e-6)), 1e-5);
    }
  }
}

TEST(TotalLoss, Arithmetic) {
  const std::vector<double> spr{2.0, 3.0};
  EXPECT_DOUBLE_EQ(total_loss(1.0, spr, 0.0), 1.0);
  EXPECT_NEAR(total_loss(1.0, spr, 1e-4), 1.0005, 1e-15);
}

TEST(PegoLoss, ZeroWhenBFactorsOrthogonal) {
  Rng rng(7);
  // Both B factors drawn from disjoint column sets of one orthogonal matrix.
  const DenseMatrix q = random_orthogonal(rng, 6);
  const DenseMatrix b1 = matmul(slice_cols(q, 0, 2), gaussian_matrix(rng, 2, 2));
  const DenseMatrix b2 = slice_cols(q, 2, 1);
  const BlockAdapter adp = from_blocks({{"x", b1, gaussian_matrix(rng, 2, 5)}, {"y", b2, gaussian_matrix(rng, 1, 5)}});
  EXPECT_LE(pego_loss(adp), 1e-13);
}

TEST(PegoLoss, CounterSeesFullProducts) {
  Rng rng(8);
  const BlockAdapter adp = random_adapter(32, 32, {4, 4}, 0, rng);
  MultiplyCounter spr_count, pego_count;
  spr_loss(adp, &spr_count);
  pego_loss(adp, &pego_count);
  // SPR: one 4x32x4 product for each factor pair. PEGO: two 32x4x32 updates
  // and one 32x32x32 cross product.
  EXPECT_EQ(spr_count.multiplies, 2u * 4 * 32 * 4);
  EXPECT_EQ(pego_count.multiplies, 2u * 32 * 4 * 32 + 32u * 32 * 32);
}

TEST(OverlapReport, DisjointAndIdenticalBlocks) {
  const BlockAdapter disjoint = from_blocks({{"x", DenseMatrix{{1.0}, {0.0}}, DenseMatrix{{1.0, 0.0}}},
                                             {"y", DenseMatrix{{0.0}, {1.0}}, DenseMatrix{{0.0, 1.0}}}});
  EXPECT_EQ(overlap_report(disjoint).pairs.at(0).overlap, 0.0);
  const OverlapReport same = overlap_report(unit_overlap_pair());
  EXPECT_NEAR(same.pairs.at(0).overlap, 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(same.spr_value, 2.0);
  ASSERT_TRUE(same.pego_value.has_value());
  EXPECT_DOUBLE_EQ(*same.pego_value, 1.0);
}

TEST(OverlapReport, MatchesFrobeniusInnerOracle) {
  Rng rng(9);
  const BlockAdapter adp = random_adapter(16, 16, {3, 2, 4}, 2, rng);
  const OverlapReport rep = overlap_report(adp, false);
  EXPECT_FALSE(rep.pego_value.has_value());
  ASSERT_EQ(rep.pairs.size(), 3u);
  for (const auto& p : rep.pairs) {
    const auto& x = adp.task_blocks[p.first];
    const auto& y = adp.task_blocks[p.second];
    const DenseMatrix wx = matmul(x.b, x.a);
    const DenseMatrix wy = matmul(y.b, y.a);
    const double oracle = std::abs(frobenius_inner(wx, wy)) / (frobenius_norm(wx) * frobenius_norm(wy));
    EXPECT_NEAR(p.overlap, oracle, 1e-12);
    EXPECT_LE(p.overlap, 1.0);
  }
}

TEST(OverlapReport, ZeroNormBlockIsFlaggedDegenerate) {
  const BlockAdapter adp = from_blocks({{"x", DenseMatrix{{1.0}, {0.0}}, DenseMatrix{{1.0, 0.0}}},
                                        {"y", DenseMatrix{{0.0}, {0.0}}, DenseMatrix{{1.0, 0.0}}}});
  const OverlapReport rep = overlap_report(adp);
  EXPECT_TRUE(rep.pairs.at(0).degenerate);
  EXPECT_EQ(rep.pairs.at(0).overlap, 0.0);
}

}  // namespace
}  // namespace thanora
