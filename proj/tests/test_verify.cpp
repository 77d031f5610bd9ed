// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "thanora/verify.hpp"

namespace thanora {
namespace {

TEST(Verify, EveryCheckPassesOnSmallRuns) {
  VerifyOptions opts;
  opts.trials = 100;
  const VerifyReport rep = run_verification(opts);
  EXPECT_TRUE(rep.all_passed());
  EXPECT_EQ(rep.checks.size(), 7u);
  for (const auto& c : rep.checks) {
    EXPECT_TRUE(c.passed) << c.name << " measured " << c.measured;
    EXPECT_GT(c.instances, 0u) << c.name;
    EXPECT_LE(c.measured, c.tolerance) << c.name;
  }
}

TEST(Verify, BrokenOrthogonalityIsDetectedInBothBranches) {
  EXPECT_FALSE(check_orthogonality(OrthogonalBranch::b_factors, 20, 1, true).passed);
  EXPECT_FALSE(check_orthogonality(OrthogonalBranch::a_factors, 20, 1, true).passed);
  VerifyOptions opts;
  opts.trials = 20;
  opts.break_orthogonality = true;
  EXPECT_FALSE(run_verification(opts).all_passed());
}

TEST(Verify, PrintedPegoOrientationDoesNotVanishOnABranch) {
  // With only A_1A_2ᵀ = 0 the products (B_1A_1)ᵀ(B_2A_2) still carry
  // B_1ᵀB_2 ≠ 0 between the row spaces, so the L1 stays well away from zero.
  EXPECT_GT(pego_printed_orientation_on_a_branch(20, 3), 1e-3);
}

TEST(Verify, SameSeedSameMeasurements) {
  const CheckResult a = check_spr_gradient(5, 42);
  const CheckResult b = check_spr_gradient(5, 42);
  EXPECT_EQ(a.measured, b.measured);
}

TEST(CentralDifference, QuadraticHasExactGradient) {
  DenseMatrix m{{1.0, -2.0}, {0.5, 3.0}};
  const auto f = [&] { return frobenius_inner(m, m); };
  const DenseMatrix g = central_difference(m, f, 1e-4);
  EXPECT_LE(max_abs_diff(g, 2.0 * m), 1e-8);
  EXPECT_EQ(m, (DenseMatrix{{1.0, -2.0}, {0.5, 3.0}}));
}

}  // namespace
}  // namespace thanora
