#include <gtest/gtest.h>

#include <random>

#include "common.hpp"
#include "robustss/linear_program.hpp"

using namespace robustss;
using fixtures::vec;

TEST(LinearProgram, SmallOptimumWithCertificate) {
  // max x + y s.t. x + 2y <= 4, 3x + y <= 6  ->  (8/5, 6/5)
  LinearProgram lp(2, ObjectiveSense::maximize);
  lp.objective = vec({1, 1});
  lp.add_row(vec({1, 2}), RowType::le, 4);
  lp.add_row(vec({3, 1}), RowType::le, 6);
  const LpResult r = solve_lp(lp);
  ASSERT_TRUE(r.optimal());
  EXPECT_NEAR(r.x[0], 1.6, 1e-12);
  EXPECT_NEAR(r.x[1], 1.2, 1e-12);
  EXPECT_NEAR(r.objective, 2.8, 1e-12);
  EXPECT_TRUE(r.certificate_verified);
  EXPECT_NEAR(r.row_duals[0], 0.4, 1e-12);
  EXPECT_NEAR(r.row_duals[1], 0.2, 1e-12);
  EXPECT_LE(r.duality_gap, 1e-12);
}

TEST(LinearProgram, InfeasibleHasFarkasRay) {
  LinearProgram lp(2);
  lp.add_row(vec({1, 1}), RowType::le, 1);
  lp.add_row(vec({1, 1}), RowType::ge, 2);
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::infeasible);
  EXPECT_TRUE(r.certificate_verified);
  ASSERT_EQ(r.farkas.size(), 2);
}

TEST(LinearProgram, UnboundedHasRay) {
  LinearProgram lp(2, ObjectiveSense::maximize);
  lp.objective = vec({1, 0});
  lp.add_row(vec({1, -2}), RowType::le, 1);
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::unbounded);
  EXPECT_TRUE(r.certificate_verified);
  EXPECT_GT(r.ray[0], 0.0);
}

TEST(LinearProgram, FreeAndBoundedVariables) {
  // min x - y, x free, -1 <= y <= 3, x + y = 1  ->  x = -2, y = 3
  LinearProgram lp(2);
  lp.objective = vec({1, -1});
  lp.set_free(0);
  lp.set_bounds(1, -1, 3);
  lp.add_row(vec({1, 1}), RowType::eq, 1);
  const LpResult r = solve_lp(lp);
  ASSERT_TRUE(r.optimal());
  EXPECT_NEAR(r.x[0], -2, 1e-12);
  EXPECT_NEAR(r.x[1], 3, 1e-12);
}

TEST(LinearProgram, DimensionMismatchThrows) {
  LinearProgram lp(2);
  EXPECT_THROW(lp.add_row(vec({1, 2, 3}), RowType::le, 1), std::invalid_argument);
}

// Random bounded LPs: optimal value must beat every sampled feasible point
// and match the dual objective.
TEST(LinearProgram, RandomBoxProgramsAgainstVertexEnumeration) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int trial = 0; trial < 40; ++trial) {
    LinearProgram lp(2, ObjectiveSense::maximize);
    lp.objective = vec({d(rng), d(rng)});
    lp.set_bounds(0, -1, 1);
    lp.set_bounds(1, -1, 1);
    const Vector a = vec({d(rng), d(rng)});
    const double b = 0.3 + std::abs(d(rng));
    lp.add_row(a, RowType::le, b);
    const LpResult r = solve_lp(lp);
    ASSERT_TRUE(r.optimal());
    double best = -1e300;
    for (int i = 0; i <= 400; ++i)
      for (int j = 0; j <= 400; ++j) {
        const Vector x = vec({-1 + i / 200.0, -1 + j / 200.0});
        if (a.dot(x) <= b) best = std::max(best, lp.objective.dot(x));
      }
    EXPECT_GE(r.objective, best - 1e-12);
    EXPECT_LE(r.objective, best + 0.02);
    EXPECT_TRUE(r.certificate_verified);
  }
}
