#include <gtest/gtest.h>

#include "common.hpp"
#include "robustss/convex.hpp"
#include "robustss/pwl.hpp"
#include "robustss/utility.hpp"

using namespace robustss;
using fixtures::vec;

TEST(Convex, KelleyMaximizesLogOnInterval) {
  Polyhedron dom(1);
  dom.add_ineq(vec({1}), 2.0);
  dom.add_ineq(vec({-1}), -0.5);
  const auto r = maximize_concave([](const Vector& x) { return OracleValue{std::log(x[0]), vec({1.0 / x[0]})}; }, dom);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.value, std::log(2.0), 1e-7);
  EXPECT_GE(r.bound, std::log(2.0) - 1e-12);
}

TEST(Convex, KelleyFindsConjugateOfLog) {
  // sup_x ln x - x over [1e-8, 10] is V(1) = -1
  Polyhedron dom(1);
  dom.add_ineq(vec({1}), 10.0);
  dom.add_ineq(vec({-1}), -1e-8);
  const auto r = maximize_concave(
      [](const Vector& x) { return OracleValue{std::log(x[0]) - x[0], vec({1.0 / x[0] - 1.0})}; }, dom, 1e-7, 2000,
      vec({1.0 / 3.0}));
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.value, -1.0, 1e-7);
}

TEST(Convex, KelleyMinimizesRelativeEntropyOverBand) {
  const Vector q = vec({2.0 / 3.0, 1.0 / 3.0});
  Polyhedron dom(1);  // p(up) in [0.4, 0.6]
  dom.add_ineq(vec({1}), 0.6);
  dom.add_ineq(vec({-1}), -0.4);
  const auto r = minimize_convex(
      [&](const Vector& x) {
        const double pu = x[0];
        return OracleValue{fixtures::kl(vec({1 - pu, pu}), q), vec({std::log(pu / q[1]) - std::log((1 - pu) / q[0])})};
      },
      dom);
  ASSERT_TRUE(r.converged);
  const double oracle = 0.4 * std::log(0.4 * 3) + 0.6 * std::log(0.6 * 1.5);
  EXPECT_NEAR(r.value, oracle, 1e-7);
  EXPECT_NEAR(oracle, 0.0097123, 1e-7);
}

TEST(Convex, BarrierOnSimplex) {
  // min -sum w_i ln x_i on the simplex -> x = w / sum w
  const Vector w = vec({1, 2, 3});
  BarrierProblem prob;
  prob.dim = 3;
  prob.objective.eval = [&](const Vector& x, double& f, Vector* g, Matrix* h) {
    if ((x.array() <= 0).any()) return false;
    f = -(w.array() * x.array().log()).sum();
    if (g) *g = -(w.array() / x.array()).matrix();
    if (h) *h = (w.array() / x.array().square()).matrix().asDiagonal();
    return true;
  };
  prob.eq = Matrix::Ones(1, 3);
  prob.eq_rhs = vec({1});
  prob.ineq = -Matrix::Identity(3, 3);
  prob.ineq_rhs = Vector::Zero(3);
  const auto r = minimize_barrier(prob, vec({1.0 / 3, 1.0 / 3, 1.0 / 3}));
  ASSERT_TRUE(r.converged);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.point[i], w[i] / 6.0, 1e-8);
}

TEST(Convex, RelativeInteriorFindsImplicitEqualities) {
  // x + y <= 1, x >= 0, y >= 0, x <= 0  ->  x = 0 is implicit
  Polyhedron p(2);
  p.add_ineq(vec({1, 1}), 1);
  p.add_ineq(vec({-1, 0}), 0);
  p.add_ineq(vec({0, -1}), 0);
  p.add_ineq(vec({1, 0}), 0);
  const auto ri = relative_interior(p);
  ASSERT_TRUE(ri.feasible);
  EXPECT_FALSE(ri.implicit_equality[0]);
  EXPECT_TRUE(ri.implicit_equality[1]);
  EXPECT_FALSE(ri.implicit_equality[2]);
  EXPECT_TRUE(ri.implicit_equality[3]);
  EXPECT_GT(ri.point[1], 0.0);
  EXPECT_LT(ri.point[1], 1.0);
}

TEST(Convex, NullSpaceAndRange) {
  Matrix a(2, 3);
  a << 1, 1, 0, 2, 2, 0;
  const Matrix ns = null_space(a, 3);
  EXPECT_EQ(ns.cols(), 2);
  EXPECT_LE((a * ns).norm(), 1e-12);
  const Matrix rb = range_basis(a);
  ASSERT_EQ(rb.cols(), 1);
  EXPECT_EQ(rb.rows(), 2);
  EXPECT_NEAR(std::abs(rb(1, 0) / rb(0, 0)), 2.0, 1e-12);
}

TEST(Pwl, ErrorBoundHoldsOnDenseGrid) {
  for (const auto& u : {UtilityFamily::log(), UtilityFamily::power(0.5), UtilityFamily::bounded_exp(0.5)}) {
    const auto m = build_pwl_model(u, 1e-3, 100.0, 1e-6);
    EXPECT_LE(m.error_bound, 1e-6);
    for (int k = 0; k <= 20000; ++k) {
      const double x = 1e-3 * std::pow(1e5, k / 20000.0);
      const double gap = u.value(x) - m.evaluate(x);
      EXPECT_GE(gap, -1e-12);
      EXPECT_LE(gap, 1e-6 + 1e-12);
    }
    for (std::size_t k = 1; k < m.slopes.size(); ++k) EXPECT_LT(m.slopes[k], m.slopes[k - 1]);
  }
}

TEST(Pwl, RejectsNonConcaveAndBadRange) {
  EXPECT_THROW(build_pwl_model([](double x) { return x * x; }, [](double x) { return 2 * x; }, 0.1, 1.0, 1e-6),
               InvariantError);
  EXPECT_THROW(build_pwl_model(UtilityFamily::log(), 0.0, 1.0), InvariantError);
}
