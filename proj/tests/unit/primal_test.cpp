#include <gtest/gtest.h>

#include "common.hpp"
#include "robustss/primal.hpp"

using namespace robustss;
using fixtures::vec;

namespace {

const Vector kQ = vec({2.0 / 3.0, 1.0 / 3.0});

AmbiguityModel r1_hull() { return AmbiguityModel::hull({Measure(vec({0.6, 0.4})), Measure(vec({0.4, 0.6}))}); }

// log utility: min over p(up) in [lo, hi] of ln x + KL(p || Q), by golden section
double log_hull_oracle(double x, double lo, double hi) {
  return -fixtures::golden_max([&](double pu) { return -fixtures::kl(vec({1 - pu, pu}), kQ); }, lo, hi) + std::log(x);
}

}  // namespace

TEST(ExpectedUtility, DirectArithmetic) {
  const auto lg = UtilityFamily::log();
  const Measure half(vec({0.5, 0.5}));
  EXPECT_NEAR(expected_utility(half, vec({1, 1}), lg), 0.0, 1e-15);
  EXPECT_NEAR(expected_utility(half, vec({0.75, 1.5}), lg), 0.5 * std::log(1.5) + 0.5 * std::log(0.75), 1e-15);
  EXPECT_NEAR(0.5 * std::log(1.5) + 0.5 * std::log(0.75), 0.0588915, 1e-7);
  EXPECT_THROW(expected_utility(half, vec({0.0, 2.0}), lg), InvariantError);
  // zero wealth off the support is fine
  EXPECT_NO_THROW(expected_utility(Measure(vec({0.0, 1.0})), vec({0.0, 2.0}), lg));
  std::vector<std::string> diag;
  expected_utility(half, vec({1e-12, 2.0}), lg, &diag);
  EXPECT_EQ(diag.size(), 1u);
}

TEST(SolveUP, QGivesConstantWealth) {
  const Market m = fixtures::binomial();
  const auto sys = build_martingale_system(m);
  const auto s = solve_u_P(1.0, Measure(kQ), m, sys, UtilityFamily::log());
  EXPECT_NEAR(s.value, 0.0, 1e-12);
  EXPECT_NEAR(s.wealth[0], 1.0, 1e-9);
  EXPECT_NEAR(s.wealth[1], 1.0, 1e-9);
  EXPECT_TRUE(s.converged);
}

TEST(SolveUP, CompleteMarketClosedForm) {
  const Market m = fixtures::binomial();
  const auto sys = build_martingale_system(m);
  const Measure p(vec({0.5, 0.5}));
  for (double x : {1.0, 2.0}) {
    const auto s = solve_u_P(x, p, m, sys, UtilityFamily::log());
    EXPECT_NEAR(s.value, fixtures::kl(p.weights(), kQ) + std::log(x), 1e-10);
    EXPECT_NEAR(s.wealth[0], x * 0.75, 1e-8);
    EXPECT_NEAR(s.wealth[1], x * 1.5, 1e-8);
    EXPECT_LE(s.certified_gap, tol::saddle);
    EXPECT_TRUE(s.converged);
  }
  // brute force over the stock position: wealth = 1 + d (s1 - 1)
  const double brute = fixtures::golden_max(
      [](double dlt) { return 0.5 * std::log(1 - 0.5 * dlt) + 0.5 * std::log(1 + dlt); }, -0.999, 1.999);
  EXPECT_NEAR(solve_u_P(1.0, p, m, sys, UtilityFamily::log()).value, brute, 1e-10);
}

TEST(SolveUP, PowerUtilityAgainstBruteForce) {
  const Market m = fixtures::binomial();
  const auto sys = build_martingale_system(m);
  const Measure p(vec({0.3, 0.7}));
  const auto u = UtilityFamily::power(0.5);
  const double brute = fixtures::golden_max(
      [&](double dlt) { return 0.3 * u.value(1 - 0.5 * dlt) + 0.7 * u.value(1 + dlt); }, -0.9999999, 1.9999999);
  const auto s = solve_u_P(1.0, p, m, sys, u);
  EXPECT_NEAR(s.value, brute, 1e-10);
}

TEST(SolveUP, RequiresEquivalentMeasure) {
  MarketGrid g;
  g.periods = 1;
  g.spot = 1.0;
  g.levels = {{0.5, 1.0, 2.0}};
  const Market m(g, {});
  const auto sys = build_martingale_system(m);
  EXPECT_THROW(solve_u_P(1.0, Measure(vec({0, 0.5, 0.5})), m, sys, UtilityFamily::log()), InvariantError);
}

TEST(RobustPrimal, R1Values) {
  const Market m = fixtures::binomial();
  const auto sys = build_martingale_system(m);
  const auto amb = r1_hull();
  const auto lg = UtilityFamily::log();
  const auto s = solve_robust_primal(1.0, amb, m, sys, lg);
  const double oracle = log_hull_oracle(1.0, 0.4, 0.6);
  EXPECT_NEAR(oracle, 0.0097123, 1e-7);
  EXPECT_NEAR(s.value, oracle, 1e-8);
  EXPECT_NEAR(s.worst_measure[1], 0.4, 1e-7);
  EXPECT_NEAR(s.wealth[1], 1.2, 1e-6);
  EXPECT_NEAR(s.wealth[0], 0.9, 1e-6);
  EXPECT_LE(s.certified_gap, tol::saddle);
  EXPECT_TRUE(s.converged);
  const auto u = solve_u(1.0, amb, sys, lg);
  EXPECT_NEAR(u.value, oracle, 1e-8);
  EXPECT_NEAR(u.argmin[1], 0.4, 1e-6);
  EXPECT_TRUE(verify_minimax(s.value, u.value).pass);
  EXPECT_FALSE(verify_minimax(s.value + 1e-3, u.value).pass);
}

TEST(RobustPrimal, SingletonEqualsUP) {
  const Market m = fixtures::binomial();
  const auto sys = build_martingale_system(m);
  const Measure p(vec({0.55, 0.45}));
  const auto lg = UtilityFamily::log();
  const double up = solve_u_P(1.0, p, m, sys, lg).value;
  const auto amb = AmbiguityModel::hull({p});
  EXPECT_NEAR(solve_robust_primal(1.0, amb, m, sys, lg).value, up, 1e-9);
  EXPECT_NEAR(solve_u(1.0, amb, sys, lg).value, up, 1e-9);
}

TEST(RobustPrimal, AmbiguityContainingQ) {
  const Market m = fixtures::binomial();
  const auto sys = build_martingale_system(m);
  const auto lg = UtilityFamily::log();
  const auto hull = AmbiguityModel::hull({Measure(vec({0.8, 0.2})), Measure(vec({0.5, 0.5}))});
  const auto s = solve_robust_primal(1.0, hull, m, sys, lg);
  EXPECT_NEAR(s.value, 0.0, 1e-8);
  EXPECT_NEAR(s.wealth[0], 1.0, 1e-4);
  EXPECT_NEAR(s.wealth[1], 1.0, 1e-4);
  const auto band = AmbiguityModel::density_band(0.5, 2.0, sys, m.grid);
  EXPECT_NEAR(solve_robust_primal(1.0, band, m, sys, lg).value, 0.0, 1e-8);
  const auto u = solve_u(1.0, band, sys, lg);
  EXPECT_NEAR(u.value, 0.0, 1e-8);
  EXPECT_NEAR(u.argmin[1], 1.0 / 3.0, 1e-4);
}

TEST(RobustPrimal, ScalingAndConcavityInX) {
  const Market m = fixtures::binomial();
  const auto sys = build_martingale_system(m);
  const auto amb = r1_hull();
  const auto lg = UtilityFamily::log();
  std::vector<double> vals;
  for (double x : {0.5, 1.0, 2.0, 4.0}) vals.push_back(solve_robust_primal(x, amb, m, sys, lg).value);
  for (std::size_t i = 1; i < vals.size(); ++i) {
    EXPECT_GT(vals[i], vals[i - 1]);
    EXPECT_NEAR(vals[i] - vals[i - 1], std::log(2.0), 1e-6);
  }
  // midpoint concavity on the doubling grid: u(2) >= average of u(1) and u(3)
  const double u3 = solve_robust_primal(3.0, amb, m, sys, lg).value;
  EXPECT_GE(vals[2] + 1e-6, 0.5 * (vals[1] + u3));
}

TEST(RobustPrimal, WorstMeasureOptimalAgainstVertices) {
  const Market m = fixtures::binomial();
  const auto sys = build_martingale_system(m);
  const auto amb = r1_hull();
  const auto s = solve_robust_primal(1.0, amb, m, sys, UtilityFamily::bounded_exp(0.5));
  for (const auto& v : amb.vertices())
    EXPECT_GE(expected_utility(v, s.wealth, UtilityFamily::bounded_exp(0.5)), s.value - 1e-9);
}
