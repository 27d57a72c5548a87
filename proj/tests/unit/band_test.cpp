#include <gtest/gtest.h>

#include <random>

#include "common.hpp"
#include "robustss/generator.hpp"
#include "robustss/primal.hpp"

using namespace robustss;
using fixtures::vec;

namespace {

MarketGrid two_period_grid() {
  MarketGrid g;
  g.periods = 2;
  g.spot = 1.0;
  g.levels = {{0.5, 2.0}, {0.25, 1.0, 4.0}};
  g.cap = 8.0;
  return g;
}

OptionContract unit_call() {
  OptionContract c;
  c.kind = OptionKind::call;
  c.maturity = 2;
  c.strike = 1.0;
  c.quoted_price = 0.5;
  return c;
}

std::size_t count(const MartingaleSystem& sys, SystemRowKind kind) {
  std::size_t n = 0;
  for (const auto& l : sys.labels) n += l.kind == kind;
  return n;
}

}  // namespace

TEST(MartingaleSystem, RowCounts) {
  const auto sys = build_martingale_system(Market(two_period_grid(), {unit_call()}));
  // root plus the two period-one nodes, one option, one normalization
  EXPECT_EQ(sys.path_count(), 6);
  EXPECT_EQ(count(sys, SystemRowKind::node), 3u);
  EXPECT_EQ(count(sys, SystemRowKind::option), 1u);
  EXPECT_EQ(count(sys, SystemRowKind::normalization), 1u);
  EXPECT_EQ(sys.rows.rows(), 5);
  EXPECT_EQ(sys.instruments.payoff.cols(), 4);
}

TEST(DensityBand, MidpointsOfLiftedPointsStayFeasible) {
  const Market m(two_period_grid(), {unit_call()});
  const auto sys = build_martingale_system(m);
  const auto amb = AmbiguityModel::density_band(0.5, 2.0, sys, m.grid);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  const Index n = sys.path_count();
  for (int k = 0; k < 20; ++k) {
    Vector f1(n), f2(n);
    for (Index i = 0; i < n; ++i) f1[i] = n01(rng), f2[i] = n01(rng);
    const auto a = worst_case_expectation(amb, f1), b = worst_case_expectation(amb, f2);
    ASSERT_TRUE(amb.lifted_feasible(a.lifted));
    ASSERT_TRUE(amb.lifted_feasible(b.lifted));
    const Vector mid = 0.5 * (a.lifted + b.lifted);
    EXPECT_TRUE(amb.lifted_feasible(mid));
    // direct check of alpha q <= p <= beta q with q calibrated
    const Vector p = mid.head(n), q = mid.tail(n);
    EXPECT_LE(sys.residual(q), 1e-9);
    EXPECT_GE((p - 0.5 * q).minCoeff(), -1e-9);
    EXPECT_GE((2.0 * q - p).minCoeff(), -1e-9);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    const Measure pm = amb.measure_of(mid);
    EXPECT_TRUE(amb.contains(pm));
    const auto eq = equivalent_martingale_for(pm, sys);
    ASSERT_TRUE(eq.has_value());
    for (Index i = 0; i < n; ++i) EXPECT_EQ(pm[i] > 0.0, (*eq)[i] > 0.0);
    EXPECT_LE(sys.residual(eq->weights()), 1e-9);
  }
}

TEST(DensityBand, ParameterChecks) {
  const Market m(two_period_grid(), {unit_call()});
  const auto sys = build_martingale_system(m);
  EXPECT_THROW(AmbiguityModel::density_band(0.0, 2.0, sys, m.grid), InvariantError);
  EXPECT_THROW(AmbiguityModel::density_band(0.5, 1.0, sys, m.grid), InvariantError);
  MarketGrid uncapped = m.grid;
  uncapped.cap.reset();
  EXPECT_THROW(AmbiguityModel::density_band(0.5, 2.0, sys, uncapped), InvariantError);
}

TEST(CalibratedMember, FoundInBandsNotInDisjointHull) {
  const Market m = fixtures::binomial();
  const auto sys = build_martingale_system(m);
  const auto band = AmbiguityModel::density_band(0.5, 2.0, sys, m.grid);
  const auto q = calibrated_member(band, sys);
  ASSERT_TRUE(q.has_value());
  EXPECT_NEAR((*q)[0], 2.0 / 3.0, 1e-10);
  EXPECT_TRUE(band.contains(*q));
  // the hull of (0.6, 0.4) and (0.4, 0.6) misses Q = (2/3, 1/3)
  const auto hull = AmbiguityModel::hull({Measure(vec({0.6, 0.4})), Measure(vec({0.4, 0.6}))});
  EXPECT_FALSE(calibrated_member(hull, sys).has_value());
  const auto wide = AmbiguityModel::hull({Measure(vec({0.8, 0.2})), Measure(vec({0.4, 0.6}))});
  EXPECT_TRUE(calibrated_member(wide, sys).has_value());
}

TEST(CalibratedMember, BandValueIsUtilityOfCapital) {
  // with Q in the set, Jensen gives E_Q U(X) <= U(E_Q X) = U(x), attained by holding cash
  for (std::uint64_t seed : {1u, 4u, 9u}) {
    const auto g = generate_random_instance(seed, {}, GeneratedAmbiguity::density_band);
    const Instance inst = make_instance(g.market, g.ambiguity);
    const UtilityFamily util = UtilityFamily::parse(g.utility);
    const auto sol = solve_robust_primal(g.x0, inst.ambiguity, inst.market, inst.system, util);
    EXPECT_TRUE(sol.converged);
    EXPECT_NEAR(sol.value, util.value(g.x0), 1e-12);
    EXPECT_NEAR((sol.wealth.array() - g.x0).abs().maxCoeff(), 0.0, 1e-12);
    EXPECT_NEAR(solve_u(g.x0, inst.ambiguity, inst.system, util).value, util.value(g.x0), 1e-7);
  }
}
