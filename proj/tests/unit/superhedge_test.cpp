#include <gtest/gtest.h>

#include <random>

#include "common.hpp"
#include "robustss/superhedge.hpp"

using namespace robustss;
using fixtures::vec;

namespace {

// binomial with the risk-neutral weights (2/3 down, 1/3 up)
const MartingaleSystem& binomial_system() {
  static const MartingaleSystem sys = build_martingale_system(fixtures::binomial());
  return sys;
}

// P = 0.6 down / 0.4 up
const Measure& p_binomial() {
  static const Measure p(vec({0.6, 0.4}));
  return p;
}

}  // namespace

TEST(Superhedge, BinomialCallReplicates) {
  // call at K = 1 pays 0 down and 1 up; replication: x - 0.5 D = 0, x + D = 1
  const auto r = superhedge_price(ClaimVector(vec({0.0, 1.0})), binomial_system());
  EXPECT_NEAR(r.price, 1.0 / 3.0, 1e-10);
  ASSERT_EQ(r.theta.size(), 1);
  EXPECT_NEAR(r.theta[0], 2.0 / 3.0, 1e-10);
  const auto e = max_calibrated_expectation(ClaimVector(vec({0.0, 1.0})), binomial_system());
  EXPECT_NEAR(e.value, 1.0 / 3.0, 1e-10);
}

TEST(Superhedge, UpDigitalTimesFour) {
  const auto g = duality_gap(ClaimVector(vec({0.0, 4.0})), binomial_system());
  EXPECT_NEAR(g.superhedge, 4.0 / 3.0, 1e-10);
  EXPECT_TRUE(g.pass);
}

TEST(Superhedge, ClaimValidation) {
  EXPECT_THROW(ClaimVector(vec({-1.0, 1.0})), InvariantError);
  EXPECT_THROW(ClaimVector(vec({1.0, 1.0}), {true}), InvariantError);
  EXPECT_THROW(superhedge_price(ClaimVector(vec({1.0, 1.0, 1.0})), binomial_system()), InvariantError);
}

TEST(Superhedge, DualityOnRandomClaims) {
  // trinomial with a call: incomplete, so superhedging is a genuine LP
  MarketGrid g;
  g.periods = 2;
  g.spot = 1.0;
  g.levels = {{0.5, 1.0, 2.0}, {0.25, 1.0, 4.0}};
  g.cap = 8.0;
  OptionContract call;
  call.kind = OptionKind::call;
  call.maturity = 2;
  call.strike = 1.0;
  call.quoted_price = 0.5;
  const auto sys = build_martingale_system(Market(g, {call}));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int k = 0; k < 30; ++k) {
    Vector c(sys.path_count());
    for (Index i = 0; i < c.size(); ++i) c[i] = u(rng);
    const ClaimVector claim(c);
    const auto sh = superhedge_price(claim, sys);
    // the strategy dominates pathwise
    const Vector wealth = (sys.instruments.payoff * sh.theta).array() + sh.price;
    EXPECT_GE((wealth - c).minCoeff(), -1e-9);
    EXPECT_LE(duality_gap(claim, sys).gap, tol::duality_gap);
    // any calibrated Q prices below the superhedge
    const auto q = find_calibrated_measure(sys);
    EXPECT_LE(q.measure.expectation(c), sh.price + 1e-9);
  }
}

TEST(Polar, MembershipAndRejection) {
  // c = 0.9 down / 1.2 up has E_Q[c] = 0.6 + 0.4 = 1, on the boundary of C_P
  const auto in = polar_membership_C(vec({0.9, 1.2}), p_binomial(), binomial_system());
  EXPECT_TRUE(in.member);
  EXPECT_NEAR(in.sup_expectation, 1.0, 1e-12);
  const Vector w = (binomial_system().instruments.payoff * in.theta).array() + 1.0;
  EXPECT_GE(w[0], 0.9 - 1e-9);
  EXPECT_GE(w[1], 1.2 - 1e-9);

  // c = 4 on the up path: E_Q[c] = 4/3 > 1; witness density dQ/dP = (10/9, 5/6)
  const auto out = polar_membership_C(vec({0.0, 4.0}), p_binomial(), binomial_system());
  EXPECT_FALSE(out.member);
  EXPECT_NEAR(out.sup_expectation, 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(out.density[0], 10.0 / 9.0, 1e-12);
  EXPECT_NEAR(out.density[1], 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(p_binomial().expectation(out.density), 1.0, 1e-12);
}

TEST(Polar, ProductBoundOverDensities) {
  // E_P[c d] <= 1 for members c and densities d of calibrated Q ~ P
  const Measure q(vec({2.0 / 3.0, 1.0 / 3.0}));
  const Vector d = vec({q[0] / 0.6, q[1] / 0.4});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  int members = 0;
  for (int k = 0; k < 200; ++k) {
    const Vector c = vec({u(rng), u(rng)});
    const auto r = polar_membership_C(c, p_binomial(), binomial_system());
    const double product = p_binomial().expectation(c.cwiseProduct(d));
    EXPECT_EQ(r.member, product <= 1.0 + tol::polar_membership) << c.transpose();
    if (r.member) {
      ++members;
      EXPECT_LE(product, 1.0 + tol::polar_product);
    }
  }
  EXPECT_GT(members, 20);
}

TEST(Polar, L0BoundAtUnitThreshold) {
  // P(c > 1) = P(up) = 0.4; P(d <= 1) = 0.4 plus E_P[d c] = 1
  const Measure q(vec({2.0 / 3.0, 1.0 / 3.0}));
  const auto r = l0_bound_check(p_binomial(), q, vec({0.9, 1.2}), 1.0);
  EXPECT_NEAR(r.lhs, 0.4, 1e-12);
  EXPECT_NEAR(r.rhs, 1.4, 1e-12);
  EXPECT_TRUE(r.holds);
  EXPECT_THROW(l0_bound_check(p_binomial(), q, vec({0.9, 1.2}), 0.0), InvariantError);
  EXPECT_THROW(l0_bound_check(p_binomial(), Measure(vec({1.0, 0.0})), vec({0.9, 1.2}), 1.0), InvariantError);
}

TEST(Polar, L0BoundOverThresholds) {
  const Measure q(vec({2.0 / 3.0, 1.0 / 3.0}));
  for (double k : {0.25, 0.81, 1.0, 1.44, 4.0, 100.0}) {
    const Vector c = vec({0.9, 1.2});
    const auto r = l0_bound_check(p_binomial(), q, c, k);
    // independent recomputation
    double lhs = 0.0, rhs = 0.0;
    const double s = 1.0 / std::sqrt(k);
    for (int i = 0; i < 2; ++i) {
      const double d = q[i] / p_binomial()[i];
      lhs += c[i] > k ? p_binomial()[i] : 0.0;
      rhs += (d <= s ? p_binomial()[i] : 0.0) + s * p_binomial()[i] * d * c[i];
    }
    EXPECT_NEAR(r.lhs, lhs, 1e-14);
    EXPECT_NEAR(r.rhs, rhs, 1e-14);
    EXPECT_TRUE(r.holds);
  }
}

TEST(Polar, ClosednessProbe) {
  const auto sh = superhedge_price(ClaimVector(vec({0.0, 1.0})), binomial_system());
  // theta scaled so that 1 + B theta stays nonnegative on both paths
  EXPECT_TRUE(closedness_probe(sh.theta, p_binomial(), binomial_system()));
  EXPECT_FALSE(closedness_probe(vec({10.0}), p_binomial(), binomial_system()));
}
