#include <gtest/gtest.h>

#include "common.hpp"
#include "robustss/market.hpp"

using namespace robustss;

TEST(PathSpace, EnumeratesLexicographically) {
  MarketGrid g;
  g.periods = 2;
  g.spot = 1.0;
  g.levels = {{0.5, 1.0, 2.0}, {0.25, 1.0, 4.0}};
  const PathSpace ps(g);
  ASSERT_EQ(ps.path_count(), 9u);
  EXPECT_EQ(ps.node_count(), 4u);  // root plus three depth-1 nodes
  EXPECT_DOUBLE_EQ(ps.price(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(ps.price(5, 1), 1.0);
  EXPECT_DOUBLE_EQ(ps.price(5, 2), 4.0);
  for (std::size_t p = 0; p < 9; ++p) {
    const auto c = ps.chain(p);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0], 0);
    const PathNode& n = ps.node(c[1]);
    EXPECT_GE(p, n.first_path);
    EXPECT_LT(p, n.first_path + n.path_count);
    EXPECT_DOUBLE_EQ(n.price, ps.price(p, 1));
  }
}

TEST(MarketGrid, RejectsBadGrids) {
  MarketGrid g;
  g.periods = 1;
  g.spot = 1.0;
  g.levels = {{2.0, 0.5}};
  EXPECT_THROW(g.validate(), InvariantError);
  g.levels = {{0.5, 2.0}};
  g.cap = 1.5;
  EXPECT_THROW(g.validate(), InvariantError);
  g.cap.reset();
  g.spot = -1.0;
  EXPECT_THROW(g.validate(), InvariantError);
  g.spot = 1.0;
  g.periods = 2;
  EXPECT_THROW(g.validate(), InvariantError);
}

TEST(Options, NetPayoffSubtractsQuote) {
  Market m = fixtures::binomial();
  OptionContract call;
  call.kind = OptionKind::call;
  call.maturity = 1;
  call.strike = 1.0;
  call.quoted_price = 1.0 / 3.0;
  EXPECT_NEAR(evaluate_net_option(call, m.paths, 1), 1.0 - 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(evaluate_net_option(call, m.paths, 0), -1.0 / 3.0, 1e-15);
  OptionContract put = call;
  put.kind = OptionKind::put;
  EXPECT_NEAR(put.raw_payoff(m.paths, 0), 0.5, 1e-15);
  EXPECT_NEAR(put.raw_payoff(m.paths, 1), 0.0, 1e-15);
}

TEST(Instruments, WealthMatchesStrategyEvaluation) {
  MarketGrid g;
  g.periods = 2;
  g.spot = 1.0;
  g.levels = {{0.5, 2.0}, {0.25, 1.0, 3.0}};
  OptionContract c;
  c.kind = OptionKind::call;
  c.maturity = 2;
  c.strike = 1.0;
  c.quoted_price = 0.3;
  const Market m(g, {c});
  const InstrumentMatrix ins = build_instruments(m);
  ASSERT_EQ(ins.nodes.size(), 3u);
  ASSERT_EQ(ins.static_count, 1u);
  Vector theta(4);
  theta << 0.7, -0.2, 1.1, 0.4;
  const Vector w = wealth_vector(ins, 2.0, theta);
  const TradingStrategy s = ins.to_strategy(2.0, theta, m.paths.node_count());
  for (std::size_t p = 0; p < m.paths.path_count(); ++p) {
    // independent: x + sum_t delta_t (s_{t+1} - s_t) + h (payoff - price)
    double direct = 2.0;
    const auto chain = m.paths.chain(p);
    for (int t = 0; t < 2; ++t) direct += theta[t == 0 ? 0 : (chain[1] == 1 ? 1 : 2)] * (m.paths.price(p, t + 1) - m.paths.price(p, t));
    direct += 0.4 * (std::max(m.paths.price(p, 2) - 1.0, 0.0) - 0.3);
    EXPECT_NEAR(w[static_cast<Index>(p)], direct, 1e-12);
    EXPECT_NEAR(terminal_wealth(s, m, p), direct, 1e-12);
  }
  const auto coeffs = ins.to_coefficients(s);
  for (Index j = 0; j < theta.size(); ++j) EXPECT_NEAR(coeffs[static_cast<std::size_t>(j)], theta[j], 1e-15);
}

TEST(Instruments, TimeZeroFlagDropsRoot) {
  const Market m = fixtures::binomial(false);
  EXPECT_TRUE(build_instruments(m).nodes.empty());
  EXPECT_EQ(build_instruments(fixtures::binomial()).nodes.size(), 1u);
}
