#pragma once

// Reproducible random instances. The calibrated measure Q is built first
// (full support, exact martingale), options are priced under it, and the
// ambiguity set is grown around full-support measures, so the calibrated
// set is nonempty and every member has an equivalent calibrated measure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "robustss/errors.hpp"
#include "robustss/instance_io.hpp"
#include "robustss/market.hpp"

namespace robustss {

struct GeneratorCaps {
  int max_periods = 3;
  int max_levels = 4;
  int max_options = 2;
};

enum class GeneratedAmbiguity { any, hull, density_band };

struct GeneratedInstance {
  json market;
  json ambiguity;
  std::string utility;
  double x0 = 1.0;
  Vector reference_q;  // the calibrated measure the instance was built from
};

namespace gen_detail {

// Uniform [0, 1) from the top 53 bits; independent of the standard
// library's distribution implementations.
class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : rng_(seed) {}
  double operator()() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  int below(int n) { return std::min(n - 1, static_cast<int>((*this)() * n)); }
  double exponential() { return -std::log(1.0 - (*this)()); }

 private:
  std::mt19937_64 rng_;
};

inline double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace gen_detail

inline GeneratedInstance generate_random_instance(std::uint64_t seed, const GeneratorCaps& caps = {},
                                                  GeneratedAmbiguity kind = GeneratedAmbiguity::any) {
  if (caps.max_periods < 1 || caps.max_periods > 3 || caps.max_levels < 2 || caps.max_levels > 4 ||
      caps.max_options < 0 || caps.max_options > 2)
    throw InvariantError("generator.caps", "caps must satisfy T <= 3, 2..4 levels, <= 2 options");
  gen_detail::Uniform u(seed);
  MarketGrid g;
  g.periods = 1 + u.below(caps.max_periods);
  g.spot = 1.0;
  double lo = g.spot, hi = g.spot;
  for (int t = 0; t < g.periods; ++t) {
    const int n = 2 + u.below(caps.max_levels - 1);
    const double low = gen_detail::round4(lo * (0.4 + 0.4 * u()));
    const double high = gen_detail::round4(hi * (1.3 + 0.9 * u()));
    std::vector<double> row{low, high};
    while (static_cast<int>(row.size()) < n) {
      const double v = gen_detail::round4(low + (high - low) * (0.05 + 0.9 * u()));
      if (std::find(row.begin(), row.end(), v) == row.end()) row.push_back(v);
    }
    std::sort(row.begin(), row.end());
    g.levels.push_back(row);
    lo = low;
    hi = high;
  }
  g.cap = 2.0 * hi;
  const PathSpace ps(g);

  // Q from per-node conditionals: a random Dirichlet(1) draw mixed with the
  // extreme level on the far side of the node price to hit the mean exactly.
  std::vector<std::vector<double>> cond(ps.node_count());
  for (std::size_t id = 0; id < ps.node_count(); ++id) {
    const PathNode& node = ps.node(static_cast<int>(id));
    const auto& row = g.levels[static_cast<std::size_t>(node.depth)];
    std::vector<double> w(row.size());
    double total = 0.0;
    for (auto& x : w) total += (x = u.exponential() + 1e-3);
    double mean = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) mean += (w[k] /= total) * row[k];
    const std::size_t ext = mean > node.price ? 0 : row.size() - 1;
    const double lambda = (mean - node.price) / (mean - row[ext]);
    for (auto& x : w) x *= 1.0 - lambda;
    w[ext] += lambda;
    cond[id] = w;
  }
  Vector q(static_cast<Index>(ps.path_count()));
  for (std::size_t p = 0; p < ps.path_count(); ++p) {
    double w = 1.0;
    const auto chain = ps.chain(p);
    for (int t = 0; t < g.periods; ++t) w *= cond[static_cast<std::size_t>(chain[t])][ps.level(p, t + 1)];
    q[static_cast<Index>(p)] = w;
  }
  q /= q.sum();

  std::vector<OptionContract> options;
  const int n_opt = u.below(caps.max_options + 1);
  for (int k = 0; k < n_opt; ++k) {
    OptionContract c;
    c.kind = u() < 0.5 ? OptionKind::call : OptionKind::put;
    c.maturity = 1 + u.below(g.periods);
    const auto& row = g.levels[static_cast<std::size_t>(c.maturity - 1)];
    c.strike = gen_detail::round4(row.front() + (row.back() - row.front()) * (0.1 + 0.8 * u()));
    double price = 0.0;
    for (std::size_t p = 0; p < ps.path_count(); ++p) price += q[static_cast<Index>(p)] * c.raw_payoff(ps, p);
    c.quoted_price = price;
    options.push_back(c);
  }
  const Market market(g, options);

  AmbiguitySpec amb;
  const bool hull = kind == GeneratedAmbiguity::hull || (kind == GeneratedAmbiguity::any && u() < 0.5);
  if (hull) {
    const int k = 2 + u.below(2);
    for (int v = 0; v < k; ++v) {
      std::vector<double> w(ps.path_count());
      double total = 0.0;
      for (auto& x : w) total += (x = u.exponential() + 0.05);
      for (auto& x : w) x /= total;
      amb.measures.push_back(w);
    }
  } else {
    amb.kind = AmbiguityModel::Kind::density_band;
    amb.alpha = gen_detail::round4(0.3 + 0.6 * u());
    amb.beta = gen_detail::round4(1.2 + 1.8 * u());
  }

  GeneratedInstance out;
  out.market = market_to_json(market);
  out.ambiguity = ambiguity_to_json(amb);
  static const char* utilities[] = {"log", "power:0.5", "bexp:0.5"};
  static const double capitals[] = {0.5, 1.0, 2.0};
  out.utility = utilities[seed % 3];
  out.x0 = capitals[(seed / 3) % 3];
  out.reference_q = q;
  return out;
}

}  // namespace robustss
