#pragma once

// Discrete market on a finite path space: price grid, path/prefix-node
// enumeration, option contracts, semi-static strategies and their payoffs.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "robustss/errors.hpp"

namespace robustss {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct MarketGrid {
  int periods = 0;
  double spot = 0.0;
  std::vector<std::vector<double>> levels;  // levels[t-1] for t = 1..T
  std::optional<double> cap;

  void validate() const {
    if (periods < 1) throw InvariantError("grid.periods", "T must be >= 1");
    if (!(spot > 0.0) || !std::isfinite(spot)) throw InvariantError("grid.spot", "s0 must be positive");
    if (static_cast<int>(levels.size()) != periods)
      throw InvariantError("grid.levels", "expected one level list per period");
    for (std::size_t t = 0; t < levels.size(); ++t) {
      const auto& row = levels[t];
      if (row.empty())
        throw InvariantError("grid.levels", "empty level list at period " + std::to_string(t + 1));
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (!(row[k] > 0.0) || !std::isfinite(row[k]))
          throw InvariantError("grid.levels", "levels must be positive and finite");
        if (k > 0 && !(row[k] > row[k - 1]))
          throw InvariantError("grid.levels", "levels must be strictly increasing per period");
        if (cap && row[k] > *cap)
          throw InvariantError("grid.cap", "level exceeds cap M");
      }
    }
  }
};

/// Prefix (s_1, ..., s_depth) of a path. The root has depth 0 and price s0.
struct PathNode {
  int depth = 0;
  double price = 0.0;  // s_depth, or s0 at the root
  int parent = -1;
  std::vector<int> children;
  std::size_t first_path = 0;  // paths through a node are contiguous
  std::size_t path_count = 0;
};

/// Full Cartesian enumeration of price paths, lexicographic by level index,
/// with the prefix tree of non-terminal nodes (depth 0..T-1).
class PathSpace {
 public:
  PathSpace() = default;

  explicit PathSpace(const MarketGrid& grid) : periods_(grid.periods), spot_(grid.spot) {
    grid.validate();
    std::size_t count = 1;
    for (const auto& row : grid.levels) count *= row.size();
    level_index_.resize(count * periods_);
    prices_.resize(count * periods_);
    // suffix_[t] = number of paths sharing a prefix of length t
    std::vector<std::size_t> suffix(periods_ + 1, 1);
    for (int t = periods_ - 1; t >= 0; --t) suffix[t] = suffix[t + 1] * grid.levels[t].size();
    for (std::size_t p = 0; p < count; ++p) {
      for (int t = 0; t < periods_; ++t) {
        const std::size_t k = (p / suffix[t + 1]) % grid.levels[t].size();
        level_index_[p * periods_ + t] = static_cast<int>(k);
        prices_[p * periods_ + t] = grid.levels[t][k];
      }
    }
    path_count_ = count;

    nodes_.push_back(PathNode{0, spot_, -1, {}, 0, count});
    depth_begin_.assign(periods_ + 1, 0);
    std::vector<int> frontier{0};
    for (int depth = 1; depth < periods_; ++depth) {
      depth_begin_[depth] = nodes_.size();
      std::vector<int> next;
      for (int id : frontier) {
        const std::size_t width = suffix[depth];
        const std::size_t first = nodes_[id].first_path;
        for (std::size_t k = 0; k < grid.levels[depth - 1].size(); ++k) {
          PathNode child;
          child.depth = depth;
          child.price = grid.levels[depth - 1][k];
          child.parent = id;
          child.first_path = first + k * width;
          child.path_count = width;
          const int cid = static_cast<int>(nodes_.size());
          nodes_.push_back(child);
          nodes_[id].children.push_back(cid);
          next.push_back(cid);
        }
      }
      frontier = std::move(next);
    }
    depth_begin_[periods_] = nodes_.size();
    leaf_parent_.assign(count, 0);
    for (int id : frontier)
      for (std::size_t p = nodes_[id].first_path; p < nodes_[id].first_path + nodes_[id].path_count; ++p)
        leaf_parent_[p] = id;
  }

  int periods() const { return periods_; }
  double spot() const { return spot_; }
  std::size_t path_count() const { return path_count_; }
  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<PathNode>& nodes() const { return nodes_; }
  const PathNode& node(int id) const { return nodes_[id]; }

  /// s_t along path p, t in 0..T (t = 0 gives s0).
  double price(std::size_t path, int t) const {
    return t == 0 ? spot_ : prices_[path * periods_ + (t - 1)];
  }
  int level(std::size_t path, int t) const { return level_index_[path * periods_ + (t - 1)]; }

  /// Node ids on the ancestor chain of a path, ordered by depth 0..T-1.
  std::vector<int> chain(std::size_t path) const {
    std::vector<int> out(periods_);
    int id = leaf_parent_[path];
    for (int d = periods_ - 1; d >= 0; --d) {
      out[d] = id;
      id = nodes_[id].parent;
    }
    return out;
  }

 private:
  int periods_ = 0;
  double spot_ = 0.0;
  std::size_t path_count_ = 0;
  std::vector<int> level_index_;
  std::vector<double> prices_;
  std::vector<PathNode> nodes_;
  std::vector<std::size_t> depth_begin_;
  std::vector<int> leaf_parent_;
};

inline PathSpace build_path_space(const MarketGrid& grid) { return PathSpace(grid); }

enum class OptionKind { call, put, table };

/// A traded claim. The stored quote is folded into the net payoff, so the
/// contract trades at zero cost.
struct OptionContract {
  OptionKind kind = OptionKind::call;
  int maturity = 1;  // ignored for tables
  double strike = 0.0;
  double quoted_price = 0.0;
  std::vector<double> table;  // raw payoff per path (lexicographic order)

  double raw_payoff(const PathSpace& paths, std::size_t path) const {
    switch (kind) {
      case OptionKind::call:
        return std::max(paths.price(path, maturity) - strike, 0.0);
      case OptionKind::put:
        return std::max(strike - paths.price(path, maturity), 0.0);
      case OptionKind::table:
        if (path >= table.size())
          throw InvariantError("option.table", "no table entry for path " + std::to_string(path));
        return table[path];
    }
    return 0.0;
  }
};

inline double evaluate_net_option(const OptionContract& contract, const PathSpace& paths, std::size_t path) {
  if (contract.kind != OptionKind::table && (contract.maturity < 1 || contract.maturity > paths.periods()))
    throw InvariantError("option.maturity", "maturity must lie in 1..T");
  return contract.raw_payoff(paths, path) - contract.quoted_price;
}

struct Market {
  MarketGrid grid;
  PathSpace paths;
  std::vector<OptionContract> options;
  bool time_zero_trading = true;

  Market() = default;
  Market(MarketGrid g, std::vector<OptionContract> opts, bool time_zero = true)
      : grid(std::move(g)), paths(grid), options(std::move(opts)), time_zero_trading(time_zero) {
    for (const auto& o : options) {
      if (o.kind == OptionKind::table) {
        if (o.table.size() != paths.path_count())
          throw InvariantError("option.table", "table payoff needs one value per path");
      } else {
        if (o.maturity < 1 || o.maturity > grid.periods)
          throw InvariantError("option.maturity", "maturity must lie in 1..T");
        if (!(o.strike >= 0.0)) throw InvariantError("option.strike", "strike must be nonnegative");
      }
    }
  }

  /// Nodes where the stock position is chosen: depth 1..T-1, plus the root
  /// when time-zero trading is on.
  std::vector<int> trading_nodes() const {
    std::vector<int> out;
    for (std::size_t id = 0; id < paths.node_count(); ++id)
      if (paths.node(static_cast<int>(id)).depth > 0 || time_zero_trading) out.push_back(static_cast<int>(id));
    return out;
  }
};

/// Static holdings h (one per static instrument) and a stock holding per
/// prefix node. Nodes that do not trade keep a zero holding.
struct TradingStrategy {
  double x = 0.0;
  std::vector<double> h;
  std::vector<double> delta;  // indexed by node id
};

/// Per-path payoff matrix of the tradable instruments: one column per trading
/// node (gain Delta=1 held over that node's step), then one per static claim.
struct InstrumentMatrix {
  Matrix payoff;  // paths x instruments
  std::vector<int> nodes;
  std::size_t static_count = 0;

  Index size() const { return payoff.cols(); }

  std::vector<double> to_coefficients(const TradingStrategy& s) const {
    std::vector<double> theta(payoff.cols(), 0.0);
    for (std::size_t k = 0; k < nodes.size(); ++k)
      theta[k] = nodes[k] < static_cast<int>(s.delta.size()) ? s.delta[nodes[k]] : 0.0;
    for (std::size_t i = 0; i < static_count && i < s.h.size(); ++i) theta[nodes.size() + i] = s.h[i];
    return theta;
  }

  TradingStrategy to_strategy(double x, const Vector& theta, std::size_t node_count) const {
    TradingStrategy s;
    s.x = x;
    s.delta.assign(node_count, 0.0);
    for (std::size_t k = 0; k < nodes.size(); ++k) s.delta[nodes[k]] = theta[static_cast<Index>(k)];
    s.h.resize(static_count);
    for (std::size_t i = 0; i < static_count; ++i) s.h[i] = theta[static_cast<Index>(nodes.size() + i)];
    return s;
  }
};

/// Instruments for a market with extra static claims appended after the
/// options (used for marginal calibration digitals). Columns hold net payoffs.
inline InstrumentMatrix build_instruments(const Market& m, const std::vector<Vector>& extra_static = {}) {
  InstrumentMatrix out;
  out.nodes = m.trading_nodes();
  out.static_count = m.options.size() + extra_static.size();
  const std::size_t n_paths = m.paths.path_count();
  out.payoff = Matrix::Zero(static_cast<Index>(n_paths), static_cast<Index>(out.nodes.size() + out.static_count));
  for (std::size_t k = 0; k < out.nodes.size(); ++k) {
    const PathNode& node = m.paths.node(out.nodes[k]);
    for (std::size_t p = node.first_path; p < node.first_path + node.path_count; ++p)
      out.payoff(static_cast<Index>(p), static_cast<Index>(k)) = m.paths.price(p, node.depth + 1) - node.price;
  }
  for (std::size_t i = 0; i < m.options.size(); ++i)
    for (std::size_t p = 0; p < n_paths; ++p)
      out.payoff(static_cast<Index>(p), static_cast<Index>(out.nodes.size() + i)) =
          evaluate_net_option(m.options[i], m.paths, p);
  for (std::size_t e = 0; e < extra_static.size(); ++e)
    out.payoff.col(static_cast<Index>(out.nodes.size() + m.options.size() + e)) = extra_static[e];
  return out;
}

/// x + h.g(path) + sum over trading nodes on the path of Delta (s_{j+1} - s_j).
inline double terminal_wealth(const TradingStrategy& s, const Market& m, std::size_t path) {
  double w = s.x;
  for (std::size_t i = 0; i < m.options.size() && i < s.h.size(); ++i)
    w += s.h[i] * evaluate_net_option(m.options[i], m.paths, path);
  const auto chain = m.paths.chain(path);
  for (int id : chain) {
    const PathNode& node = m.paths.node(id);
    if (node.depth == 0 && !m.time_zero_trading) continue;
    if (id < static_cast<int>(s.delta.size()))
      w += s.delta[id] * (m.paths.price(path, node.depth + 1) - node.price);
  }
  return w;
}

/// Terminal wealth on every path through an instrument matrix (which may carry
/// static claims beyond the market's options).
inline Vector wealth_vector(const InstrumentMatrix& ins, double x, const Vector& theta) {
  Vector w = ins.payoff * theta;
  w.array() += x;
  return w;
}

}  // namespace robustss
