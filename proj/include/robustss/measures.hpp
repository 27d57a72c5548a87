#pragma once

// Probability measures on the path space, the calibrated martingale polytope,
// and ambiguity sets (finite hulls and density bands around calibrated
// martingale measures).

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "robustss/convex.hpp"
#include "robustss/errors.hpp"
#include "robustss/linear_program.hpp"
#include "robustss/market.hpp"
#include "robustss/tolerances.hpp"

namespace robustss {

class Measure {
 public:
  Measure() = default;

  explicit Measure(Vector weights) : w_(std::move(weights)) {
    if (w_.size() == 0) throw InvariantError("measure.weights", "empty weight vector");
    if (!w_.allFinite() || w_.minCoeff() < 0.0) throw InvariantError("measure.weights", "weights must be nonnegative");
    if (std::abs(w_.sum() - 1.0) > tol::measure_sum)
      throw InvariantError("measure.normalization", "weights must sum to 1");
  }
  explicit Measure(const std::vector<double>& weights)
      : Measure(Vector(Eigen::Map<const Vector>(weights.data(), static_cast<Index>(weights.size())))) {}

  /// Cleans solver output: clips round-off negatives and renormalizes.
  static Measure from_solver(const Vector& raw) {
    Vector w = raw;
    if (w.size() == 0 || w.minCoeff() < -tol::measure_validity)
      throw InvariantError("measure.weights", "solver returned a negative weight");
    for (Index i = 0; i < w.size(); ++i)
      if (w[i] < 1e-14) w[i] = 0.0;
    const double s = w.sum();
    if (std::abs(s - 1.0) > tol::measure_validity)
      throw InvariantError("measure.normalization", "solver weights do not sum to 1");
    w /= s;
    Measure m;
    m.w_ = w;
    return m;
  }

  Index size() const { return w_.size(); }
  double operator[](Index i) const { return w_[i]; }
  const Vector& weights() const { return w_; }

  std::vector<bool> support_mask() const {
    std::vector<bool> s(static_cast<std::size_t>(w_.size()));
    for (Index i = 0; i < w_.size(); ++i) s[static_cast<std::size_t>(i)] = w_[i] > 0.0;
    return s;
  }
  std::size_t support_size() const { return static_cast<std::size_t>((w_.array() > 0.0).count()); }

  double expectation(const Vector& f) const { return w_.dot(f); }

 private:
  Vector w_;
};

/// Calibration targets: option prices (from the market) and, optionally,
/// full per-period marginals on the grid levels.
struct CalibrationSpec {
  enum class Mode { options, marginals };
  Mode mode = Mode::options;
  std::vector<std::map<double, double>> marginals;  // per period: level -> mass
};

enum class SystemRowKind { node, option, marginal, normalization };

struct SystemRow {
  SystemRowKind kind;
  int ref = -1;    // node id, option index or period
  int level = -1;  // marginal rows only
};

/// Equality system whose nonnegative solutions are the calibrated martingale
/// measures. `instruments` are the strategy payoffs dual to the rows.
struct MartingaleSystem {
  Matrix rows;
  Vector rhs;
  std::vector<SystemRow> labels;
  InstrumentMatrix instruments;
  CalibrationSpec::Mode mode = CalibrationSpec::Mode::options;

  Index path_count() const { return rows.cols(); }
  double residual(const Vector& q) const { return (rows * q - rhs).lpNorm<Eigen::Infinity>(); }
  bool satisfied(const Vector& q) const {
    return residual(q) <= tol::feasibility && q.minCoeff() >= -tol::feasibility;
  }
};

inline MartingaleSystem build_martingale_system(const Market& market, const CalibrationSpec& calibration = {}) {
  const PathSpace& ps = market.paths;
  const Index n = static_cast<Index>(ps.path_count());
  std::vector<Vector> digitals;
  std::vector<SystemRow> marginal_labels;
  std::vector<double> marginal_masses;
  if (calibration.mode == CalibrationSpec::Mode::marginals) {
    if (static_cast<int>(calibration.marginals.size()) != market.grid.periods)
      throw InvariantError("marginal.periods", "one marginal per period required");
    for (int t = 1; t <= market.grid.periods; ++t) {
      const auto& mu = calibration.marginals[t - 1];
      const auto& lv = market.grid.levels[t - 1];
      std::vector<double> mass(lv.size(), 0.0);
      double total = 0.0, mean = 0.0;
      for (const auto& [level, w] : mu) {
        if (!(w >= 0.0) || !std::isfinite(w))
          throw InvariantError("marginal.mass", "negative marginal mass at period " + std::to_string(t));
        std::size_t k = lv.size();
        for (std::size_t j = 0; j < lv.size(); ++j)
          if (std::abs(lv[j] - level) <= 1e-12 * std::max(1.0, std::abs(level))) k = j;
        if (k == lv.size())
          throw InvariantError("marginal.support", "marginal level not on the grid at period " + std::to_string(t));
        mass[k] += w;
        total += w;
        mean += w * lv[k];
      }
      if (std::abs(total - 1.0) > tol::feasibility)
        throw InvariantError("marginal.normalization", "marginal masses must sum to 1 at period " + std::to_string(t));
      if (std::abs(mean - market.grid.spot) > tol::feasibility)
        throw InvariantError("marginal.mean", "marginal mean must equal s0 at period " + std::to_string(t));
      for (std::size_t k = 0; k < lv.size(); ++k) {
        Vector d(n);
        for (Index p = 0; p < n; ++p)
          d[p] = (ps.level(static_cast<std::size_t>(p), t) == static_cast<int>(k) ? 1.0 : 0.0) - mass[k];
        digitals.push_back(d);
        marginal_labels.push_back({SystemRowKind::marginal, t, static_cast<int>(k)});
        marginal_masses.push_back(mass[k]);
      }
    }
  }

  MartingaleSystem sys;
  sys.mode = calibration.mode;
  sys.instruments = build_instruments(market, digitals);
  const InstrumentMatrix& ins = sys.instruments;
  const Index rows = ins.size() + 1;
  sys.rows = Matrix::Zero(rows, n);
  sys.rhs = Vector::Zero(rows);
  Index r = 0;
  for (std::size_t k = 0; k < ins.nodes.size(); ++k, ++r) {
    sys.rows.row(r) = ins.payoff.col(r).transpose();
    sys.labels.push_back({SystemRowKind::node, ins.nodes[k]});
  }
  for (std::size_t i = 0; i < market.options.size(); ++i, ++r) {
    sys.rows.row(r) = ins.payoff.col(r).transpose();
    sys.labels.push_back({SystemRowKind::option, static_cast<int>(i)});
  }
  // marginal rows in level-mass form: sum over {s_t = level} q = mu_t(level)
  for (std::size_t e = 0; e < digitals.size(); ++e, ++r) {
    const SystemRow& lab = marginal_labels[e];
    for (Index p = 0; p < n; ++p)
      sys.rows(r, p) = ps.level(static_cast<std::size_t>(p), lab.ref) == lab.level ? 1.0 : 0.0;
    sys.rhs[r] = marginal_masses[e];
    sys.labels.push_back(lab);
  }
  sys.rows.row(r).setOnes();
  sys.rhs[r] = 1.0;
  sys.labels.push_back({SystemRowKind::normalization});
  return sys;
}

struct CalibrationResult {
  bool feasible = false;
  Measure measure;
  double min_weight = 0.0;  // over the required support
  Vector farkas;            // infeasibility multipliers on the system rows
};

/// Feasible calibrated measure vanishing off `support` (all paths when empty)
/// that maximizes the minimum weight over `support`.
inline CalibrationResult find_calibrated_measure(const MartingaleSystem& sys, const std::vector<bool>& support = {}) {
  const Index n = sys.path_count();
  LinearProgram lp(n + 1, ObjectiveSense::maximize);
  lp.objective[n] = 1.0;
  lp.set_bounds(n, -kInf, 1.0);
  Vector row = Vector::Zero(n + 1);
  for (Index i = 0; i < sys.rows.rows(); ++i) {
    row.head(n) = sys.rows.row(i).transpose();
    row[n] = 0.0;
    lp.add_row(row, RowType::eq, sys.rhs[i]);
  }
  for (Index p = 0; p < n; ++p) {
    const bool in = support.empty() || support[static_cast<std::size_t>(p)];
    if (!in) {
      lp.set_bounds(p, 0.0, 0.0);
      continue;
    }
    row.setZero();
    row[p] = 1.0;
    row[n] = -1.0;
    lp.add_row(row, RowType::ge, 0.0);
  }
  const LpResult res = solve_lp(lp);
  CalibrationResult out;
  if (res.status == LpStatus::infeasible) {
    out.farkas = res.farkas.head(sys.rows.rows());
    return out;
  }
  if (!res.optimal()) throw SolverError("calibration LP failed: " + std::string(to_string(res.status)));
  out.feasible = true;
  out.measure = Measure::from_solver(res.x.head(n));
  out.min_weight = res.x[n];
  return out;
}

/// A calibrated Q with exactly the support of P, or nullopt when none exists
/// (certified via the max-min-weight LP and the equivalence threshold).
inline std::optional<Measure> equivalent_martingale_for(const Measure& p, const MartingaleSystem& sys) {
  if (p.size() != sys.path_count()) throw InvariantError("measure.size", "measure does not match the path space");
  const CalibrationResult r = find_calibrated_measure(sys, p.support_mask());
  if (!r.feasible || r.min_weight < tol::equivalence_min_weight) return std::nullopt;
  return r.measure;
}

/// Lifted polytope { z >= 0 : E z = e, G z <= g } with measures p = L z.
struct LiftedPolytope {
  Matrix E;
  Vector e;
  Matrix G;
  Vector g;
  Matrix L;  // paths x lifted variables, nonnegative entries

  Index vars() const { return L.cols(); }
};

/// Face-reduced form of a lifted polytope: variables that vanish on the whole
/// set are dropped, implicit equalities moved into E, dependent rows removed.
/// The interior point has z > 0 and G z < g strictly.
struct ReducedPolytope {
  std::vector<Index> vars;  // indices into the full lifted variables
  Matrix E;
  Vector e;
  Matrix G;
  Vector g;
  Matrix L;
  Vector interior;
  std::vector<bool> union_support;  // paths some member charges

  Index dim() const { return L.cols(); }
  Vector expand(const Vector& z) const {
    Vector full = Vector::Zero(full_dim);
    for (std::size_t k = 0; k < vars.size(); ++k) full[vars[k]] = z[static_cast<Index>(k)];
    return full;
  }
  Index full_dim = 0;
};

/// Independent subset of the rows of (a | b), consistent within tolerance.
inline void independent_rows(Matrix& a, Vector& b) {
  if (a.rows() == 0) return;
  Eigen::ColPivHouseholderQR<Matrix> qr(a.transpose());
  qr.setThreshold(1e-10);
  const Index rank = qr.rank();
  const auto& perm = qr.colsPermutation().indices();
  std::vector<Index> keep(perm.data(), perm.data() + rank);
  std::sort(keep.begin(), keep.end());
  Matrix a2(rank, a.cols());
  Vector b2(rank);
  for (Index i = 0; i < rank; ++i) {
    a2.row(i) = a.row(keep[static_cast<std::size_t>(i)]);
    b2[i] = b[keep[static_cast<std::size_t>(i)]];
  }
  a = std::move(a2);
  b = std::move(b2);
}

inline ReducedPolytope reduce_polytope(const LiftedPolytope& lp) {
  const Index nz = lp.vars();
  Polyhedron poly(nz);
  for (Index i = 0; i < lp.E.rows(); ++i) poly.add_eq(lp.E.row(i).transpose(), lp.e[i]);
  for (Index j = 0; j < nz; ++j) {
    Vector r = Vector::Zero(nz);
    r[j] = -1.0;
    poly.add_ineq(r, 0.0);
  }
  for (Index i = 0; i < lp.G.rows(); ++i) poly.add_ineq(lp.G.row(i).transpose(), lp.g[i]);
  const RelativeInterior ri = relative_interior(poly);
  if (!ri.feasible) throw InvariantError("ambiguity.empty", "ambiguity polytope is empty");

  ReducedPolytope out;
  out.full_dim = nz;
  for (Index j = 0; j < nz; ++j)
    if (!ri.implicit_equality[static_cast<std::size_t>(j)]) out.vars.push_back(j);
  const Index k = static_cast<Index>(out.vars.size());
  auto restrict_cols = [&](const Matrix& m) {
    Matrix r(m.rows(), k);
    for (Index c = 0; c < k; ++c) r.col(c) = m.col(out.vars[static_cast<std::size_t>(c)]);
    return r;
  };
  Matrix e_rows = restrict_cols(lp.E);
  Vector e_rhs = lp.e;
  Matrix g_all = restrict_cols(lp.G);
  std::vector<Index> loose;
  for (Index i = 0; i < lp.G.rows(); ++i) {
    if (ri.implicit_equality[static_cast<std::size_t>(nz + i)]) {
      e_rows.conservativeResize(e_rows.rows() + 1, k);
      e_rows.row(e_rows.rows() - 1) = g_all.row(i);
      e_rhs.conservativeResize(e_rhs.size() + 1);
      e_rhs[e_rhs.size() - 1] = lp.g[i];
    } else {
      loose.push_back(i);
    }
  }
  independent_rows(e_rows, e_rhs);
  out.E = e_rows;
  out.e = e_rhs;
  out.G.resize(static_cast<Index>(loose.size()), k);
  out.g.resize(static_cast<Index>(loose.size()));
  for (std::size_t r = 0; r < loose.size(); ++r) {
    out.G.row(static_cast<Index>(r)) = g_all.row(loose[r]);
    out.g[static_cast<Index>(r)] = lp.g[loose[r]];
  }
  out.L = restrict_cols(lp.L);
  out.interior.resize(k);
  for (Index c = 0; c < k; ++c) out.interior[c] = ri.point[out.vars[static_cast<std::size_t>(c)]];
  out.union_support.assign(static_cast<std::size_t>(lp.L.rows()), false);
  for (Index p = 0; p < lp.L.rows(); ++p)
    for (Index c = 0; c < k; ++c)
      if (out.L(p, c) > 0.0) out.union_support[static_cast<std::size_t>(p)] = true;
  return out;
}

class AmbiguityModel {
 public:
  enum class Kind { hull, density_band };

  /// Convex hull of finitely many measures.
  static AmbiguityModel hull(std::vector<Measure> vertices) {
    if (vertices.empty()) throw InvariantError("ambiguity.hull", "hull needs at least one vertex");
    const Index n = vertices.front().size();
    for (const auto& v : vertices)
      if (v.size() != n) throw InvariantError("ambiguity.hull", "vertices must share the path space");
    AmbiguityModel a;
    a.kind_ = Kind::hull;
    a.paths_ = n;
    const Index k = static_cast<Index>(vertices.size());
    a.lifted_.E = Matrix::Ones(1, k);
    a.lifted_.e = Vector::Ones(1);
    a.lifted_.G = Matrix(0, k);
    a.lifted_.g = Vector(0);
    a.lifted_.L.resize(n, k);
    for (Index c = 0; c < k; ++c) a.lifted_.L.col(c) = vertices[static_cast<std::size_t>(c)].weights();
    a.vertices_ = std::move(vertices);
    a.reduced_ = reduce_polytope(a.lifted_);
    return a;
  }

  /// { P : alpha <= dP/dQ <= beta for some calibrated Q }, kept in lifted
  /// (p, q) variables.
  static AmbiguityModel density_band(double alpha, double beta, const MartingaleSystem& reference,
                                     const MarketGrid& grid) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvariantError("ambiguity.band", "alpha must lie in (0,1)");
    if (!(beta > 1.0) || !std::isfinite(beta)) throw InvariantError("ambiguity.band", "beta must lie in (1,inf)");
    if (!grid.cap) throw InvariantError("grid.cap", "density band needs a capped grid (bound M)");
    AmbiguityModel a;
    a.kind_ = Kind::density_band;
    a.alpha_ = alpha;
    a.beta_ = beta;
    const Index n = reference.path_count();
    a.paths_ = n;
    const Index r = reference.rows.rows();
    LiftedPolytope& lp = a.lifted_;
    lp.E = Matrix::Zero(r + 1, 2 * n);
    lp.e = Vector::Zero(r + 1);
    lp.E.block(0, n, r, n) = reference.rows;
    lp.e.head(r) = reference.rhs;
    lp.E.block(r, 0, 1, n).setOnes();
    lp.e[r] = 1.0;
    lp.G = Matrix::Zero(2 * n, 2 * n);
    lp.g = Vector::Zero(2 * n);
    for (Index i = 0; i < n; ++i) {
      lp.G(i, i) = -1.0;  // alpha q - p <= 0
      lp.G(i, n + i) = alpha;
      lp.G(n + i, i) = 1.0;  // p - beta q <= 0
      lp.G(n + i, n + i) = -beta;
    }
    lp.L = Matrix::Zero(n, 2 * n);
    lp.L.leftCols(n).setIdentity();
    try {
      a.reduced_ = reduce_polytope(lp);
    } catch (const InvariantError&) {
      throw InvariantError("ambiguity.reference", "reference martingale polytope is empty");
    }
    return a;
  }

  Kind kind() const { return kind_; }
  Index path_count() const { return paths_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  const std::vector<Measure>& vertices() const { return vertices_; }
  const LiftedPolytope& lifted() const { return lifted_; }
  const ReducedPolytope& reduced() const { return reduced_; }
  const std::vector<bool>& union_support() const { return reduced_.union_support; }

  Measure measure_of(const Vector& z_full) const { return Measure::from_solver(lifted_.L * z_full); }

  /// Lifted-variable feasibility check (tolerance on rows and signs).
  bool lifted_feasible(const Vector& z, double tol = tol::feasibility) const {
    if (z.size() != lifted_.vars() || z.minCoeff() < -tol) return false;
    if ((lifted_.E * z - lifted_.e).lpNorm<Eigen::Infinity>() > tol) return false;
    if (lifted_.G.rows() > 0 && (lifted_.G * z - lifted_.g).maxCoeff() > tol) return false;
    return true;
  }

  /// Membership of a measure: LP feasibility over the lifted variables with p fixed.
  bool contains(const Measure& p, double tol = tol::feasibility) const {
    const Index nz = lifted_.vars();
    LinearProgram lp(nz);
    for (Index i = 0; i < lifted_.E.rows(); ++i) lp.add_row(lifted_.E.row(i).transpose(), RowType::eq, lifted_.e[i]);
    for (Index i = 0; i < lifted_.G.rows(); ++i)
      lp.add_row(lifted_.G.row(i).transpose(), RowType::le, lifted_.g[i] + tol);
    for (Index i = 0; i < paths_; ++i) {
      lp.add_row(lifted_.L.row(i).transpose(), RowType::le, p[i] + tol);
      lp.add_row(lifted_.L.row(i).transpose(), RowType::ge, p[i] - tol);
    }
    return solve_lp(lp).optimal();
  }

 private:
  Kind kind_ = Kind::hull;
  Index paths_ = 0;
  double alpha_ = 0.0, beta_ = 0.0;
  std::vector<Measure> vertices_;
  LiftedPolytope lifted_;
  ReducedPolytope reduced_;
};

struct WorstCase {
  double value = 0.0;
  Measure minimizer;
  Vector lifted;  // optimal lifted variables
};

/// min over the ambiguity set of E_P[f]; an LP in the lifted variables.
inline WorstCase worst_case_expectation(const AmbiguityModel& amb, const Vector& f) {
  const LiftedPolytope& lp_data = amb.lifted();
  if (f.size() != amb.path_count()) throw InvariantError("payoff.size", "payoff must be defined on every path");
  const Index nz = lp_data.vars();
  LinearProgram lp(nz);
  lp.objective = lp_data.L.transpose() * f;
  for (Index i = 0; i < lp_data.E.rows(); ++i) lp.add_row(lp_data.E.row(i).transpose(), RowType::eq, lp_data.e[i]);
  for (Index i = 0; i < lp_data.G.rows(); ++i) lp.add_row(lp_data.G.row(i).transpose(), RowType::le, lp_data.g[i]);
  const LpResult res = solve_lp(lp);
  if (!res.optimal()) throw SolverError("worst-case LP failed: " + std::string(to_string(res.status)));
  WorstCase out;
  out.value = res.objective;
  out.lifted = res.x;
  out.minimizer = amb.measure_of(res.x.cwiseMax(0.0));
  return out;
}

}  // namespace robustss
