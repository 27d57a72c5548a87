#pragma once

// Robust primal values: u_P(x) for a fixed measure, the robust value
// u-hat(x) = sup over strategies of inf over P, and u(x) = inf_P u_P(x).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "robustss/convex.hpp"
#include "robustss/errors.hpp"
#include "robustss/linear_program.hpp"
#include "robustss/market.hpp"
#include "robustss/measures.hpp"
#include "robustss/tolerances.hpp"
#include "robustss/utility.hpp"

namespace robustss {

struct PrimalSolution {
  double value = 0.0;
  double upper_bound = 0.0;
  double certified_gap = 0.0;
  TradingStrategy strategy;
  Vector theta;   // instrument coefficients
  Vector wealth;  // terminal wealth on every path
  Measure worst_measure;
  bool converged = false;
  std::vector<std::string> diagnostics;
};

/// E_P U(wealth). Wealth <= 0 on a charged path is an admissibility
/// violation; wealth in (0, xmin) is clamped with a diagnostic.
inline double expected_utility(const Measure& p, const Vector& wealth, const UtilityFamily& u,
                               std::vector<std::string>* diagnostics = nullptr) {
  if (wealth.size() != p.size()) throw InvariantError("wealth.size", "wealth must be given on every path");
  double s = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    double w = wealth[i];
    if (!(w > 0.0)) throw InvariantError("admissibility", "wealth <= 0 on path " + std::to_string(i));
    if (w < tol::wealth_floor) {
      if (diagnostics) diagnostics->push_back("wealth clamped to xmin on path " + std::to_string(i));
      w = tol::wealth_floor;
    }
    s += p[i] * u.value(w);
  }
  return s;
}

inline double expected_utility(const Measure& p, const TradingStrategy& s, const Market& m, const UtilityFamily& u,
                               std::vector<std::string>* diagnostics = nullptr) {
  Vector w(static_cast<Index>(m.paths.path_count()));
  for (Index i = 0; i < w.size(); ++i) w[i] = terminal_wealth(s, m, static_cast<std::size_t>(i));
  return expected_utility(p, w, u, diagnostics);
}

namespace detail {

/// Instruments restricted to a path subset, reparameterized by an
/// orthonormal basis of their payoff range on that subset.
struct RestrictedMarket {
  std::vector<Index> rows;
  Matrix basis;  // |rows| x r
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;

  Index dim() const { return basis.cols(); }

  Vector theta_of(const Vector& w) const {
    if (basis.cols() == 0) return Vector::Zero(cod.cols());
    return cod.solve(basis * w);
  }
};

inline RestrictedMarket restrict_market(const InstrumentMatrix& ins, const std::vector<bool>& support) {
  RestrictedMarket rm;
  for (Index p = 0; p < ins.payoff.rows(); ++p)
    if (support[static_cast<std::size_t>(p)]) rm.rows.push_back(p);
  Matrix a(static_cast<Index>(rm.rows.size()), ins.payoff.cols());
  for (std::size_t k = 0; k < rm.rows.size(); ++k) a.row(static_cast<Index>(k)) = ins.payoff.row(rm.rows[k]);
  rm.basis = a.cols() > 0 ? range_basis(a) : Matrix(a.rows(), 0);
  rm.cod.compute(a);
  return rm;
}

struct UtilityDerivatives {
  Vector u, du, d2u;
};

inline bool utility_derivatives(const UtilityFamily& util, const Vector& w, UtilityDerivatives& out) {
  out.u.resize(w.size());
  out.du.resize(w.size());
  out.d2u.resize(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0)) return false;
    out.u[i] = util.value(w[i]);
    out.du[i] = util.marginal(w[i]);
    out.d2u[i] = util.curvature(w[i]);
  }
  return true;
}

struct InnerSolve {
  Vector w;
  Vector wealth;  // on the restricted rows
  double value = 0.0;
  bool converged = false;
};

/// max_w sum_i p_i U(x + (B w)_i) by damped Newton. Converges to round-off.
inline InnerSolve maximize_expected_utility(const Vector& p, const Matrix& b, double x, const UtilityFamily& util,
                                            const Vector* warm = nullptr) {
  const Index r = b.cols();
  InnerSolve out;
  out.w = Vector::Zero(r);
  if (warm && warm->size() == r && ((x + (b * *warm).array()) > 0.0).all()) out.w = *warm;
  UtilityDerivatives d;
  auto value_at = [&](const Vector& w, double& val) {
    const Vector wealth = (b * w).array() + x;
    if ((wealth.array() <= 0.0).any()) return false;
    val = 0.0;
    for (Index i = 0; i < p.size(); ++i) val += p[i] * util.value(wealth[i]);
    return std::isfinite(val);
  };
  double best_value = -kInf, best_lambda = kInf;
  int stall = 0;
  for (int it = 0; it < 500 && r > 0; ++it) {
    const Vector wealth = (b * out.w).array() + x;
    utility_derivatives(util, wealth, d);
    const Vector g = b.transpose() * p.cwiseProduct(d.du);
    const Matrix k = b.transpose() * (-p.cwiseProduct(d.d2u)).asDiagonal() * b;
    Eigen::LDLT<Matrix> ldlt(k);
    Vector step = ldlt.solve(g);
    if (!step.allFinite()) step = k.completeOrthogonalDecomposition().solve(g);
    const double lambda2 = g.dot(step);
    if (lambda2 < 1e-26) {
      out.converged = true;
      break;
    }
    double val0;
    value_at(out.w, val0);
    // a stall is neither visible ascent (damped phase) nor a shrinking
    // decrement (quadratic phase, where ascent drowns in round-off)
    const bool ascent = val0 > best_value + 1e-14 * (1.0 + std::abs(val0));
    best_value = std::max(best_value, val0);
    if (ascent || lambda2 < 0.5 * best_lambda) {
      best_lambda = std::min(best_lambda, lambda2);
      stall = 0;
    } else if (++stall >= 4) {
      out.converged = lambda2 < 1e-16;
      break;
    }
    double alpha = 1.0;
    bool moved = false;
    while (alpha > 1e-16) {
      const Vector trial = out.w + alpha * step;
      double val;
      if (value_at(trial, val) && val >= val0 + 0.25 * alpha * lambda2 - 1e-15 * (1.0 + std::abs(val0))) {
        out.w = trial;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) {
      out.converged = lambda2 < 1e-16;
      break;
    }
  }
  if (r == 0) out.converged = true;
  out.wealth = (b * out.w).array() + x;
  value_at(out.w, out.value);
  // a warm start far out on a flat ridge can stall; the cold start cannot be worse off
  if (!out.converged && warm) {
    InnerSolve cold = maximize_expected_utility(p, b, x, util, nullptr);
    if (cold.converged || cold.value > out.value) return cold;
  }
  return out;
}

/// Upper bound for max_w F(w) over {x + B w >= 0} from the tangent of the
/// concave F at w0: F(w0) + max g.(w - w0).
inline double tangent_upper_bound(double f0, const Vector& g, const Vector& w0, const Matrix& b, double x) {
  const Index r = b.cols();
  if (r == 0) return f0;
  LinearProgram lp(r, ObjectiveSense::maximize);
  lp.objective = g;
  for (Index j = 0; j < r; ++j) lp.set_free(j);
  for (Index i = 0; i < b.rows(); ++i) lp.add_row(-b.row(i).transpose(), RowType::le, x);
  const LpResult res = solve_lp(lp);
  if (res.status == LpStatus::unbounded) return kInf;
  if (!res.optimal()) throw SolverError("tangent bound LP failed: " + std::string(to_string(res.status)));
  return f0 + res.objective - g.dot(w0);
}

inline Vector restrict(const Vector& v, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Index>(k)] = v[rows[k]];
  return out;
}

inline void fill_strategy(PrimalSolution& sol, const Market& market, const InstrumentMatrix& ins,
                          const RestrictedMarket& rm, double x, const Vector& w) {
  sol.theta = rm.theta_of(w);
  sol.wealth = wealth_vector(ins, x, sol.theta);
  sol.strategy = ins.to_strategy(x, sol.theta, market.paths.node_count());
}

}  // namespace detail

/// Every hull vertex must admit an equivalent calibrated measure; density
/// bands satisfy this by construction (p and its q share a support).
inline void certify_equivalent_measures(const AmbiguityModel& amb, const MartingaleSystem& sys) {
  if (amb.kind() != AmbiguityModel::Kind::hull) return;
  for (std::size_t k = 0; k < amb.vertices().size(); ++k)
    if (!equivalent_martingale_for(amb.vertices()[k], sys))
      throw InvariantError("assumption.equivalent_measure",
                           "ambiguity vertex " + std::to_string(k) + " has no equivalent calibrated measure");
}

/// u_P(x) = sup over strategies admissible on supp P of E_P U(wealth).
inline PrimalSolution solve_u_P(double x, const Measure& p, const Market& market, const MartingaleSystem& sys,
                                const UtilityFamily& util) {
  if (!(x > 0.0)) throw InvariantError("x.positive", "initial capital must be positive");
  if (!equivalent_martingale_for(p, sys))
    throw InvariantError("assumption.equivalent_measure", "no calibrated measure equivalent to P");
  const auto rm = detail::restrict_market(sys.instruments, p.support_mask());
  const Vector ps = detail::restrict(p.weights(), rm.rows);
  const auto inner = detail::maximize_expected_utility(ps, rm.basis, x, util);
  detail::UtilityDerivatives d;
  detail::utility_derivatives(util, inner.wealth, d);
  const Vector g = rm.basis.transpose() * ps.cwiseProduct(d.du);
  PrimalSolution sol;
  detail::fill_strategy(sol, market, sys.instruments, rm, x, inner.w);
  sol.value = expected_utility(p, sol.wealth, util, &sol.diagnostics);
  sol.upper_bound = detail::tangent_upper_bound(inner.value, g, inner.w, rm.basis, x);
  sol.certified_gap = std::max(0.0, sol.upper_bound - sol.value);
  sol.worst_measure = p;
  sol.converged = sol.certified_gap <= tol::saddle;
  return sol;
}

/// A member of the ambiguity set that is itself calibrated, if any.
inline std::optional<Measure> calibrated_member(const AmbiguityModel& amb, const MartingaleSystem& sys) {
  const LiftedPolytope& z = amb.lifted();
  const Index nz = z.vars();
  LinearProgram lp(nz);
  for (Index i = 0; i < z.E.rows(); ++i) lp.add_row(z.E.row(i).transpose(), RowType::eq, z.e[i]);
  for (Index i = 0; i < z.G.rows(); ++i) lp.add_row(z.G.row(i).transpose(), RowType::le, z.g[i]);
  const Matrix rows = sys.rows * z.L;
  for (Index i = 0; i < rows.rows(); ++i) lp.add_row(rows.row(i).transpose(), RowType::eq, sys.rhs[i]);
  const LpResult res = solve_lp(lp);
  if (!res.optimal() || res.primal_residual > tol::feasibility) return std::nullopt;
  Measure p = amb.measure_of(res.x);
  if (sys.residual(p.weights()) > tol::feasibility) return std::nullopt;
  return p;
}

/// u-hat(x): maximizes w -> min over the ambiguity set of E_P U(x + B w).
/// The inner minimum is dualized into (mu, nu) so the problem becomes
///   max e.mu - g.nu  s.t.  (E^T mu - G^T nu)_j <= sum_paths L_ij U(W_i),  nu >= 0
/// and is solved by the barrier method; admissibility holds on the union of
/// supports. Certified by the worst-case LP at the solution (lower bound) and
/// the tangent-linearized LP (upper bound).
inline PrimalSolution solve_robust_primal(double x, const AmbiguityModel& amb, const Market& market,
                                          const MartingaleSystem& sys, const UtilityFamily& util) {
  if (!(x > 0.0)) throw InvariantError("x.positive", "initial capital must be positive");
  const ReducedPolytope& z = amb.reduced();
  const auto rm = detail::restrict_market(sys.instruments, z.union_support);

  // With a calibrated member P every attainable wealth has E_P X = x, so by
  // Jensen u(x) <= u_P(x) <= U(x), which the riskless position attains.
  if (const auto member = calibrated_member(amb, sys)) {
    PrimalSolution sol;
    detail::fill_strategy(sol, market, sys.instruments, rm, x, Vector::Zero(rm.basis.cols()));
    sol.value = sol.upper_bound = util.value(x);
    sol.worst_measure = *member;
    sol.converged = true;
    sol.diagnostics.push_back("calibrated member certifies the riskless position");
    return sol;
  }

  const Matrix& b = rm.basis;
  const Index r = b.cols(), nu = b.rows(), k = z.dim(), me = z.E.rows(), mg = z.G.rows();
  Matrix lu(nu, k);
  for (Index i = 0; i < nu; ++i) lu.row(i) = z.L.row(rm.rows[static_cast<std::size_t>(i)]);
  const Index dim = r + me + mg;

  // strictly feasible (mu, nu) at w = 0
  const Vector c0 = lu.transpose() * Vector::Constant(nu, util.value(x));
  Vector start = Vector::Zero(dim);
  {
    LinearProgram lp(me + mg + 1, ObjectiveSense::maximize);
    for (Index j = 0; j < me; ++j) lp.set_free(j);
    lp.set_free(me + mg);
    lp.set_bounds(me + mg, -kInf, 1.0);
    lp.objective[me + mg] = 1.0;
    Vector row(me + mg + 1);
    for (Index j = 0; j < k; ++j) {
      row << z.E.col(j), -z.G.col(j), 1.0;
      lp.add_row(row, RowType::le, c0[j]);
    }
    for (Index i = 0; i < mg; ++i) {
      row.setZero();
      row[me + i] = 1.0;
      row[me + mg] = -1.0;
      lp.add_row(row, RowType::ge, 0.0);
    }
    const LpResult res = solve_lp(lp);
    if (!res.optimal() || !(res.x[me + mg] > 0.0))
      throw SolverError("no strictly feasible start for the robust primal barrier");
    start.segment(r, me + mg) = res.x.head(me + mg);
  }

  BarrierProblem prob;
  prob.dim = dim;
  prob.objective.eval = [&](const Vector& v, double& f, Vector* g, Matrix* h) {
    f = -(z.e.dot(v.segment(r, me)) - z.g.dot(v.tail(mg)));
    if (g) {
      *g = Vector::Zero(dim);
      g->segment(r, me) = -z.e;
      g->tail(mg) = z.g;
    }
    if (h) *h = Matrix::Zero(dim, dim);
    return true;
  };
  prob.barrier_terms = k;
  prob.barrier.eval = [&](const Vector& v, double& f, Vector* g, Matrix* h) {
    const Vector wealth = (b * v.head(r)).array() + x;
    detail::UtilityDerivatives d;
    if (!detail::utility_derivatives(util, wealth, d)) return false;
    const Vector c = lu.transpose() * d.u;
    const Vector a = z.E.transpose() * v.segment(r, me) - z.G.transpose() * v.tail(mg);
    const Vector s = c - a;
    if ((s.array() <= 0.0).any()) return false;
    f = -s.array().log().sum();
    if (!g && !h) return true;
    Matrix jac(dim, k);  // columns: gradients of a_j - c_j
    jac.topRows(r) = -b.transpose() * d.du.asDiagonal() * lu;
    jac.middleRows(r, me) = z.E;
    jac.bottomRows(mg) = -z.G;
    const Vector inv = s.cwiseInverse();
    if (g) *g = jac * inv;
    if (h) {
      *h = jac * inv.cwiseProduct(inv).asDiagonal() * jac.transpose();
      const Vector weight = -d.d2u.cwiseProduct(lu * inv);
      h->topLeftCorner(r, r) += b.transpose() * weight.asDiagonal() * b;
    }
    return true;
  };
  prob.ineq = Matrix::Zero(nu + mg, dim);
  prob.ineq_rhs = Vector::Zero(nu + mg);
  prob.ineq.topLeftCorner(nu, r) = -b;
  prob.ineq_rhs.head(nu).setConstant(x);
  prob.ineq.bottomRightCorner(mg, mg) = -Matrix::Identity(mg, mg);
  prob.eq = Matrix(0, dim);
  prob.eq_rhs = Vector(0);

  const BarrierResult br = minimize_barrier(prob, start);
  const Vector w = br.point.head(r);

  PrimalSolution sol;
  detail::fill_strategy(sol, market, sys.instruments, rm, x, w);
  Vector uw = Vector::Zero(sol.wealth.size());
  for (Index i : rm.rows) {
    if (!(sol.wealth[i] > 0.0)) throw InvariantError("admissibility", "robust primal wealth left the domain");
    uw[i] = util.value(std::max(sol.wealth[i], tol::wealth_floor));
  }
  const WorstCase wc = worst_case_expectation(amb, uw);
  sol.value = wc.value;
  sol.worst_measure = wc.minimizer;

  // tangent-linearized dual LP at w
  {
    const Vector wealth = (b * w).array() + x;
    detail::UtilityDerivatives d;
    detail::utility_derivatives(util, wealth, d);
    const Vector c = lu.transpose() * d.u;
    const Matrix grad = b.transpose() * d.du.asDiagonal() * lu;  // r x k
    LinearProgram lp(dim, ObjectiveSense::maximize);
    for (Index j = 0; j < r + me; ++j) lp.set_free(j);
    lp.objective.segment(r, me) = z.e;
    lp.objective.tail(mg) = -z.g;
    Vector row(dim);
    for (Index j = 0; j < k; ++j) {
      row << -grad.col(j), z.E.col(j), -z.G.col(j);
      lp.add_row(row, RowType::le, c[j] - grad.col(j).dot(w));
    }
    for (Index i = 0; i < nu; ++i) {
      row.setZero();
      row.head(r) = -b.row(i).transpose();
      lp.add_row(row, RowType::le, x);
    }
    const LpResult res = solve_lp(lp);
    if (res.status == LpStatus::unbounded) {
      sol.upper_bound = kInf;
    } else if (!res.optimal()) {
      throw SolverError("robust primal bound LP failed: " + std::string(to_string(res.status)));
    } else {
      sol.upper_bound = res.objective;
    }
  }
  sol.certified_gap = std::max(0.0, sol.upper_bound - sol.value);
  sol.converged = sol.certified_gap <= tol::saddle;
  if (!br.converged) sol.diagnostics.push_back("robust primal barrier stopped early");
  return sol;
}

struct RobustValue {
  double value = 0.0;
  double lower_bound = 0.0;
  double certified_gap = 0.0;
  Measure argmin;
  Vector lifted;   // full lifted variables at the minimizer
  Vector wealth;   // optimal wealth for the minimizing measure (union rows; zero elsewhere)
  bool converged = false;
};

/// u(x) = inf over the ambiguity set of u_P(x), minimized over the lifted
/// polytope by the barrier method; each evaluation is a full inner solve.
inline RobustValue solve_u(double x, const AmbiguityModel& amb, const MartingaleSystem& sys,
                           const UtilityFamily& util) {
  if (!(x > 0.0)) throw InvariantError("x.positive", "initial capital must be positive");
  const ReducedPolytope& z = amb.reduced();
  const auto rm = detail::restrict_market(sys.instruments, z.union_support);
  const Matrix& b = rm.basis;
  const Index nu = b.rows(), k = z.dim();
  Matrix lu(nu, k);
  for (Index i = 0; i < nu; ++i) lu.row(i) = z.L.row(rm.rows[static_cast<std::size_t>(i)]);

  Vector warm = Vector::Zero(b.cols());
  BarrierProblem prob;
  prob.dim = k;
  prob.objective.eval = [&](const Vector& v, double& f, Vector* g, Matrix* h) {
    const Vector p = lu * v;
    if ((p.array() <= 0.0).any()) return false;
    const auto inner = detail::maximize_expected_utility(p, b, x, util, &warm);
    warm = inner.w;
    f = inner.value;
    if (!g && !h) return true;
    detail::UtilityDerivatives d;
    detail::utility_derivatives(util, inner.wealth, d);
    if (g) *g = lu.transpose() * d.u;
    if (h) {
      const Matrix kk = b.transpose() * (-p.cwiseProduct(d.d2u)).asDiagonal() * b;
      const Matrix bd = b.transpose() * (d.du.asDiagonal() * lu);  // r x k
      *h = bd.transpose() * kk.ldlt().solve(bd);
    }
    return true;
  };
  prob.ineq.resize(k + z.G.rows(), k);
  prob.ineq << -Matrix::Identity(k, k), z.G;
  prob.ineq_rhs.resize(k + z.G.rows());
  prob.ineq_rhs << Vector::Zero(k), z.g;
  prob.eq = z.E;
  prob.eq_rhs = z.e;

  const BarrierResult br = minimize_barrier(prob, z.interior);
  const Vector zs = br.point;
  const Vector p = lu * zs;
  const auto inner = detail::maximize_expected_utility(p, b, x, util, &warm);
  detail::UtilityDerivatives d;
  detail::utility_derivatives(util, inner.wealth, d);

  RobustValue out;
  out.value = inner.value;
  out.lifted = z.expand(zs);
  out.argmin = amb.measure_of(out.lifted.cwiseMax(0.0));
  out.wealth = Vector::Zero(amb.path_count());
  for (std::size_t i = 0; i < rm.rows.size(); ++i) out.wealth[rm.rows[i]] = inner.wealth[static_cast<Index>(i)];
  // u_P >= E_P U(inner wealth) for every P, so the worst-case LP is a lower bound
  Vector uw = Vector::Zero(amb.path_count());
  for (std::size_t i = 0; i < rm.rows.size(); ++i) uw[rm.rows[i]] = d.u[static_cast<Index>(i)];
  out.lower_bound = worst_case_expectation(amb, uw).value;
  const Vector g = b.transpose() * p.cwiseProduct(d.du);
  const double upper = detail::tangent_upper_bound(inner.value, g, inner.w, b, x);
  out.certified_gap = std::max(0.0, upper - out.lower_bound);
  out.converged = out.certified_gap <= tol::saddle;
  return out;
}

struct MinimaxReport {
  double robust_primal = 0.0;
  double robust_value = 0.0;
  double gap = 0.0;
  bool pass = false;
};

inline MinimaxReport verify_minimax(double u_hat, double u, double tol = 2.0 * tol::saddle) {
  MinimaxReport r;
  r.robust_primal = u_hat;
  r.robust_value = u;
  r.gap = std::abs(u_hat - u);
  r.pass = r.gap <= tol;
  return r;
}

}  // namespace robustss
