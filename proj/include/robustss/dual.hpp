#pragma once

// Dual values v_P(y) and v(y) = inf_P v_P(y) over terminal densities
// y dQ/dP, the conjugacy search over y, and saddle-point verification.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "robustss/convex.hpp"
#include "robustss/errors.hpp"
#include "robustss/linear_program.hpp"
#include "robustss/measures.hpp"
#include "robustss/primal.hpp"
#include "robustss/superhedge.hpp"
#include "robustss/tolerances.hpp"
#include "robustss/utility.hpp"

namespace robustss {

struct DualSolution {
  double y = 0.0;
  double value = 0.0;
  double lower_bound = 0.0;
  double certified_gap = 0.0;
  Measure P_hat;
  Measure Q_hat;
  Vector Y_hat;     // y dQ/dP on supp P, zero elsewhere
  double slope = 0.0;  // v'(y) = -E_Q[I(Y)]
  bool converged = false;
};

/// sum_paths p V(y q / p) with the perspective conventions: p = 0 gives 0,
/// p > 0 with q = 0 gives p V(0) (+inf for unbounded utilities).
inline double dual_objective(const Vector& p, const Vector& q, double y, const UtilityFamily& util) {
  if (!(y > 0.0)) throw InvariantError("y.positive", "dual argument must be positive");
  double s = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) {
      if (!util.bounded()) return std::numeric_limits<double>::infinity();
      s += p[i] * util.sup();
      continue;
    }
    s += p[i] * util.conjugate(y * q[i] / p[i]);
  }
  return s;
}

inline double dual_objective(const Measure& p, const Measure& q, double y, const UtilityFamily& util) {
  return dual_objective(p.weights(), q.weights(), y, util);
}

namespace detail {

/// Calibrated measures vanishing off `support`, as a reduced polytope in the
/// supported coordinates.
inline ReducedPolytope calibrated_polytope(const MartingaleSystem& sys, const std::vector<bool>& support) {
  std::vector<Index> cols;
  for (Index p = 0; p < sys.path_count(); ++p)
    if (support[static_cast<std::size_t>(p)]) cols.push_back(p);
  LiftedPolytope lp;
  lp.E.resize(sys.rows.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) lp.E.col(static_cast<Index>(c)) = sys.rows.col(cols[c]);
  lp.e = sys.rhs;
  lp.G = Matrix(0, lp.E.cols());
  lp.g = Vector(0);
  lp.L = Matrix::Zero(sys.path_count(), lp.E.cols());
  for (std::size_t c = 0; c < cols.size(); ++c) lp.L(cols[c], static_cast<Index>(c)) = 1.0;
  try {
    return reduce_polytope(lp);
  } catch (const InvariantError&) {
    throw InvariantError("calibration.empty", "no calibrated measure on the required support");
  }
}

/// min c.z over a reduced polytope.
inline double minimize_linear(const ReducedPolytope& z, const Vector& c) {
  LinearProgram lp(z.dim());
  lp.objective = c;
  for (Index i = 0; i < z.E.rows(); ++i) lp.add_row(z.E.row(i).transpose(), RowType::eq, z.e[i]);
  for (Index i = 0; i < z.G.rows(); ++i) lp.add_row(z.G.row(i).transpose(), RowType::le, z.g[i]);
  const LpResult res = solve_lp(lp);
  if (!res.optimal()) throw SolverError("dual bound LP failed: " + std::string(to_string(res.status)));
  return res.objective;
}

struct Perspective {
  Vector value, dp, dq, hpp, hpq, hqq;
};

/// h(p, q) = p V(y q / p) per coordinate with gradient and Hessian entries.
inline bool perspective(const Vector& p, const Vector& q, double y, const UtilityFamily& util, Perspective& out,
                        bool derivatives) {
  const Index n = p.size();
  out.value.resize(n);
  if (derivatives) {
    out.dp.resize(n);
    out.dq.resize(n);
    out.hpp.resize(n);
    out.hpq.resize(n);
    out.hqq.resize(n);
  }
  for (Index i = 0; i < n; ++i) {
    if (!(p[i] > 0.0) || !(q[i] > 0.0)) return false;
    const double r = y * q[i] / p[i];
    const double v = util.conjugate(r);
    out.value[i] = p[i] * v;
    if (!derivatives) continue;
    const double dv = -util.inverse_marginal(r);
    const double d2v = util.conjugate_curvature(r);
    out.dp[i] = v - r * dv;
    out.dq[i] = y * dv;
    out.hpp[i] = d2v * r * r / p[i];
    out.hpq[i] = -d2v * y * r / p[i];
    out.hqq[i] = d2v * y * y / p[i];
  }
  return true;
}

inline Vector density(const Measure& p, const Measure& q, double y) {
  Vector out = Vector::Zero(p.size());
  for (Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) out[i] = y * q[i] / p[i];
  return out;
}

inline double dual_slope(const Measure& q, const Vector& yv, const UtilityFamily& util) {
  double s = 0.0;
  for (Index i = 0; i < q.size(); ++i)
    if (q[i] > 0.0) s -= q[i] * util.inverse_marginal(yv[i]);
  return s;
}

}  // namespace detail

/// v_P(y): minimizes sum p V(y q / p) over calibrated Q << P.
inline DualSolution solve_v_P(double y, const Measure& p, const MartingaleSystem& sys, const UtilityFamily& util) {
  if (!(y > 0.0)) throw InvariantError("y.positive", "dual argument must be positive");
  const ReducedPolytope qz = detail::calibrated_polytope(sys, p.support_mask());
  const Index k = qz.dim();
  const Vector pw = qz.L.transpose() * p.weights();  // p on the active q coordinates

  BarrierProblem prob;
  prob.dim = k;
  prob.objective.eval = [&](const Vector& q, double& f, Vector* g, Matrix* h) {
    detail::Perspective ps;
    if (!detail::perspective(pw, q, y, util, ps, g || h)) return false;
    f = ps.value.sum();
    if (g) *g = ps.dq;
    if (h) *h = ps.hqq.asDiagonal();
    return true;
  };
  prob.ineq = -Matrix::Identity(k, k);
  prob.ineq_rhs = Vector::Zero(k);
  prob.eq = qz.E;
  prob.eq_rhs = qz.e;
  const BarrierResult br = minimize_barrier(prob, qz.interior);

  DualSolution out;
  out.y = y;
  out.P_hat = p;
  out.Q_hat = Measure::from_solver(qz.L * br.point);
  // paths of supp P dropped by face reduction carry q = 0
  out.value = dual_objective(p, out.Q_hat, y, util);
  detail::Perspective ps;
  detail::perspective(pw, br.point, y, util, ps, true);
  out.lower_bound = br.objective + detail::minimize_linear(qz, ps.dq) - ps.dq.dot(br.point);
  for (Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0 && (qz.L.row(i).array() == 0.0).all()) out.lower_bound += p[i] * util.sup();
  out.certified_gap = std::max(0.0, out.value - out.lower_bound);
  out.Y_hat = detail::density(out.P_hat, out.Q_hat, y);
  out.slope = detail::dual_slope(out.Q_hat, out.Y_hat, util);
  out.converged = out.certified_gap <= tol::saddle;
  return out;
}

/// v(y): joint minimization over P in the ambiguity set and calibrated
/// Q << P of the jointly convex perspective objective. Q lives on the union
/// support of the ambiguity set.
inline DualSolution solve_v(double y, const AmbiguityModel& amb, const MartingaleSystem& sys,
                            const UtilityFamily& util) {
  if (!(y > 0.0)) throw InvariantError("y.positive", "dual argument must be positive");
  // Jensen: E_P V(y dQ/dP) >= V(y Q(supp P)) >= V(y), with equality at P = Q
  // for a calibrated member
  if (const auto member = calibrated_member(amb, sys)) {
    DualSolution out;
    out.y = y;
    out.value = out.lower_bound = util.conjugate(y);
    out.P_hat = out.Q_hat = *member;
    out.Y_hat = detail::density(out.P_hat, out.Q_hat, y);
    out.slope = detail::dual_slope(out.Q_hat, out.Y_hat, util);
    out.converged = true;
    return out;
  }
  const ReducedPolytope& z = amb.reduced();
  const ReducedPolytope qz = detail::calibrated_polytope(sys, z.union_support);
  const Index kz = z.dim(), kq = qz.dim();
  // paths charged by some q coordinate; the others must carry p = 0 for v < inf
  std::vector<Index> rows;
  for (Index i = 0; i < sys.path_count(); ++i)
    if ((qz.L.row(i).array() != 0.0).any()) rows.push_back(i);
  const Index nr = static_cast<Index>(rows.size());
  Matrix lz(nr, kz), lq(nr, kq);
  for (Index i = 0; i < nr; ++i) {
    lz.row(i) = z.L.row(rows[static_cast<std::size_t>(i)]);
    lq.row(i) = qz.L.row(rows[static_cast<std::size_t>(i)]);
  }
  // mass of P outside the rows: contributes p V(0)
  Vector outside = Vector::Zero(kz);
  for (Index i = 0; i < sys.path_count(); ++i)
    if (std::find(rows.begin(), rows.end(), i) == rows.end()) outside += z.L.row(i).transpose();
  const bool need_zero_outside = !util.bounded() && (outside.array() > 0.0).any();

  const Index dim = kz + kq;
  BarrierProblem prob;
  prob.dim = dim;
  prob.objective.eval = [&](const Vector& v, double& f, Vector* g, Matrix* h) {
    const Vector p = lz * v.head(kz), q = lq * v.tail(kq);
    detail::Perspective ps;
    if (!detail::perspective(p, q, y, util, ps, g || h)) return false;
    f = ps.value.sum() + (util.bounded() ? util.sup() * outside.dot(v.head(kz)) : 0.0);
    if (g) {
      g->resize(dim);
      g->head(kz) = lz.transpose() * ps.dp;
      if (util.bounded()) g->head(kz) += util.sup() * outside;
      g->tail(kq) = lq.transpose() * ps.dq;
    }
    if (h) {
      h->resize(dim, dim);
      h->topLeftCorner(kz, kz) = lz.transpose() * ps.hpp.asDiagonal() * lz;
      h->topRightCorner(kz, kq) = lz.transpose() * ps.hpq.asDiagonal() * lq;
      h->bottomLeftCorner(kq, kz) = h->topRightCorner(kz, kq).transpose();
      h->bottomRightCorner(kq, kq) = lq.transpose() * ps.hqq.asDiagonal() * lq;
    }
    return true;
  };
  const Index mg = z.G.rows();
  prob.ineq = Matrix::Zero(dim + mg, dim);
  prob.ineq.topLeftCorner(dim, dim) = -Matrix::Identity(dim, dim);
  prob.ineq.bottomLeftCorner(mg, kz) = z.G;
  prob.ineq_rhs.resize(dim + mg);
  prob.ineq_rhs << Vector::Zero(dim), z.g;
  prob.eq = Matrix::Zero(z.E.rows() + qz.E.rows(), dim);
  prob.eq.topLeftCorner(z.E.rows(), kz) = z.E;
  prob.eq.bottomRightCorner(qz.E.rows(), kq) = qz.E;
  prob.eq_rhs.resize(z.E.rows() + qz.E.rows());
  prob.eq_rhs << z.e, qz.e;
  if (need_zero_outside) {
    // p must vanish where no calibrated q can live: fix those z to zero by
    // adding the rows to the equalities would break strict feasibility, so
    // the instance is rejected instead
    throw InvariantError("assumption.equivalent_measure",
                         "ambiguity charges paths that no calibrated measure can charge");
  }
  Vector start(dim);
  start << z.interior, qz.interior;
  const BarrierResult br = minimize_barrier(prob, start);

  DualSolution out;
  out.y = y;
  const Vector zf = z.expand(br.point.head(kz));
  out.P_hat = amb.measure_of(zf.cwiseMax(0.0));
  out.Q_hat = Measure::from_solver(qz.L * br.point.tail(kq));
  out.value = dual_objective(out.P_hat, out.Q_hat, y, util);
  // convexity bound: f* + min over the product polytope of grad.(v - v*)
  Vector g;
  double f;
  prob.objective.eval(br.point, f, &g, nullptr);
  out.lower_bound = f + detail::minimize_linear(z, g.head(kz)) + detail::minimize_linear(qz, g.tail(kq)) -
                    g.dot(br.point);
  out.certified_gap = std::max(0.0, out.value - out.lower_bound);
  out.Y_hat = detail::density(out.P_hat, out.Q_hat, y);
  out.slope = detail::dual_slope(out.Q_hat, out.Y_hat, util);
  out.converged = out.certified_gap <= tol::saddle;
  return out;
}

struct ConjugateResult {
  double y_hat = 0.0;
  double v_at_y = 0.0;
  double value = 0.0;  // v(y_hat) + x0 y_hat
  DualSolution dual;
  int evaluations = 0;
  double bracket_lo = 0.0, bracket_hi = 0.0;
};

/// min over y > 0 of v(y) + x0 y by bracketing the root of v'(y) + x0, with
/// v'(y) = -E_Q[I(Y)] from the envelope theorem. On a flat stretch the
/// leftmost minimizer is returned.
/// The initial bracket spans three decades either side of `center`.
template <class DualSolver>
ConjugateResult conjugate_search(double x0, const DualSolver& solve, double center = 1.0) {
  if (!(x0 > 0.0)) throw InvariantError("x.positive", "initial capital must be positive");
  ConjugateResult out;
  auto eval = [&](double y, DualSolution& sol) {
    ++out.evaluations;
    sol = solve(y);
    return sol.slope + x0;
  };
  double lo = center * 1e-3, hi = center * 1e3;
  DualSolution slo, shi;
  double glo = eval(lo, slo), ghi = eval(hi, shi);
  for (int k = 0; k < 40 && glo >= 0.0; ++k) glo = eval(lo *= 1e-3, slo);
  for (int k = 0; k < 40 && ghi < 0.0; ++k) ghi = eval(hi *= 1e3, shi);
  if (glo >= 0.0 || ghi < 0.0)
    throw SolverError("conjugate bracket expansion failed on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  // Illinois iterations in log y with periodic bisection. Invariant:
  // g(a) < 0 <= g(b), so the leftmost root stays inside [a, b].
  int side = 0;
  double a = std::log(lo), b = std::log(hi), ga = glo, gb = ghi;
  double true_ga = glo, true_gb = ghi;
  for (int it = 0; it < 200; ++it) {
    if (b - a <= 1e-12) break;
    double m = (a * gb - b * ga) / (gb - ga);
    if (!(m > a && m < b) || it % 4 == 3) m = 0.5 * (a + b);
    DualSolution sm;
    const double gm = eval(std::exp(m), sm);
    if (gm >= 0.0) {
      b = m;
      gb = true_gb = gm;
      shi = sm;
      if (side == 1) ga *= 0.5;
      side = 1;
    } else {
      a = m;
      ga = true_ga = gm;
      slo = sm;
      if (side == -1) gb *= 0.5;
      side = -1;
    }
  }
  out.dual = -true_ga < true_gb ? slo : shi;
  out.y_hat = out.dual.y;
  out.v_at_y = out.dual.value;
  out.value = out.v_at_y + x0 * out.y_hat;
  out.bracket_lo = std::exp(a);
  out.bracket_hi = std::exp(b);
  return out;
}

inline ConjugateResult conjugate_search(double x0, const AmbiguityModel& amb, const MartingaleSystem& sys,
                                        const UtilityFamily& util) {
  // the riskless market's multiplier U'(x0) centers the bracket
  return conjugate_search(x0, [&](double y) { return solve_v(y, amb, sys, util); }, util.marginal(x0));
}

struct RecoveredOptimizers {
  Vector X_hat;  // I(Y_hat) on supp P_hat, superhedge wealth elsewhere
  Vector Y_hat;
  double extension_price = 0.0;  // superhedging price of I(Y_hat) restricted to supp P_hat
  Vector extension_theta;
};

/// Y = y dQ/dP and X = I(Y) on supp P; off the support X is extended by the
/// cheapest superhedge of I(Y) 1_{supp P}, which is nonnegative everywhere.
inline RecoveredOptimizers recover_optimizers(const Measure& p_hat, const Measure& q_hat, double y_hat, double x0,
                                              const UtilityFamily& util, const MartingaleSystem& sys) {
  (void)x0;
  RecoveredOptimizers out;
  out.Y_hat = detail::density(p_hat, q_hat, y_hat);
  Vector claim = Vector::Zero(p_hat.size());
  for (Index i = 0; i < p_hat.size(); ++i) {
    if (p_hat[i] <= 0.0) continue;
    if (out.Y_hat[i] <= 0.0 && !util.bounded())
      throw InvariantError("dual.density", "Y = 0 on the support with an unbounded inverse marginal");
    claim[i] = util.inverse_marginal(out.Y_hat[i]);
    if (!std::isfinite(claim[i]))
      throw InvariantError("dual.density", "I(Y) is infinite on path " + std::to_string(i));
  }
  const SuperhedgeResult sh = superhedge_price(ClaimVector(claim), sys);
  out.extension_price = sh.price;
  out.extension_theta = sh.theta;
  const Vector wealth = wealth_vector(sys.instruments, sh.price, sh.theta);
  out.X_hat = claim;
  for (Index i = 0; i < p_hat.size(); ++i)
    if (p_hat[i] <= 0.0) out.X_hat[i] = std::max(0.0, wealth[i]);
  return out;
}

struct SaddleReport {
  double x0 = 0.0;
  double u_hat = 0.0;   // sup-inf value
  double u = 0.0;       // inf-sup value
  double y_hat = 0.0;
  double v_y = 0.0;     // v(y_hat)
  double v_P_y = 0.0;   // v_{P_hat}(y_hat)
  Vector X_hat;         // primal optimal wealth
  Vector Y_hat;
  Measure P_hat, Q_hat;
  double minimax_gap = 0.0;
  double conjugacy_gap = 0.0;
};

struct ResidualReport {
  double r1 = 0.0, r2 = 0.0, r3 = 0.0, r4 = 0.0, r5 = 0.0;
  double tol = tol::theorem2_residual;
  bool pass = false;

  double max() const { return std::max({r1, r2, r3, r4, r5}); }
};

/// Recomputes Y from (y_hat, P_hat, Q_hat) and checks the saddle identities.
inline ResidualReport theorem2_verify(const SaddleReport& s, const UtilityFamily& util,
                                      double tol = tol::theorem2_residual) {
  ResidualReport r;
  r.tol = tol;
  const Vector yv = detail::density(s.P_hat, s.Q_hat, s.y_hat);
  double eu = 0.0, exy = 0.0;
  for (Index i = 0; i < s.P_hat.size(); ++i) {
    const double p = s.P_hat[i];
    if (p <= 0.0) continue;
    const double x = s.X_hat[i];
    eu += p * (x > 0.0 ? util.value(std::max(x, tol::wealth_floor)) : -std::numeric_limits<double>::infinity());
    exy += p * x * yv[i];
    const double ix = yv[i] > 0.0 || util.bounded() ? util.inverse_marginal(yv[i])
                                                     : std::numeric_limits<double>::infinity();
    r.r4 = std::max(r.r4, std::abs(x - ix));
  }
  r.r1 = std::abs(s.u - eu);
  r.r2 = std::abs(s.v_y - s.u + s.y_hat * s.x0);
  r.r3 = std::abs(s.v_y - s.v_P_y);
  r.r5 = std::abs(exy - s.x0 * s.y_hat);
  r.pass = std::isfinite(r.max()) && r.max() <= tol;
  return r;
}

}  // namespace robustss
