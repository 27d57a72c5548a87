#pragma once

// Smooth convex minimization over polyhedra (log-barrier Newton), Kelley
// cutting planes for nonsmooth oracles, and polyhedron face reduction.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "robustss/errors.hpp"
#include "robustss/linear_program.hpp"
#include "robustss/tolerances.hpp"

namespace robustss {

/// { v : eq v = eq_rhs, ineq v <= ineq_rhs }
struct Polyhedron {
  Matrix eq;
  Vector eq_rhs;
  Matrix ineq;
  Vector ineq_rhs;

  Polyhedron() = default;
  explicit Polyhedron(Index dim) : eq(0, dim), eq_rhs(0), ineq(0, dim), ineq_rhs(0) {}

  Index dim() const { return std::max(eq.cols(), ineq.cols()); }

  void add_eq(const Vector& row, double rhs) {
    eq.conservativeResize(eq.rows() + 1, dim());
    eq.row(eq.rows() - 1) = row.transpose();
    eq_rhs.conservativeResize(eq_rhs.size() + 1);
    eq_rhs[eq_rhs.size() - 1] = rhs;
  }
  void add_ineq(const Vector& row, double rhs) {
    ineq.conservativeResize(ineq.rows() + 1, dim());
    ineq.row(ineq.rows() - 1) = row.transpose();
    ineq_rhs.conservativeResize(ineq_rhs.size() + 1);
    ineq_rhs[ineq_rhs.size() - 1] = rhs;
  }

  /// LP with free variables carrying these rows; callers set the objective.
  LinearProgram to_lp(ObjectiveSense sense) const {
    LinearProgram lp(dim(), sense);
    for (Index j = 0; j < dim(); ++j) lp.set_free(j);
    for (Index i = 0; i < eq.rows(); ++i) lp.add_row(eq.row(i).transpose(), RowType::eq, eq_rhs[i]);
    for (Index i = 0; i < ineq.rows(); ++i) lp.add_row(ineq.row(i).transpose(), RowType::le, ineq_rhs[i]);
    return lp;
  }
};

struct RelativeInterior {
  bool feasible = false;
  Vector point;
  std::vector<bool> implicit_equality;  // per inequality row
  double min_slack = 0.0;               // over the loose rows
};

/// Finds the inequality rows that are tight on the whole polyhedron and a
/// point strictly inside all the others (largest minimum slack, capped at 1).
inline RelativeInterior relative_interior(const Polyhedron& poly) {
  const Index n = poly.dim();
  const Index m = poly.ineq.rows();
  RelativeInterior out;
  out.implicit_equality.assign(m, true);

  // Homogenized: A v + t <= lambda b, E v = lambda e, lambda >= 1, 0 <= t <= 1.
  // Every row that is slack somewhere reaches t = 1 by scaling one common
  // point, so a single LP separates loose rows from implicit equalities.
  std::vector<bool> loose(m, false);
  {
    LinearProgram lp(n + 1 + m, ObjectiveSense::maximize);
    for (Index j = 0; j < n; ++j) lp.set_free(j);
    lp.set_bounds(n, 1.0, kInf);
    for (Index i = 0; i < m; ++i) {
      lp.set_bounds(n + 1 + i, 0.0, 1.0);
      lp.objective[n + 1 + i] = 1.0;
    }
    Vector row = Vector::Zero(n + 1 + m);
    for (Index i = 0; i < poly.eq.rows(); ++i) {
      row.setZero();
      row.head(n) = poly.eq.row(i).transpose();
      row[n] = -poly.eq_rhs[i];
      lp.add_row(row, RowType::eq, 0.0);
    }
    for (Index i = 0; i < m; ++i) {
      row.setZero();
      row.head(n) = poly.ineq.row(i).transpose();
      row[n] = -poly.ineq_rhs[i];
      row[n + 1 + i] = 1.0;
      lp.add_row(row, RowType::le, 0.0);
    }
    const LpResult res = solve_lp(lp);
    if (res.status == LpStatus::infeasible) return out;
    if (!res.optimal()) throw SolverError("relative interior LP failed: " + std::string(to_string(res.status)));
    for (Index i = 0; i < m; ++i) loose[i] = res.x[n + 1 + i] > 0.5;
    out.point = res.x.head(n) / res.x[n];
    out.min_slack = 1.0 / res.x[n];
  }
  out.feasible = true;

  // center: maximize the common slack s of the loose rows
  LinearProgram lp(n + 1, ObjectiveSense::maximize);
  for (Index j = 0; j < n; ++j) lp.set_free(j);
  lp.set_bounds(n, 0.0, 1.0);
  lp.objective[n] = 1.0;
  Vector row = Vector::Zero(n + 1);
  for (Index i = 0; i < poly.eq.rows(); ++i) {
    row.setZero();
    row.head(n) = poly.eq.row(i).transpose();
    lp.add_row(row, RowType::eq, poly.eq_rhs[i]);
  }
  for (Index i = 0; i < m; ++i) {
    row.setZero();
    row.head(n) = poly.ineq.row(i).transpose();
    // implicit equalities stay as inequalities: same set, no round-off infeasibility
    if (loose[i]) row[n] = 1.0;
    lp.add_row(row, RowType::le, poly.ineq_rhs[i]);
  }
  for (Index i = 0; i < m; ++i) out.implicit_equality[i] = !loose[i];
  const LpResult res = solve_lp(lp);
  // a stalled centering LP keeps the (valid, less central) homogenized point
  if (res.optimal() && res.x[n] > out.min_slack) {
    out.point = res.x.head(n);
    out.min_slack = res.x[n];
  }
  return out;
}

/// Orthonormal basis of { d : a d = 0 } (columns).
inline Matrix null_space(const Matrix& a, Index dim) {
  if (a.rows() == 0) return Matrix::Identity(dim, dim);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] > 1e-10 * std::max(1.0, smax)) ++rank;
  return svd.matrixV().rightCols(dim - rank);
}

/// Orthonormal basis of the column space of `a` (rank-revealing).
inline Matrix range_basis(const Matrix& a) {
  if (a.cols() == 0 || a.rows() == 0) return Matrix(a.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] > 1e-10 * std::max(1.0, smax)) ++rank;
  return svd.matrixU().leftCols(rank);
}

/// A convex function with an open domain. `eval` returns false outside it;
/// the gradient/Hessian pointers may be null.
struct SmoothFunction {
  std::function<bool(const Vector&, double&, Vector*, Matrix*)> eval;
  explicit operator bool() const { return static_cast<bool>(eval); }
};

struct BarrierProblem {
  Index dim = 0;
  SmoothFunction objective;
  SmoothFunction barrier;   // extra barrier terms -sum log(-g_k(v)) for convex g_k
  Index barrier_terms = 0;  // number of constraints carried by `barrier`
  Matrix ineq;              // ineq v < ineq_rhs (strict)
  Vector ineq_rhs;
  Matrix eq;                // eq v = eq_rhs, satisfied by the start point
  Vector eq_rhs;
};

struct BarrierOptions {
  double t_initial = 1.0;
  double growth = 12.0;
  double gap_target = 1e-10;  // m / t
  double newton_tol = 1e-11;  // lambda^2 / 2 per centering
  int max_newton_per_stage = 80;
  int max_stages = 60;
};

struct BarrierResult {
  Vector point;
  double objective = 0.0;
  double gap_bound = 0.0;  // m / t at the last completed centering
  int newton_steps = 0;
  bool converged = false;
};

/// Minimizes a smooth convex objective over an open polyhedral/convex set by
/// the log-barrier method, starting from a strictly feasible point.
inline BarrierResult minimize_barrier(const BarrierProblem& prob, const Vector& start,
                                      const BarrierOptions& opt = {}) {
  const Index n = prob.dim;
  const Index m_lin = prob.ineq.rows();
  const double m_total = static_cast<double>(m_lin + prob.barrier_terms);
  const Matrix basis = null_space(prob.eq.rows() > 0 ? prob.eq : Matrix(0, n), n);
  const Index k = basis.cols();

  auto slack_ok = [&](const Vector& v) {
    if (m_lin == 0) return true;
    return ((prob.ineq_rhs - prob.ineq * v).array() > 0.0).all();
  };

  // phi_t(v) = t f(v) + extra barrier - sum log(slack)
  auto phi = [&](const Vector& v, double t, double& val, Vector* g, Matrix* h) {
    if (!slack_ok(v)) return false;
    double f = 0.0, b = 0.0;
    Vector gf, gb;
    Matrix hf, hb;
    if (!prob.objective.eval(v, f, g ? &gf : nullptr, h ? &hf : nullptr)) return false;
    if (prob.barrier && !prob.barrier.eval(v, b, g ? &gb : nullptr, h ? &hb : nullptr)) return false;
    if (!std::isfinite(f) || !std::isfinite(b)) return false;
    val = t * f + b;
    Vector slack;
    if (m_lin > 0) {
      slack = prob.ineq_rhs - prob.ineq * v;
      val -= slack.array().log().sum();
    }
    if (g) {
      *g = t * gf;
      if (prob.barrier) *g += gb;
      if (m_lin > 0) *g += prob.ineq.transpose() * slack.cwiseInverse();
    }
    if (h) {
      *h = t * hf;
      if (prob.barrier) *h += hb;
      if (m_lin > 0) {
        const Vector w = slack.cwiseInverse();
        *h += prob.ineq.transpose() * w.cwiseProduct(w).asDiagonal() * prob.ineq;
      }
    }
    return true;
  };

  BarrierResult out;
  Vector v = start;
  {
    double val;
    if (!phi(v, 1.0, val, nullptr, nullptr)) throw SolverError("barrier start point is not strictly feasible");
  }
  if (k == 0 || (m_total == 0 && k == 0)) {
    double f;
    prob.objective.eval(v, f, nullptr, nullptr);
    out.point = v;
    out.objective = f;
    out.converged = true;
    return out;
  }

  double t = opt.t_initial;
  bool completed_any = false;
  for (int stage = 0; stage < opt.max_stages; ++stage) {
    bool centered = false;
    for (int it = 0; it < opt.max_newton_per_stage; ++it) {
      double val;
      Vector g;
      Matrix h;
      if (!phi(v, t, val, &g, &h)) throw SolverError("barrier iterate left the domain");
      ++out.newton_steps;
      const Vector gr = basis.transpose() * g;
      Matrix hr = basis.transpose() * h * basis;
      Vector dr;
      double reg = 0.0;
      for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::LDLT<Matrix> ldlt(hr);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
          dr = -ldlt.solve(gr);
          if (dr.allFinite() && gr.dot(dr) < 0.0) break;
        }
        reg = reg == 0.0 ? 1e-12 * std::max(1.0, hr.diagonal().cwiseAbs().maxCoeff()) : reg * 100.0;
        hr.diagonal().array() += reg;
        dr.resize(0);
      }
      if (dr.size() == 0) break;
      const double lambda2 = -gr.dot(dr);
      if (lambda2 / 2.0 <= opt.newton_tol) {
        centered = true;
        break;
      }
      const Vector d = basis * dr;
      double alpha = 1.0;
      if (m_lin > 0) {
        const Vector slack = prob.ineq_rhs - prob.ineq * v;
        const Vector rate = prob.ineq * d;
        for (Index i = 0; i < m_lin; ++i)
          if (rate[i] > 0.0) alpha = std::min(alpha, 0.99 * slack[i] / rate[i]);
      }
      const double noise = 1e-13 * (1.0 + std::abs(val));
      bool moved = false;
      while (alpha > 1e-14) {
        const Vector trial = v + alpha * d;
        double tv;
        if (phi(trial, t, tv, nullptr, nullptr) && tv <= val - 0.25 * alpha * lambda2 + noise) {
          v = trial;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) {
        // round-off floor reached: treat as centered if already close
        centered = lambda2 < 1e-6;
        break;
      }
    }
    if (centered) {
      completed_any = true;
      out.gap_bound = m_total / t;
    } else if (!completed_any) {
      throw SolverError("barrier centering failed at the first stage");
    } else {
      break;
    }
    if (m_total / t <= opt.gap_target) {
      out.converged = true;
      break;
    }
    t *= opt.growth;
  }
  if (!out.converged && out.gap_bound <= 1e-8) out.converged = true;
  double f;
  prob.objective.eval(v, f, nullptr, nullptr);
  out.point = v;
  out.objective = f;
  return out;
}

struct OracleValue {
  double value = 0.0;
  Vector gradient;  // supergradient (maximize) or subgradient (minimize)
};

using Oracle = std::function<OracleValue(const Vector&)>;

struct CuttingPlaneResult {
  Vector point;
  double value = 0.0;
  double bound = 0.0;  // certified bound on the optimum (upper for max, lower for min)
  double gap = 0.0;    // |bound - value| >= 0
  int iterations = 0;
  bool converged = false;
};

/// Kelley's cutting-plane method: maximizes a concave f over the bounded
/// polyhedron `domain`. The LP model value is an upper bound on the optimum.
inline CuttingPlaneResult maximize_concave(const Oracle& f, const Polyhedron& domain, double tol = tol::saddle,
                                           int max_iterations = 500, std::optional<Vector> start = std::nullopt) {
  const Index n = domain.dim();
  Vector x;
  if (start) {
    x = *start;
  } else {
    const RelativeInterior ri = relative_interior(domain);
    if (!ri.feasible) throw InvariantError("polytope", "empty domain");
    x = ri.point;
  }
  std::vector<Vector> points, grads;
  std::vector<double> values;
  CuttingPlaneResult out;
  out.value = -kInf;
  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    const OracleValue o = f(x);
    points.push_back(x);
    grads.push_back(o.gradient);
    values.push_back(o.value);
    if (o.value > out.value) {
      out.value = o.value;
      out.point = x;
    }
    // master LP over (x, t): max t s.t. t - g_k.x <= f_k - g_k.x_k
    LinearProgram lp(n + 1, ObjectiveSense::maximize);
    for (Index j = 0; j <= n; ++j) lp.set_free(j);
    lp.objective[n] = 1.0;
    Vector row = Vector::Zero(n + 1);
    for (Index i = 0; i < domain.eq.rows(); ++i) {
      row.setZero();
      row.head(n) = domain.eq.row(i).transpose();
      lp.add_row(row, RowType::eq, domain.eq_rhs[i]);
    }
    for (Index i = 0; i < domain.ineq.rows(); ++i) {
      row.setZero();
      row.head(n) = domain.ineq.row(i).transpose();
      lp.add_row(row, RowType::le, domain.ineq_rhs[i]);
    }
    for (std::size_t c = 0; c < points.size(); ++c) {
      row.head(n) = -grads[c];
      row[n] = 1.0;
      lp.add_row(row, RowType::le, values[c] - grads[c].dot(points[c]));
    }
    const LpResult res = solve_lp(lp);
    if (!res.optimal()) throw SolverError("cutting-plane master LP failed: " + std::string(to_string(res.status)));
    out.bound = res.objective;
    out.gap = std::max(0.0, out.bound - out.value);
    if (out.gap <= tol) {
      out.converged = true;
      return out;
    }
    x = res.x.head(n);
  }
  return out;
}

/// Mirror of maximize_concave; `bound` is a certified lower bound.
inline CuttingPlaneResult minimize_convex(const Oracle& f, const Polyhedron& domain, double tol = tol::saddle,
                                          int max_iterations = 500, std::optional<Vector> start = std::nullopt) {
  Oracle neg = [&](const Vector& x) {
    OracleValue o = f(x);
    o.value = -o.value;
    o.gradient = -o.gradient;
    return o;
  };
  CuttingPlaneResult r = maximize_concave(neg, domain, tol, max_iterations, std::move(start));
  r.value = -r.value;
  r.bound = -r.bound;
  return r;
}

}  // namespace robustss
