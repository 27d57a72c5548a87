#pragma once

// Superhedging prices, calibrated expectations and the finite-scale polar
// relations between claims C_P and densities D_P.

#include <cmath>
#include <string>
#include <vector>

#include "robustss/errors.hpp"
#include "robustss/linear_program.hpp"
#include "robustss/measures.hpp"
#include "robustss/tolerances.hpp"

namespace robustss {

/// Nonnegative payoff per path. An empty scope means the whole grid.
struct ClaimVector {
  Vector values;
  std::vector<bool> scope;

  ClaimVector() = default;
  explicit ClaimVector(Vector v, std::vector<bool> s = {}) : values(std::move(v)), scope(std::move(s)) {
    if (values.size() == 0 || !values.allFinite() || values.minCoeff() < 0.0)
      throw InvariantError("claim.nonnegative", "claim values must be finite and nonnegative");
    if (!scope.empty() && static_cast<Index>(scope.size()) != values.size())
      throw InvariantError("claim.scope", "scope must cover every path");
  }

  bool in_scope(Index p) const { return scope.empty() || scope[static_cast<std::size_t>(p)]; }
};

struct SuperhedgeResult {
  double price = 0.0;
  Vector theta;  // instrument coefficients of the dominating strategy
  Vector dual;   // optimal calibrated weights on the scope (LP multipliers)
};

/// min x such that x + (B theta)(w) >= c(w) on the scope.
inline SuperhedgeResult superhedge_price(const ClaimVector& c, const MartingaleSystem& sys) {
  const Matrix& b = sys.instruments.payoff;
  const Index n = b.rows(), k = b.cols();
  if (c.values.size() != n) throw InvariantError("claim.size", "claim must have one value per path");
  LinearProgram lp(k + 1);
  for (Index j = 0; j <= k; ++j) lp.set_free(j);
  lp.objective[0] = 1.0;
  std::vector<Index> rows;
  Vector row(k + 1);
  for (Index p = 0; p < n; ++p) {
    if (!c.in_scope(p)) continue;
    row << 1.0, b.row(p).transpose();
    lp.add_row(row, RowType::ge, c.values[p]);
    rows.push_back(p);
  }
  if (rows.empty()) throw InvariantError("claim.scope", "empty superhedging scope");
  const LpResult res = solve_lp(lp);
  if (!res.optimal()) throw SolverError("superhedging LP failed: " + std::string(to_string(res.status)));
  SuperhedgeResult out;
  out.price = res.x[0];
  out.theta = res.x.tail(k);
  out.dual = Vector::Zero(n);
  for (std::size_t i = 0; i < rows.size(); ++i) out.dual[rows[i]] = res.row_duals[static_cast<Index>(i)];
  return out;
}

struct CalibratedExpectation {
  double value = 0.0;
  Measure maximizer;
};

/// max E_Q[c] over calibrated Q vanishing off the scope.
inline CalibratedExpectation max_calibrated_expectation(const ClaimVector& c, const MartingaleSystem& sys) {
  const Index n = sys.path_count();
  if (c.values.size() != n) throw InvariantError("claim.size", "claim must have one value per path");
  LinearProgram lp(n, ObjectiveSense::maximize);
  lp.objective = c.values;
  for (Index p = 0; p < n; ++p)
    if (!c.in_scope(p)) lp.set_bounds(p, 0.0, 0.0);
  for (Index i = 0; i < sys.rows.rows(); ++i) lp.add_row(sys.rows.row(i).transpose(), RowType::eq, sys.rhs[i]);
  const LpResult res = solve_lp(lp);
  if (res.status == LpStatus::infeasible)
    throw InvariantError("calibration.empty", "no calibrated measure on the claim scope");
  if (!res.optimal()) throw SolverError("calibrated expectation LP failed: " + std::string(to_string(res.status)));
  return {res.objective, Measure::from_solver(res.x)};
}

struct DualityGap {
  double superhedge = 0.0;
  double expectation = 0.0;
  double gap = 0.0;
  bool pass = false;
};

inline DualityGap duality_gap(const ClaimVector& c, const MartingaleSystem& sys, double tol = tol::duality_gap) {
  DualityGap g;
  g.superhedge = superhedge_price(c, sys).price;
  g.expectation = max_calibrated_expectation(c, sys).value;
  g.gap = std::abs(g.superhedge - g.expectation);
  g.pass = g.gap <= tol;
  return g;
}

struct PolarMembership {
  bool member = false;
  double sup_expectation = 0.0;  // max over Q << P of E_Q[c] = E_P[c d]
  Vector theta;                  // witness: 1 + B theta >= c on supp P
  Measure counterexample;        // maximizing Q when rejected
  Vector density;                // dQ/dP on supp P (zero elsewhere)
};

/// Membership of c in C_P = { c : c <= 1 + (Delta.S)_T + h.g  P-a.s. }.
inline PolarMembership polar_membership_C(const Vector& c, const Measure& p, const MartingaleSystem& sys) {
  const ClaimVector claim(c, p.support_mask());
  const CalibratedExpectation ce = max_calibrated_expectation(claim, sys);
  PolarMembership out;
  out.sup_expectation = ce.value;
  if (ce.value <= 1.0 + tol::polar_membership) {
    out.member = true;
    out.theta = superhedge_price(claim, sys).theta;
    return out;
  }
  out.counterexample = ce.maximizer;
  out.density = Vector::Zero(p.size());
  for (Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) out.density[i] = ce.maximizer[i] / p[i];
  return out;
}

struct L0BoundReport {
  double lhs = 0.0;  // P(c > K)
  double rhs = 0.0;  // P(dQ/dP <= 1/sqrt K) + E_P[(dQ/dP) c] / sqrt K
  bool holds = false;
};

inline L0BoundReport l0_bound_check(const Measure& p, const Measure& q, const Vector& c, double k) {
  if (!(k > 0.0)) throw InvariantError("l0.threshold", "K must be positive");
  const double r = 1.0 / std::sqrt(k);
  L0BoundReport out;
  double expectation = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw InvariantError("l0.equivalence", "Q must be equivalent to P");
    const double d = q[i] / p[i];
    if (c[i] > k) out.lhs += p[i];
    if (d <= r) out.rhs += p[i];
    expectation += p[i] * d * c[i];
  }
  out.rhs += r * expectation;
  out.holds = out.lhs <= out.rhs + 1e-12;
  return out;
}

/// Closedness probe: the wealths c_n = 1 + B (1 - 1/n) theta of a strategy
/// admissible on supp P all lie in C_P, and so does their limit.
inline bool closedness_probe(const Vector& theta, const Measure& p, const MartingaleSystem& sys, int steps = 8) {
  const Matrix& b = sys.instruments.payoff;
  auto member = [&](const Vector& th) {
    Vector c = (b * th).array() + 1.0;
    for (Index i = 0; i < c.size(); ++i) {
      if (p[i] > 0.0 && c[i] < -tol::feasibility) return false;
      c[i] = p[i] > 0.0 ? std::max(c[i], 0.0) : 0.0;
    }
    return polar_membership_C(c, p, sys).member;
  };
  for (int n = 1; n <= steps; ++n)
    if (!member((1.0 - 1.0 / static_cast<double>(n + 1)) * theta)) return false;
  return member(theta);
}

}  // namespace robustss
