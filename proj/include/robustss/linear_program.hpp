#pragma once

// Dense two-phase primal simplex with deterministic pivoting and a final
// basis refactorization that yields primal/dual certificates.
//
// Pivot rule: Dantzig (most negative reduced cost, lowest index on ties),
// switching to Bland's rule after a run of degenerate pivots.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "robustss/tolerances.hpp"

namespace robustss {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class RowType { le, eq, ge };
enum class ObjectiveSense { minimize, maximize };
enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "?";
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinearProgram {
  ObjectiveSense sense = ObjectiveSense::minimize;
  Vector objective;
  Vector lower;
  Vector upper;
  Matrix rows;
  Vector rhs;
  std::vector<RowType> types;

  LinearProgram() = default;
  explicit LinearProgram(Index n, ObjectiveSense s = ObjectiveSense::minimize)
      : sense(s), objective(Vector::Zero(n)), lower(Vector::Zero(n)), upper(Vector::Constant(n, kInf)),
        rows(0, n), rhs(0) {}

  Index variables() const { return objective.size(); }
  Index constraints() const { return rows.rows(); }

  void set_free(Index j) {
    lower[j] = -kInf;
    upper[j] = kInf;
  }
  void set_bounds(Index j, double lo, double hi) {
    lower[j] = lo;
    upper[j] = hi;
  }

  Index add_row(const Vector& coeffs, RowType type, double b) {
    if (coeffs.size() != variables()) throw std::invalid_argument("dimension mismatch: row length");
    rows.conservativeResize(rows.rows() + 1, variables());
    rows.row(rows.rows() - 1) = coeffs.transpose();
    rhs.conservativeResize(rhs.size() + 1);
    rhs[rhs.size() - 1] = b;
    types.push_back(type);
    return rows.rows() - 1;
  }

  void validate() const {
    const Index n = variables();
    if (lower.size() != n || upper.size() != n || rows.cols() != n || rhs.size() != rows.rows() ||
        static_cast<Index>(types.size()) != rows.rows())
      throw std::invalid_argument("dimension mismatch in linear program");
    if (!objective.allFinite() || !rows.allFinite() || !rhs.allFinite())
      throw std::invalid_argument("non-finite coefficient in linear program");
    for (Index j = 0; j < n; ++j)
      if (lower[j] > upper[j] || lower[j] == kInf || upper[j] == -kInf)
        throw std::invalid_argument("inconsistent variable bounds");
  }

  /// Plain-text tableau dump for debugging.
  void dump(std::ostream& os) const {
    os << (sense == ObjectiveSense::minimize ? "min" : "max");
    for (Index j = 0; j < variables(); ++j) os << ' ' << objective[j];
    os << '\n';
    for (Index i = 0; i < constraints(); ++i) {
      for (Index j = 0; j < variables(); ++j) os << rows(i, j) << ' ';
      os << (types[i] == RowType::le ? "<=" : types[i] == RowType::eq ? "=" : ">=") << ' ' << rhs[i] << '\n';
    }
    for (Index j = 0; j < variables(); ++j) os << "x" << j << " in [" << lower[j] << ", " << upper[j] << "]\n";
  }
};

struct LpResult {
  LpStatus status = LpStatus::iteration_limit;
  Vector x;               // original variables
  double objective = 0.0; // in the program's own sense
  Vector row_duals;       // d objective / d rhs for each original row
  Vector ray;             // unbounded: improving direction in original variables
  Vector farkas;          // infeasible: multipliers on original rows
  bool certificate_verified = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;

  bool optimal() const { return status == LpStatus::optimal; }
};

namespace detail {

// min c.x  s.t.  A x = b, x >= 0, b >= 0
class StandardSimplex {
 public:
  StandardSimplex(Matrix a, Vector b, Vector c) : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    m_ = a_.rows();
    n_ = a_.cols();
  }

  LpStatus run(int max_iterations) {
    const Index total = n_ + m_;
    tab_ = Matrix::Zero(m_ + 1, total + 1);
    tab_.block(0, 0, m_, n_) = a_;
    tab_.block(0, n_, m_, m_).setIdentity();
    tab_.block(0, total, m_, 1) = b_;
    basis_.resize(m_);
    for (Index r = 0; r < m_; ++r) basis_[r] = n_ + r;
    redundant_.assign(m_, false);
    blocked_.assign(total, false);

    // phase 1: minimize the sum of artificials
    Vector cost1 = Vector::Zero(total);
    cost1.tail(m_).setOnes();
    set_cost(cost1);
    LpStatus s = iterate(cost1, max_iterations, true);
    if (s == LpStatus::iteration_limit) return s;
    const double infeas = -tab_(m_, total);
    phase1_cost_ = cost1;
    if (infeas > tol::feasibility * std::max(1.0, b_.lpNorm<Eigen::Infinity>())) {
      infeasible_ = true;
      return LpStatus::infeasible;
    }
    // drive artificials out of the basis
    for (Index r = 0; r < m_; ++r) {
      if (basis_[r] < n_) continue;
      Index best = -1;
      double mag = 1e-7;
      for (Index j = 0; j < n_; ++j)
        if (std::abs(tab_(r, j)) > mag) {
          mag = std::abs(tab_(r, j));
          best = j;
        }
      if (best >= 0)
        pivot(r, best);
      else
        redundant_[r] = true;
    }
    for (Index j = n_; j < total; ++j) blocked_[j] = true;

    Vector cost2 = Vector::Zero(total);
    cost2.head(n_) = c_;
    cost2_ = cost2;
    for (int round = 0; round < 3; ++round) {
      set_cost(cost2);
      s = iterate(cost2, max_iterations, false);
      if (s != LpStatus::optimal) return s;
      // refresh the tableau from a fresh factorization and re-check optimality
      if (!refresh()) break;
      set_cost(cost2);
      bool clean = true;
      for (Index j = 0; j < n_; ++j)
        if (!blocked_[j] && tab_(m_, j) < -kReducedTol) clean = false;
      if (clean) break;
    }
    return LpStatus::optimal;
  }

  // Primal solution, duals and residuals from a refactorized basis.
  void certify(Vector& x, Vector& y) const {
    std::vector<Index> rows_kept, cols;
    for (Index r = 0; r < m_; ++r)
      if (!redundant_[r]) {
        rows_kept.push_back(r);
        cols.push_back(basis_[r]);
      }
    const Index k = static_cast<Index>(rows_kept.size());
    Matrix bmat(k, k);
    Vector bvec(k), cb(k);
    for (Index i = 0; i < k; ++i) {
      bvec[i] = b_[rows_kept[i]];
      for (Index jj = 0; jj < k; ++jj) bmat(i, jj) = cols[jj] < n_ ? a_(rows_kept[i], cols[jj]) : (cols[jj] - n_ == rows_kept[i] ? 1.0 : 0.0);
      cb[i] = cols[i] < n_ ? c_[cols[i]] : 0.0;
    }
    Eigen::PartialPivLU<Matrix> lu(bmat);
    const Vector xb = lu.solve(bvec);
    const Vector yk = lu.transpose().solve(cb);
    x = Vector::Zero(n_);
    for (Index i = 0; i < k; ++i)
      if (cols[i] < n_) x[cols[i]] = xb[i];
    y = Vector::Zero(m_);
    for (Index i = 0; i < k; ++i) y[rows_kept[i]] = yk[i];
  }

  // y with A^T y <= 0 and b.y > 0 (phase-1 duals).
  Vector farkas() const {
    Vector y = Vector::Zero(m_);
    for (Index r = 0; r < m_; ++r) y[r] = -tab_(m_, n_ + r) + 1.0;  // reduced cost of artificial = 1 - y_r
    return y;
  }

  // Improving ray for the standard-form variables.
  Vector ray() const { return ray_; }

  const Matrix& a() const { return a_; }
  const Vector& b() const { return b_; }
  const Vector& c() const { return c_; }
  int iterations() const { return iterations_; }

 private:
  static constexpr double kReducedTol = 1e-11;
  static constexpr double kPivotTol = 1e-10;

  void set_cost(const Vector& cost) {
    const Index total = n_ + m_;
    tab_.row(m_).setZero();
    tab_.row(m_).head(total) = cost.transpose();
    for (Index r = 0; r < m_; ++r) {
      const double cb = cost[basis_[r]];
      if (cb != 0.0) tab_.row(m_) -= cb * tab_.row(r);
    }
  }

  void pivot(Index r, Index c) {
    const double piv = tab_(r, c);
    tab_.row(r) /= piv;
    for (Index i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = tab_(i, c);
      if (f != 0.0) {
        tab_.row(i) -= f * tab_.row(r);
        tab_(i, c) = 0.0;
      }
    }
    tab_(r, c) = 1.0;
    basis_[r] = c;
  }

  bool refresh() {
    std::vector<Index> rows_kept;
    for (Index r = 0; r < m_; ++r)
      if (!redundant_[r]) rows_kept.push_back(r);
    const Index k = static_cast<Index>(rows_kept.size());
    const Index total = n_ + m_;
    Matrix full(m_, total + 1);
    full.block(0, 0, m_, n_) = a_;
    full.block(0, n_, m_, m_).setIdentity();
    full.col(total) = b_;
    Matrix bmat(k, k), rhs(k, total + 1);
    for (Index i = 0; i < k; ++i) {
      rhs.row(i) = full.row(rows_kept[i]);
      for (Index jj = 0; jj < k; ++jj) bmat(i, jj) = full(rows_kept[i], basis_[rows_kept[jj]]);
    }
    Eigen::PartialPivLU<Matrix> lu(bmat);
    if (!(std::abs(lu.determinant()) > 0.0)) return false;
    const Matrix fresh = lu.solve(rhs);
    if (!fresh.allFinite()) return false;
    for (Index i = 0; i < k; ++i) tab_.row(rows_kept[i]) = fresh.row(i);
    for (Index i = 0; i < k; ++i)
      if (tab_(rows_kept[i], total) < 0.0 && tab_(rows_kept[i], total) > -tol::feasibility)
        tab_(rows_kept[i], total) = 0.0;
    return true;
  }

  // `bounded`: the objective is known to be bounded below (phase 1), so an
  // apparent ray can only be round-off.
  LpStatus iterate(const Vector& cost, int max_iterations, bool bounded) {
    const Index total = n_ + m_;
    int degenerate_run = 0;
    bool bland = false, fresh = false;
    std::vector<bool> skip(total, false);
    for (int it = 0; it < max_iterations; ++it) {
      ++iterations_;
      if (iterations_ % 64 == 0 && refresh()) set_cost(cost);
      Index enter = -1;
      double best = -kReducedTol;
      for (Index j = 0; j < total; ++j) {
        if (blocked_[j] || skip[j]) continue;
        const double d = tab_(m_, j);
        if (bland) {
          if (d < -kReducedTol) {
            enter = j;
            break;
          }
        } else if (d < best) {
          best = d;
          enter = j;
        }
      }
      if (enter < 0) return LpStatus::optimal;

      Index leave = -1;
      double ratio = kInf;
      for (Index r = 0; r < m_; ++r) {
        if (redundant_[r]) continue;
        const double e = tab_(r, enter);
        if (e <= kPivotTol) continue;
        const double q = std::max(tab_(r, total), 0.0) / e;
        if (leave < 0 || q < ratio - 1e-12) {
          leave = r;
          ratio = q;
        } else if (q <= ratio + 1e-12) {
          const bool better = bland ? basis_[r] < basis_[leave] : e > tab_(leave, enter);
          if (better) leave = r;
          ratio = std::min(ratio, q);
        }
      }
      if (leave < 0) {
        // re-derive the tableau once before trusting a ray, then drop
        // columns whose reduced cost is indistinguishable from zero
        if (!fresh && refresh()) {
          set_cost(cost);
          fresh = true;
          continue;
        }
        if (bounded || tab_(m_, enter) > -1e-9) {
          skip[enter] = true;
          continue;
        }
        ray_ = Vector::Zero(total);
        ray_[enter] = 1.0;
        for (Index r = 0; r < m_; ++r)
          if (!redundant_[r]) ray_[basis_[r]] = -tab_(r, enter);
        return LpStatus::unbounded;
      }
      // once degenerate stalling starts, stay on Bland's rule: it cannot cycle
      if (ratio <= 1e-14) {
        if (++degenerate_run > 50) bland = true;
      } else {
        degenerate_run = 0;
      }
      pivot(leave, enter);
      fresh = false;
      std::fill(skip.begin(), skip.end(), false);
    }
    return LpStatus::iteration_limit;
  }

  Matrix a_;
  Vector b_, c_;
  Index m_ = 0, n_ = 0;
  Matrix tab_;
  std::vector<Index> basis_;
  std::vector<bool> redundant_, blocked_;
  Vector ray_, phase1_cost_, cost2_;
  bool infeasible_ = false;
  int iterations_ = 0;
};

}  // namespace detail

/// Solves a linear program. Throws std::invalid_argument on malformed input.
inline LpResult solve_lp(const LinearProgram& lp) {
  lp.validate();
  const Index n = lp.variables();
  const Index m = lp.constraints();

  // Map each original variable onto standard-form columns: x_j = offset + sum coef * x'_k.
  struct Piece {
    Index col;
    double coef;
  };
  std::vector<std::vector<Piece>> map(n);
  Vector offset = Vector::Zero(n);
  Index cols = 0;
  std::vector<std::pair<Index, double>> upper_rows;  // (std col, bound)
  for (Index j = 0; j < n; ++j) {
    const double lo = lp.lower[j], hi = lp.upper[j];
    if (std::isfinite(lo)) {
      offset[j] = lo;
      map[j].push_back({cols, 1.0});
      if (std::isfinite(hi)) upper_rows.emplace_back(cols, hi - lo);
      ++cols;
    } else if (std::isfinite(hi)) {
      offset[j] = hi;
      map[j].push_back({cols++, -1.0});
    } else {
      map[j].push_back({cols++, 1.0});
      map[j].push_back({cols++, -1.0});
    }
  }
  const Index structural = cols;
  Index slacks = 0;
  for (auto t : lp.types)
    if (t != RowType::eq) ++slacks;
  slacks += static_cast<Index>(upper_rows.size());
  const Index rows_std = m + static_cast<Index>(upper_rows.size());
  const Index n_std = structural + slacks;

  Matrix a = Matrix::Zero(rows_std, n_std);
  Vector b = Vector::Zero(rows_std);
  Vector c = Vector::Zero(n_std);
  const double obj_sign = lp.sense == ObjectiveSense::minimize ? 1.0 : -1.0;
  double obj_offset = 0.0;
  for (Index j = 0; j < n; ++j) {
    obj_offset += lp.objective[j] * offset[j];
    for (const auto& pc : map[j]) c[pc.col] += obj_sign * lp.objective[j] * pc.coef;
  }
  Index slack_col = structural;
  std::vector<double> row_sign(rows_std, 1.0);
  for (Index i = 0; i < m; ++i) {
    double bi = lp.rhs[i];
    for (Index j = 0; j < n; ++j) {
      const double aij = lp.rows(i, j);
      if (aij == 0.0) continue;
      bi -= aij * offset[j];
      for (const auto& pc : map[j]) a(i, pc.col) += aij * pc.coef;
    }
    if (lp.types[i] == RowType::le) a(i, slack_col++) = 1.0;
    if (lp.types[i] == RowType::ge) a(i, slack_col++) = -1.0;
    b[i] = bi;
  }
  for (std::size_t k = 0; k < upper_rows.size(); ++k) {
    const Index r = m + static_cast<Index>(k);
    a(r, upper_rows[k].first) = 1.0;
    a(r, slack_col++) = 1.0;
    b[r] = upper_rows[k].second;
  }
  for (Index r = 0; r < rows_std; ++r)
    if (b[r] < 0.0) {
      a.row(r) *= -1.0;
      b[r] = -b[r];
      row_sign[r] = -1.0;
    }

  // drop linearly dependent rows up front so the simplex never pivots on
  // round-off in a rank-deficient tableau; dropped rows are re-checked below
  std::vector<Index> kept;
  {
    Eigen::ColPivHouseholderQR<Matrix> qr(a.transpose());
    qr.setThreshold(1e-11);
    const auto& perm = qr.colsPermutation().indices();
    for (Index i = 0; i < qr.rank(); ++i) kept.push_back(perm[i]);
    std::sort(kept.begin(), kept.end());
  }
  const Index rows_kept = static_cast<Index>(kept.size());
  Matrix ak(rows_kept, n_std);
  Vector bk(rows_kept);
  for (Index i = 0; i < rows_kept; ++i) {
    ak.row(i) = a.row(kept[i]);
    bk[i] = b[kept[i]];
  }
  auto expand_rows = [&](const Vector& yk) {
    Vector y = Vector::Zero(rows_std);
    for (Index i = 0; i < rows_kept; ++i) y[kept[i]] = yk[i];
    return y;
  };

  detail::StandardSimplex simplex(ak, bk, c);
  const int cap = static_cast<int>(50 * (rows_std + n_std) + 1000);
  LpResult res;
  res.status = simplex.run(cap);
  res.iterations = simplex.iterations();

  auto to_original = [&](const Vector& xs, bool homogeneous) {
    Vector x(n);
    for (Index j = 0; j < n; ++j) {
      double v = homogeneous ? 0.0 : offset[j];
      for (const auto& pc : map[j]) v += pc.coef * xs[pc.col];
      x[j] = v;
    }
    return x;
  };

  if (res.status == LpStatus::infeasible) {
    const Vector y = expand_rows(simplex.farkas());
    const double atmax = (a.transpose() * y).maxCoeff();
    const double by = b.dot(y);
    res.certificate_verified = atmax <= 1e-9 && by > 1e-9;
    res.farkas = Vector::Zero(m);
    for (Index i = 0; i < m; ++i) res.farkas[i] = row_sign[i] * y[i];
    return res;
  }
  if (res.status == LpStatus::unbounded) {
    const Vector d = simplex.ray();
    res.ray = to_original(d.head(n_std), true);
    res.certificate_verified = (a * d.head(n_std)).lpNorm<Eigen::Infinity>() <= 1e-9 && c.dot(d.head(n_std)) < 0.0;
    return res;
  }
  if (res.status != LpStatus::optimal) return res;

  Vector xs, yk;
  simplex.certify(xs, yk);
  const Vector y = expand_rows(yk);
  // clip round-off below zero; residuals are measured after clipping
  for (Index k = 0; k < n_std; ++k)
    if (xs[k] < 0.0 && xs[k] > -tol::feasibility) xs[k] = 0.0;
  const Vector d = c - a.transpose() * y;
  res.primal_residual = std::max((a * xs - b).lpNorm<Eigen::Infinity>(), std::max(0.0, -xs.minCoeff()));
  res.dual_residual = std::max(0.0, -d.minCoeff());
  res.complementarity = (xs.array() * d.array()).abs().maxCoeff();
  res.duality_gap = std::abs(c.dot(xs) - b.dot(y));
  res.x = to_original(xs, false);
  res.objective = lp.objective.dot(res.x);
  res.row_duals = Vector::Zero(m);
  for (Index i = 0; i < m; ++i) res.row_duals[i] = obj_sign * row_sign[i] * y[i];
  (void)obj_offset;
  if ((a * xs - b).lpNorm<Eigen::Infinity>() > 1e-7 * std::max(1.0, b.lpNorm<Eigen::Infinity>())) {
    // a dropped row was inconsistent with the kept ones
    res.status = LpStatus::infeasible;
    return res;
  }
  res.certificate_verified = res.primal_residual <= tol::feasibility && res.dual_residual <= tol::feasibility &&
                             res.duality_gap <= tol::duality_gap && res.complementarity <= tol::complementarity;
  return res;
}

}  // namespace robustss
