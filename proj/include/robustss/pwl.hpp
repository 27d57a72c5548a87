#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "robustss/errors.hpp"
#include "robustss/tolerances.hpp"
#include "robustss/utility.hpp"

namespace robustss {

/// Chord interpolation of a concave utility. The chord never exceeds U, and
/// the tangent-intersection gap bounds how far below U it can fall.
struct PwlUtilityModel {
  std::vector<double> breakpoints;
  std::vector<double> values;     // U at breakpoints
  std::vector<double> marginals;  // U' at breakpoints
  std::vector<double> slopes;     // chord slopes, one per segment (strictly decreasing)
  double error_bound = 0.0;

  double evaluate(double x) const {
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), x);
    std::size_t k = it == breakpoints.begin() ? 0 : static_cast<std::size_t>(it - breakpoints.begin()) - 1;
    k = std::min(k, slopes.size() - 1);
    return values[k] + slopes[k] * (x - breakpoints[k]);
  }
};

namespace detail {

inline double tangent_gap(double a, double b, double ua, double ub, double da, double db) {
  const double xs = (ub - ua + da * a - db * b) / (da - db);
  const double chord = ua + (ub - ua) / (b - a) * (xs - a);
  return std::max(0.0, ua + da * (xs - a) - chord);
}

}  // namespace detail

inline PwlUtilityModel build_pwl_model(const std::function<double(double)>& u, const std::function<double(double)>& du,
                                       double lo, double hi, double eps) {
  if (!(lo > 0.0) || !(hi > lo)) throw InvariantError("pwl.range", "range must satisfy 0 < lo < hi");
  if (!(eps > 0.0)) throw InvariantError("pwl.epsilon", "error bound must be positive");
  struct Segment {
    double a, b;
  };
  std::vector<Segment> done, todo{{lo, hi}};
  int guard = 0;
  while (!todo.empty()) {
    if (++guard > 2'000'000) throw SolverError("pwl refinement did not terminate");
    const Segment s = todo.back();
    todo.pop_back();
    const double da = du(s.a), db = du(s.b);
    if (!(da > db)) throw InvariantError("utility.concavity", "U' must be strictly decreasing on the range");
    if (detail::tangent_gap(s.a, s.b, u(s.a), u(s.b), da, db) <= eps) {
      done.push_back(s);
      continue;
    }
    const double mid = std::sqrt(s.a * s.b);
    todo.push_back({mid, s.b});
    todo.push_back({s.a, mid});
  }
  std::sort(done.begin(), done.end(), [](const Segment& x, const Segment& y) { return x.a < y.a; });
  PwlUtilityModel m;
  m.breakpoints.push_back(lo);
  for (const auto& s : done) m.breakpoints.push_back(s.b);
  for (double x : m.breakpoints) {
    m.values.push_back(u(x));
    m.marginals.push_back(du(x));
  }
  for (std::size_t k = 0; k + 1 < m.breakpoints.size(); ++k) {
    m.slopes.push_back((m.values[k + 1] - m.values[k]) / (m.breakpoints[k + 1] - m.breakpoints[k]));
    m.error_bound = std::max(m.error_bound, detail::tangent_gap(m.breakpoints[k], m.breakpoints[k + 1], m.values[k],
                                                                m.values[k + 1], m.marginals[k], m.marginals[k + 1]));
  }
  for (std::size_t k = 1; k < m.slopes.size(); ++k)
    if (!(m.slopes[k] < m.slopes[k - 1]))
      throw InvariantError("utility.concavity", "chord slopes must be strictly decreasing");
  return m;
}

inline PwlUtilityModel build_pwl_model(const UtilityFamily& u, double lo, double hi, double eps = tol::pwl_default) {
  if (lo < tol::wealth_floor)
    throw InvariantError("pwl.range", "range must start at xmin > 0 for Inada utilities");
  return build_pwl_model([&](double x) { return u.value(x); }, [&](double x) { return u.marginal(x); }, lo, hi, eps);
}

}  // namespace robustss
