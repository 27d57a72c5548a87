#pragma once

// Utility families with their conjugate V(y) = sup_x [U(x) - x y] and
// inverse marginal I = (U')^{-1} = -V'.

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "robustss/errors.hpp"
#include "robustss/tolerances.hpp"

namespace robustss {

enum class UtilityKind { log, power, bounded_exp };

class UtilityFamily {
 public:
  static UtilityFamily log() { return UtilityFamily(UtilityKind::log, 0.0); }
  /// U(x) = x^p / p
  static UtilityFamily power(double p) { return UtilityFamily(UtilityKind::power, p); }
  /// U(x) = 1 - exp(-x^p)
  static UtilityFamily bounded_exp(double p) { return UtilityFamily(UtilityKind::bounded_exp, p); }

  /// Parses "log", "power:p" or "bexp:p".
  static UtilityFamily parse(const std::string& tag) {
    if (tag == "log") return log();
    const auto colon = tag.find(':');
    if (colon == std::string::npos) throw SchemaError("unknown utility tag '" + tag + "'");
    const std::string name = tag.substr(0, colon);
    double p = 0.0;
    try {
      std::size_t used = 0;
      p = std::stod(tag.substr(colon + 1), &used);
      if (used != tag.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw SchemaError("bad utility parameter in '" + tag + "'");
    }
    try {
      if (name == "power") return power(p);
      if (name == "bexp") return bounded_exp(p);
    } catch (const InvariantError& e) {
      throw SchemaError("bad utility parameter in '" + tag + "': " + e.what());
    }
    throw SchemaError("unknown utility tag '" + tag + "'");
  }

  UtilityKind kind() const { return kind_; }
  double parameter() const { return p_; }

  std::string tag() const {
    switch (kind_) {
      case UtilityKind::log: return "log";
      case UtilityKind::power: return "power:" + format_parameter();
      case UtilityKind::bounded_exp: return "bexp:" + format_parameter();
    }
    return "";
  }

  bool bounded() const { return kind_ == UtilityKind::bounded_exp; }
  /// sup U = U(infinity); infinite for unbounded families.
  double sup() const { return bounded() ? 1.0 : std::numeric_limits<double>::infinity(); }

  double value(double x) const {
    switch (kind_) {
      case UtilityKind::log: return std::log(x);
      case UtilityKind::power: return std::pow(x, p_) / p_;
      case UtilityKind::bounded_exp: return -std::expm1(-std::pow(x, p_));
    }
    return 0.0;
  }

  double marginal(double x) const {
    switch (kind_) {
      case UtilityKind::log: return 1.0 / x;
      case UtilityKind::power: return std::pow(x, p_ - 1.0);
      case UtilityKind::bounded_exp: return p_ * std::pow(x, p_ - 1.0) * std::exp(-std::pow(x, p_));
    }
    return 0.0;
  }

  double curvature(double x) const {
    switch (kind_) {
      case UtilityKind::log: return -1.0 / (x * x);
      case UtilityKind::power: return (p_ - 1.0) * std::pow(x, p_ - 2.0);
      case UtilityKind::bounded_exp: {
        const double xp = std::pow(x, p_);
        return p_ * std::exp(-xp) * std::pow(x, p_ - 2.0) * ((p_ - 1.0) - p_ * xp);
      }
    }
    return 0.0;
  }

  /// I(y) = (U')^{-1}(y). For bounded families I(0) = +inf.
  double inverse_marginal(double y) const {
    check_dual_argument(y);
    switch (kind_) {
      case UtilityKind::log: return 1.0 / y;
      case UtilityKind::power: return std::pow(y, 1.0 / (p_ - 1.0));
      case UtilityKind::bounded_exp:
        if (y == 0.0) return std::numeric_limits<double>::infinity();
        return bexp_inverse(y);
    }
    return 0.0;
  }

  double conjugate(double y) const {
    check_dual_argument(y);
    switch (kind_) {
      case UtilityKind::log: return -std::log(y) - 1.0;
      case UtilityKind::power: return (1.0 - p_) / p_ * std::pow(y, p_ / (p_ - 1.0));
      case UtilityKind::bounded_exp: {
        if (y == 0.0) return sup();
        const double x = bexp_inverse(y);
        return value(x) - x * y;
      }
    }
    return 0.0;
  }

  /// V''(y) = -I'(y) = -1 / U''(I(y)).
  double conjugate_curvature(double y) const {
    check_dual_argument(y);
    if (y == 0.0) return std::numeric_limits<double>::infinity();
    switch (kind_) {
      case UtilityKind::log: return 1.0 / (y * y);
      case UtilityKind::power: return std::pow(y, (2.0 - p_) / (p_ - 1.0)) / (1.0 - p_);
      case UtilityKind::bounded_exp: return -1.0 / curvature(bexp_inverse(y));
    }
    return 0.0;
  }

 private:
  UtilityFamily(UtilityKind kind, double p) : kind_(kind), p_(p) {
    if (kind != UtilityKind::log && !(p > 0.0 && p < 1.0))
      throw InvariantError("utility.parameter", "p must lie in (0,1)");
  }

  void check_dual_argument(double y) const {
    if (y < 0.0 || std::isnan(y) || (y == 0.0 && !bounded()))
      throw InvariantError("utility.domain", "dual argument must be positive");
  }

  std::string format_parameter() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", p_);
    return buf;
  }

  // Solves ln U'(e^s) = ln y, i.e. ln p + (p-1) s - e^{p s} = ln y, which is
  // strictly decreasing in s. Bisection to the configured relative tolerance,
  // then Newton polishing inside the bracket.
  double bexp_inverse(double y) const {
    const double target = std::log(y);
    auto h = [&](double s) { return std::log(p_) + (p_ - 1.0) * s - std::exp(p_ * s) - target; };
    double lo = -1.0, hi = 1.0;
    while (h(lo) < 0.0) lo *= 2.0;
    while (h(hi) > 0.0) hi *= 2.0;
    while (hi - lo > tol::inverse_marginal) {
      const double mid = 0.5 * (lo + hi);
      (h(mid) > 0.0 ? lo : hi) = mid;
    }
    double s = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
      const double step = h(s) / ((p_ - 1.0) - p_ * std::exp(p_ * s));
      const double next = s - step;
      if (!(next >= lo - 1e-9 && next <= hi + 1e-9)) break;
      s = next;
    }
    return std::exp(s);
  }

  UtilityKind kind_;
  double p_;
};

inline double conjugate_V(const UtilityFamily& u, double y) { return u.conjugate(y); }
inline double inverse_marginal_I(const UtilityFamily& u, double y) { return u.inverse_marginal(y); }

/// Numeric proxies for the standing assumptions on U.
struct UtilityValidation {
  double marginal_at_min = 0.0;  // U'(smallest probe): large under Inada at 0
  double marginal_at_max = 0.0;  // U'(largest probe): small under Inada at infinity
  double elasticity_proxy = 0.0; // max of x U'(x)/U(x) on the upper probes where U > 0
  double elasticity_at_max = 0.0;
  bool bounded = false;
  std::vector<std::string> warnings;
};

inline UtilityValidation validate_utility(const UtilityFamily& u, const std::vector<double>& probes) {
  if (probes.size() < 2) throw std::invalid_argument("probe grid needs at least two points");
  double lo = probes.front(), hi = probes.front();
  for (double x : probes) {
    if (!(x > 0.0)) throw std::invalid_argument("probes must be positive");
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (std::log10(hi / lo) < 6.0) throw std::invalid_argument("probe grid must span at least 6 orders of magnitude");

  UtilityValidation r;
  r.marginal_at_min = u.marginal(lo);
  r.marginal_at_max = u.marginal(hi);
  r.bounded = u.bounded();
  // upper probes: the top third of the log range
  const double threshold = std::exp(std::log(lo) + (2.0 / 3.0) * (std::log(hi) - std::log(lo)));
  r.elasticity_proxy = -std::numeric_limits<double>::infinity();
  for (double x : probes) {
    const double ux = u.value(x);
    if (x < threshold || !(ux > 0.0)) continue;
    r.elasticity_proxy = std::max(r.elasticity_proxy, x * u.marginal(x) / ux);
  }
  if (u.value(hi) > 0.0) r.elasticity_at_max = hi * u.marginal(hi) / u.value(hi);
  if (!r.bounded) r.warnings.push_back("utility '" + u.tag() + "' is unbounded; boundedness assumption violated");
  if (r.elasticity_proxy >= 1.0) r.warnings.push_back("asymptotic elasticity proxy >= 1");
  return r;
}

/// U evaluated at max(x, xmin); sets `clamped` when the floor was used.
inline double clamped_utility(const UtilityFamily& u, double x, bool& clamped) {
  if (x < tol::wealth_floor) {
    clamped = true;
    return u.value(tol::wealth_floor);
  }
  return u.value(x);
}

}  // namespace robustss
