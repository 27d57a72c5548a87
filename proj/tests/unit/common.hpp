#pragma once

#include <cmath>
#include <random>
#include <functional>

#include "robustss/market.hpp"
#include "robustss/measures.hpp"

namespace fixtures {

using robustss::Market;
using robustss::MarketGrid;
using robustss::Vector;

// one-period binomial, s0 = 1, down 0.5 / up 2; path 0 is down, path 1 is up
inline Market binomial(bool time_zero = true) {
  MarketGrid g;
  g.periods = 1;
  g.spot = 1.0;
  g.levels = {{0.5, 2.0}};
  g.cap = 4.0;
  return Market(g, {}, time_zero);
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// p ln(p/q) summed, used as an independent oracle for log-utility values
inline double kl(const Vector& p, const Vector& q) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

// golden-section maximum of a unimodal function on [a, b]
inline double golden_max(const std::function<double(double)>& f, double a, double b, int iters = 300) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc > fd) {
      b = d; d = c; fd = fc;
      c = b - r * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + r * (b - a); fd = f(d);
    }
  }
  return std::max(fc, fd);
}

}  // namespace fixtures
