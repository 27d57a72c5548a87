#pragma once

// Centralized numeric tolerances. Acceptance checks reference these names.

namespace robustss::tol {

inline constexpr double feasibility = 1e-9;       // equality-row residuals
inline constexpr double duality_gap = 1e-8;       // LP primal/dual objective gap
inline constexpr double complementarity = 1e-8;
inline constexpr double saddle = 1e-7;            // certified gap of concave/convex solves
inline constexpr double pwl_default = 1e-6;
inline constexpr double measure_sum = 1e-12;      // |sum of weights - 1|
inline constexpr double measure_validity = 1e-10; // weights returned by solvers
inline constexpr double equivalence_min_weight = 1e-9;
inline constexpr double inverse_marginal = 1e-10; // relative, bisection on U'
inline constexpr double conjugate_numeric = 1e-9; // numeric V for bounded families
inline constexpr double wealth_floor = 1e-8;      // xmin for Inada clamping
inline constexpr double polar_membership = 1e-9;  // E_Q[c] <= 1 + this
inline constexpr double polar_product = 1e-8;     // E_P[c d] <= 1 + this
inline constexpr double theorem2_residual = 1e-6;

}  // namespace robustss::tol
