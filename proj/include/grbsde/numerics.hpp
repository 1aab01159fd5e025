#pragma once

#include <functional>
#include <limits>

namespace grbsde::numerics {

/// Absolute / relative targets for adaptive quadrature.
inline constexpr double quad_abs_tol = 1e-12;
inline constexpr double quad_rel_tol = 1e-10;

/// Cap for bracketed root searches.
inline constexpr int root_max_iterations = 200;

/// Adaptive Gauss-Kronrod integral of f over [a, b]; b may be +infinity.
/// Returns the estimate and writes the error estimate to `error` when given.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double* error = nullptr);

/// Solves f(x) = target for a nondecreasing f on [lo, +inf).
/// The bracket starts at [lo, lo + width] and the width doubles until
/// f(hi) >= target. Throws ConvergenceError when no bracket or no
/// convergence is reached within the cap.
double solve_increasing(const std::function<double(double)>& f, double target, double lo,
                        double width = 1.0);

}  // namespace grbsde::numerics
