#include "grbsde/numerics.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <sstream>

#include "grbsde/errors.hpp"

namespace grbsde::numerics {

double integrate(const std::function<double(double)>& f, double a, double b, double* error) {
    if (a == b) {
        if (error) *error = 0.0;
        return 0.0;
    }
    double err = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, 15, quad_rel_tol, &err, &l1);
    if (error) *error = err;
    return value;
}

double solve_increasing(const std::function<double(double)>& f, double target, double lo,
                        double width) {
    // NaN (inf - inf near overflow) counts as overshoot.
    auto g = [&](double x) {
        const double v = f(x) - target;
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };
    double glo = g(lo);
    if (glo == 0.0) return lo;
    if (glo > 0.0) {
        std::ostringstream msg;
        msg << "root search: target " << target << " lies below f(lo) at lo = " << lo;
        throw RangeError(msg.str());
    }
    double hi = lo + width;
    double ghi = g(hi);
    int doublings = 0;
    while (ghi < 0.0) {
        if (++doublings > root_max_iterations || !std::isfinite(hi)) {
            throw ConvergenceError("root search: no bracket within iteration cap", lo, hi);
        }
        lo = hi;
        glo = ghi;
        width *= 2.0;
        hi = lo + width;
        ghi = g(hi);
    }
    if (ghi == 0.0) return hi;
    // TOMS748 needs finite end values; pull hi in while it overflows.
    int shrinks = 0;
    while (!std::isfinite(ghi)) {
        if (++shrinks > root_max_iterations) {
            throw ConvergenceError("root search: overflow bracket did not shrink", lo, hi);
        }
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (gm == 0.0) return mid;
        if (gm < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
    }
    std::uintmax_t iterations = root_max_iterations;
    const auto [a, b] = boost::math::tools::toms748_solve(
        g, lo, hi, glo, ghi, boost::math::tools::eps_tolerance<double>(50), iterations);
    if (iterations >= static_cast<std::uintmax_t>(root_max_iterations)) {
        throw ConvergenceError("root search: iteration cap reached", a, b);
    }
    return 0.5 * (a + b);
}

}  // namespace grbsde::numerics
