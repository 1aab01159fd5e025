#pragma once

#include <Eigen/Dense>
#include <string>

#include "grbsde/errors.hpp"
#include "grbsde/mesh.hpp"
#include "grbsde/paths.hpp"
#include "grbsde/transform.hpp"
#include "grbsde/types.hpp"

namespace grbsde {

/// Nonnegative coefficient process (alpha, beta, C, R) materialized on a mesh.
struct ProcessSpec {
    enum class Kind {
        constant,         ///< level
        ramp,             ///< level + slope * t
        abs_brownian,     ///< level + slope * |B^1_t|
        running_max_abs,  ///< level + slope * max_{s <= t} |B^1_s|
    };

    Kind kind = Kind::constant;
    double level = 0.0;
    double slope = 0.0;

    static ProcessSpec constant(double v) { return {Kind::constant, v, 0.0}; }
    static ProcessSpec ramp(double v0, double slope) { return {Kind::ramp, v0, slope}; }
    static ProcessSpec abs_brownian(double v0, double scale) { return {Kind::abs_brownian, v0, scale}; }
    static ProcessSpec running_max_abs(double v0, double scale) {
        return {Kind::running_max_abs, v0, scale};
    }

    [[nodiscard]] bool nonnegative() const noexcept { return level >= 0.0 && slope >= 0.0; }
    [[nodiscard]] bool nondecreasing() const noexcept {
        return nonnegative() && (kind != Kind::abs_brownian || slope == 0.0);
    }
    [[nodiscard]] std::string name() const;

    /// paths x nodes.
    [[nodiscard]] Panel materialize(const TimeMesh& mesh, const PathEnsemble& ensemble) const;
};

/// Growth-envelope data: the transform (D, phi, psi) plus the coefficient
/// processes. eta_t = int_0^t alpha ds + int_0^t beta dA.
struct EnvelopeSpec {
    Transform transform;
    ProcessSpec alpha = ProcessSpec::constant(0.0);
    ProcessSpec beta = ProcessSpec::constant(0.0);
    ProcessSpec C = ProcessSpec::constant(0.0);
    ProcessSpec R = ProcessSpec::constant(0.0);

    /// Throws ConfigError for negative alpha/beta/R or a decreasing C.
    void validate() const;

    /// Left-point cumulative eta, paths x nodes; nondecreasing, eta_0 = 0.
    [[nodiscard]] Panel eta_path(const TimeMesh& mesh, const PathEnsemble& ensemble) const;
};

/// x_t = H^{-1}(a - eta_t), coefficient-wise over any Eigen expression.
/// Throws RangeError when a reaches the mass of 1/phi or eta exceeds a.
template <typename Derived>
[[nodiscard]] Eigen::Matrix<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>
bounded_envelope(const Transform& tf, double a, const Eigen::DenseBase<Derived>& eta) {
    if (!(a >= 0.0) || a >= tf.h_mass()) {
        throw RangeError("bounded envelope: a must lie in [0, int_D^inf dr/phi)");
    }
    if (eta.size() > 0 && eta.maxCoeff() > a) {
        throw RangeError("bounded envelope: eta exceeds a");
    }
    return eta.derived().unaryExpr([&](double e) { return eval_H_inv(a - e, tf); });
}

/// max_i |x_i - x_N - sum_{j >= i} phi(x_j) (eta_{j+1} - eta_j)|: left-point
/// residual of x_t = x_T + int_t^T phi(x_s) d eta_s along one path.
[[nodiscard]] double envelope_identity_residual(const Transform& tf, const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& eta);

/// Closed-form envelopes for the unbounded one-barrier families.
struct UnboundedFamily {
    enum class Kind {
        linear_psi1,  ///< phi = x, psi = 1, C pathwise
        xlogx_psi1,   ///< phi = x ln x, psi = 1, C = m
        linear_psix,  ///< phi = x, psi = x, C = m
    };

    Kind kind = Kind::linear_psi1;
    double D = 1.0;
    double m = 1.0;

    [[nodiscard]] std::string name() const;
    /// Throws ConfigError for unknown names.
    static UnboundedFamily from_name(const std::string& name, double D, double m);
    /// The (D, phi, psi) transform this family instantiates.
    [[nodiscard]] Transform transform() const;
};

/// Below this C counts as zero in the linear_psi1 closed form.
inline constexpr double c_zero_threshold = 1e-14;

/// x_s = G(E(Lambda_bar | F_s), C_s, eta_s) through the family closed form.
/// Panels are paths x nodes; C is ignored for the constant-C families (m is used).
[[nodiscard]] Panel unbounded_envelope(const UnboundedFamily& family, const Panel& conditional_lambda_bar,
                                       const Panel& C, const Panel& eta);

/// (x, z, k) built from a solution (x1, z1) of the linear-growth equation:
///   x = G(x1, C, eta),  z = dG/dx * z1,
///   dk = -dG/dc dC + 1/2 phi(x) e^{-2 C Psi(u)} / phi(u)^2 |z1|^2 M dt,
///   M = varphi(u, C) - varphi(x, C),  u = F^{-1}(x1, C).
struct EnvelopePath {
    Panel values;         ///< paths x nodes
    VectorPanel z_values; ///< per component, paths x nodes
    Panel k_increments;   ///< paths x steps
    Panel M;              ///< paths x nodes
    double min_dk = 0.0;
    /// True when every dk increment is >= -tolerance (the positive-measure hypothesis).
    bool dk_nonnegative = true;
};

[[nodiscard]] EnvelopePath build_transformed_solution(const Panel& x1, const VectorPanel& z1,
                                                      const Panel& C, const Panel& eta,
                                                      const Transform& tf, const TimeMesh& mesh,
                                                      double dk_tolerance = 1e-9);

}  // namespace grbsde
