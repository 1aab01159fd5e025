#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace grbsde {

/// Growth function phi on [D, +inf). The recognized families carry closed
/// forms for H and its inverse; `custom` goes through quadrature.
class Phi {
public:
    enum class Kind { constant, linear, r_log_r, exponential, custom };

    static Phi constant(double k);
    static Phi linear();
    static Phi r_log_r();
    static Phi exponential();
    /// `derivative` may be empty, in which case phi' is central-differenced.
    static Phi custom(std::function<double(double)> value,
                      std::function<double(double)> derivative = {});

    [[nodiscard]] double operator()(double r) const;
    [[nodiscard]] double derivative(double r) const;
    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] double scale() const noexcept { return k_; }
    [[nodiscard]] std::string name() const;

private:
    Phi(Kind kind, double k) : kind_(kind), k_(k) {}

    Kind kind_;
    double k_ = 1.0;
    std::function<double(double)> value_;
    std::function<double(double)> derivative_;
};

/// Quadratic-growth weight psi on [D, +inf), nonnegative.
class Psi {
public:
    enum class Kind { zero, one, identity, custom };

    static Psi zero();
    static Psi one();
    static Psi identity();
    static Psi custom(std::function<double(double)> value);

    [[nodiscard]] double operator()(double r) const;
    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] std::string name() const;

private:
    explicit Psi(Kind kind) : kind_(kind) {}

    Kind kind_;
    std::function<double(double)> value_;
};

/// Argument of G. Admissible iff H(F^{-1}(x, c)) >= eta.
struct TransformPoint {
    double x = 0.0;
    double c = 0.0;
    double eta = 0.0;
};

struct TransformOptions {
    /// Span of the cached grid for the inner psi-integral (custom psi only).
    double cache_span = 1e3;
    std::size_t cache_nodes = 2048;
};

/// Immutable (D, phi, psi) triple with the cached inner integral
///   Psi(x) = int_D^x psi(r) dr.
/// H(x) = int_D^x dr / phi(r),  F(x, c) = int_D^x exp(c Psi(t)) dt.
///
/// Families with phi(D) = 0 (phi = r at D = 0, phi = r ln r at D <= 1)
/// construct fine, since F does not involve phi, but every H-based operation
/// on them throws ConfigError.
class Transform {
public:
    Transform(double D, Phi phi, Psi psi, TransformOptions options = {});

    [[nodiscard]] double D() const noexcept { return D_; }
    [[nodiscard]] const Phi& phi() const noexcept { return phi_; }
    [[nodiscard]] const Psi& psi() const noexcept { return psi_; }

    /// int_D^inf dr / phi(r); +inf for the constant, linear and r ln r families.
    [[nodiscard]] double h_mass() const;

    /// int_D^x psi(r) dr.
    [[nodiscard]] double psi_integral(double x) const;

    /// varphi(x, c) = phi'(x) + c phi(x) psi(x).
    [[nodiscard]] double varphi(double x, double c) const;

    /// Throws ConfigError when H is degenerate for this (D, phi).
    void require_h() const;

private:
    double D_;
    Phi phi_;
    Psi psi_;
    std::optional<double> h_mass_;
    std::string h_defect_;

    // Inner psi-integral cache (custom psi only), monotone cubic Hermite.
    std::vector<double> grid_;
    std::vector<double> grid_values_;
    std::vector<double> grid_slopes_;
};

[[nodiscard]] double eval_H(double x, const Transform& tf);
[[nodiscard]] double eval_H_inv(double y, const Transform& tf);
[[nodiscard]] double eval_F(double x, double c, const Transform& tf);
[[nodiscard]] double eval_F_inv(double y, double c, const Transform& tf);

/// H(F^{-1}(x, c)) - eta.
[[nodiscard]] double admissibility_deficit(const TransformPoint& p, const Transform& tf);

/// Deficit down to this value is clamped onto the boundary of the admissible set.
inline constexpr double admissibility_tolerance = 1e-9;

/// G(x, c, eta) = H^{-1}(H(F^{-1}(x, c)) - eta).
[[nodiscard]] double eval_G(const TransformPoint& p, const Transform& tf);

struct GGradient {
    double dG_dx = 0.0;
    double d2G_dx2 = 0.0;
    double dG_dc = 0.0;
    double dG_deta = 0.0;
};

/// Closed-form partial derivatives of G.
[[nodiscard]] GGradient grad_G(const TransformPoint& p, const Transform& tf);

/// int_D^u exp(c Psi(t)) Psi(t) dt, the inner integral of dG/dc.
[[nodiscard]] double dF_dc(double u, double c, const Transform& tf);

struct MonotoneScan {
    bool monotone = true;
    double witness_x = 0.0;
    double witness_c = 0.0;
    double drop = 0.0;
};

/// Scans x -> varphi(x, c) on a log-spaced grid over [D, x_max] for
/// c in an evenly spaced grid on [0, c_max]; reports the first decrease.
[[nodiscard]] MonotoneScan check_varphi_monotone(const Transform& tf, double c_max,
                                                 std::size_t grid_n, double x_max = 1e3,
                                                 std::size_t c_grid_n = 11);

/// F(H^{-1}(H(Lambda) + eta_T), C_T).
[[nodiscard]] double lambda_bar(double Lambda, double eta_T, double C_T, const Transform& tf);

}  // namespace grbsde
