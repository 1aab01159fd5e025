#include "grbsde/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "grbsde/errors.hpp"
#include "grbsde/numerics.hpp"

namespace grbsde {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------- Phi / Psi

Phi Phi::constant(double k) {
    if (!(k > 0.0) || !std::isfinite(k)) {
        throw ConfigError("phi = const requires a positive finite constant, got " + fmt(k));
    }
    return Phi(Kind::constant, k);
}

Phi Phi::linear() { return Phi(Kind::linear, 1.0); }
Phi Phi::r_log_r() { return Phi(Kind::r_log_r, 1.0); }
Phi Phi::exponential() { return Phi(Kind::exponential, 1.0); }

Phi Phi::custom(std::function<double(double)> value, std::function<double(double)> derivative) {
    if (!value) throw ConfigError("custom phi needs a value function");
    Phi phi(Kind::custom, 1.0);
    phi.value_ = std::move(value);
    phi.derivative_ = std::move(derivative);
    return phi;
}

double Phi::operator()(double r) const {
    switch (kind_) {
        case Kind::constant: return k_;
        case Kind::linear: return r;
        case Kind::r_log_r: return r * std::log(r);
        case Kind::exponential: return std::exp(r);
        case Kind::custom: return value_(r);
    }
    return 0.0;
}

double Phi::derivative(double r) const {
    switch (kind_) {
        case Kind::constant: return 0.0;
        case Kind::linear: return 1.0;
        case Kind::r_log_r: return std::log(r) + 1.0;
        case Kind::exponential: return std::exp(r);
        case Kind::custom: {
            if (derivative_) return derivative_(r);
            const double h = 1e-6 * (1.0 + std::abs(r));
            return (value_(r + h) - value_(r - h)) / (2.0 * h);
        }
    }
    return 0.0;
}

std::string Phi::name() const {
    switch (kind_) {
        case Kind::constant: return "constant";
        case Kind::linear: return "linear";
        case Kind::r_log_r: return "r_log_r";
        case Kind::exponential: return "exponential";
        case Kind::custom: return "custom";
    }
    return "?";
}

Psi Psi::zero() { return Psi(Kind::zero); }
Psi Psi::one() { return Psi(Kind::one); }
Psi Psi::identity() { return Psi(Kind::identity); }

Psi Psi::custom(std::function<double(double)> value) {
    if (!value) throw ConfigError("custom psi needs a value function");
    Psi psi(Kind::custom);
    psi.value_ = std::move(value);
    return psi;
}

double Psi::operator()(double r) const {
    switch (kind_) {
        case Kind::zero: return 0.0;
        case Kind::one: return 1.0;
        case Kind::identity: return r;
        case Kind::custom: return value_(r);
    }
    return 0.0;
}

std::string Psi::name() const {
    switch (kind_) {
        case Kind::zero: return "zero";
        case Kind::one: return "one";
        case Kind::identity: return "identity";
        case Kind::custom: return "custom";
    }
    return "?";
}

// ---------------------------------------------------------------- Transform

Transform::Transform(double D, Phi phi, Psi psi, TransformOptions options)
    : D_(D), phi_(std::move(phi)), psi_(std::move(psi)) {
    if (!(D >= 0.0) || !std::isfinite(D)) {
        throw ConfigError("lower domain bound D must be finite and nonnegative, got " + fmt(D));
    }

    switch (phi_.kind()) {
        case Phi::Kind::linear:
            if (!(D_ > 0.0)) h_defect_ = "phi(r) = r vanishes at D = 0; H diverges, use D > 0";
            break;
        case Phi::Kind::r_log_r:
            if (!(D_ > 1.0)) h_defect_ = "phi(r) = r ln r needs D > 1 to stay positive on [D, inf)";
            break;
        case Phi::Kind::custom: {
            const double p = phi_(D_);
            if (!(p > 0.0) || !std::isfinite(p)) {
                h_defect_ = "custom phi must be positive at D, got phi(D) = " + fmt(p);
            }
            break;
        }
        default: break;
    }

    if (h_defect_.empty()) {
        switch (phi_.kind()) {
            case Phi::Kind::exponential: h_mass_ = std::exp(-D_); break;
            case Phi::Kind::custom: {
                double err = 0.0;
                const double m = numerics::integrate(
                    [this](double r) { return 1.0 / phi_(r); }, D_, inf, &err);
                h_mass_ = (std::isfinite(m) && err <= 1e-6 * (1.0 + std::abs(m))) ? m : inf;
                break;
            }
            default: h_mass_ = inf; break;
        }
    }

    if (psi_.kind() == Psi::Kind::custom) {
        const std::size_t n = std::max<std::size_t>(options.cache_nodes, 2);
        const double log_span = std::log1p(options.cache_span);
        grid_.resize(n);
        grid_values_.resize(n);
        grid_slopes_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            grid_[k] = D_ + std::expm1(log_span * static_cast<double>(k) / static_cast<double>(n - 1));
            grid_slopes_[k] = psi_(grid_[k]);
        }
        grid_values_[0] = 0.0;
        for (std::size_t k = 1; k < n; ++k) {
            grid_values_[k] = grid_values_[k - 1] +
                              numerics::integrate([this](double r) { return psi_(r); },
                                                  grid_[k - 1], grid_[k]);
        }
        // Fritsch-Carlson limiter on the exact slopes keeps the interpolant monotone.
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const double delta = (grid_values_[k + 1] - grid_values_[k]) / (grid_[k + 1] - grid_[k]);
            if (delta <= 0.0) {
                grid_slopes_[k] = 0.0;
                grid_slopes_[k + 1] = 0.0;
                continue;
            }
            const double a = grid_slopes_[k] / delta;
            const double b = grid_slopes_[k + 1] / delta;
            const double s = a * a + b * b;
            if (s > 9.0) {
                const double tau = 3.0 / std::sqrt(s);
                grid_slopes_[k] = tau * a * delta;
                grid_slopes_[k + 1] = tau * b * delta;
            }
        }
    }
}

void Transform::require_h() const {
    if (!h_defect_.empty()) throw ConfigError(h_defect_);
}

double Transform::h_mass() const {
    require_h();
    return *h_mass_;
}

double Transform::psi_integral(double x) const {
    if (x < D_) throw DomainError("psi integral: x = " + fmt(x) + " below D = " + fmt(D_));
    switch (psi_.kind()) {
        case Psi::Kind::zero: return 0.0;
        case Psi::Kind::one: return x - D_;
        case Psi::Kind::identity: return 0.5 * (x - D_) * (x + D_);
        case Psi::Kind::custom: break;
    }
    if (x >= grid_.back()) {
        return grid_values_.back() +
               numerics::integrate([this](double r) { return psi_(r); }, grid_.back(), x);
    }
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
    const std::size_t k = static_cast<std::size_t>(std::distance(grid_.begin(), it)) - 1;
    const double h = grid_[k + 1] - grid_[k];
    const double s = (x - grid_[k]) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * grid_values_[k] + (s3 - 2 * s2 + s) * h * grid_slopes_[k] +
           (-2 * s3 + 3 * s2) * grid_values_[k + 1] + (s3 - s2) * h * grid_slopes_[k + 1];
}

double Transform::varphi(double x, double c) const {
    return phi_.derivative(x) + c * phi_(x) * psi_(x);
}

// ---------------------------------------------------------------- H, F

double eval_H(double x, const Transform& tf) {
    tf.require_h();
    const double D = tf.D();
    if (x < D) throw DomainError("H: x = " + fmt(x) + " below D = " + fmt(D));
    switch (tf.phi().kind()) {
        case Phi::Kind::constant: return (x - D) / tf.phi().scale();
        case Phi::Kind::linear: return std::log(x / D);
        case Phi::Kind::r_log_r: return std::log(std::log(x)) - std::log(std::log(D));
        case Phi::Kind::exponential: return std::exp(-D) - std::exp(-x);
        case Phi::Kind::custom: break;
    }
    const double h = numerics::integrate([&](double r) { return 1.0 / tf.phi()(r); }, D, x);
    if (!std::isfinite(h)) throw DomainError("H: integral of 1/phi diverges on [D, " + fmt(x) + "]");
    return h;
}

double eval_H_inv(double y, const Transform& tf) {
    tf.require_h();
    const double D = tf.D();
    if (y < 0.0) throw DomainError("H^{-1}: y = " + fmt(y) + " is negative");
    if (y == 0.0) return D;
    const double mass = tf.h_mass();
    if (y >= mass) {
        throw RangeError("H^{-1}: y = " + fmt(y) + " reaches the total mass of 1/phi (" +
                         fmt(mass) + ")");
    }
    switch (tf.phi().kind()) {
        case Phi::Kind::constant: return D + tf.phi().scale() * y;
        case Phi::Kind::linear: return D * std::exp(y);
        case Phi::Kind::r_log_r: return std::exp(std::log(D) * std::exp(y));
        case Phi::Kind::exponential: return -std::log(std::exp(-D) - y);
        case Phi::Kind::custom: break;
    }
    return numerics::solve_increasing([&](double x) { return eval_H(x, tf); }, y, D);
}

double eval_F(double x, double c, const Transform& tf) {
    const double D = tf.D();
    if (x < D) throw DomainError("F: x = " + fmt(x) + " below D = " + fmt(D));
    if (c < 0.0) throw DomainError("F: c = " + fmt(c) + " is negative");
    if (c == 0.0 || tf.psi().kind() == Psi::Kind::zero) return x - D;
    if (tf.psi().kind() == Psi::Kind::one) return std::expm1(c * (x - D)) / c;
    const double v =
        numerics::integrate([&](double t) { return std::exp(c * tf.psi_integral(t)); }, D, x);
    return std::isnan(v) ? inf : v;
}

double eval_F_inv(double y, double c, const Transform& tf) {
    const double D = tf.D();
    if (y < 0.0) throw DomainError("F^{-1}: y = " + fmt(y) + " is negative");
    if (c < 0.0) throw DomainError("F^{-1}: c = " + fmt(c) + " is negative");
    if (y == 0.0) return D;
    if (c == 0.0 || tf.psi().kind() == Psi::Kind::zero) return D + y;
    if (tf.psi().kind() == Psi::Kind::one) return D + std::log1p(c * y) / c;
    return numerics::solve_increasing([&](double x) { return eval_F(x, c, tf); }, y, D);
}

// ---------------------------------------------------------------- G

namespace {

void validate_point(const TransformPoint& p) {
    if (!(p.x >= 0.0) || !(p.c >= 0.0) || !(p.eta >= 0.0)) {
        throw DomainError("transform point (x, c, eta) = (" + fmt(p.x) + ", " + fmt(p.c) + ", " +
                          fmt(p.eta) + ") must be nonnegative");
    }
}

}  // namespace

double admissibility_deficit(const TransformPoint& p, const Transform& tf) {
    validate_point(p);
    return eval_H(eval_F_inv(p.x, p.c, tf), tf) - p.eta;
}

double eval_G(const TransformPoint& p, const Transform& tf) {
    validate_point(p);
    const double u = eval_F_inv(p.x, p.c, tf);
    if (p.eta == 0.0) return u;
    double deficit = eval_H(u, tf) - p.eta;
    if (deficit < -admissibility_tolerance) {
        throw AdmissibilityError("G: point outside the admissible set, H(F^{-1}(x,c)) - eta = " +
                                     fmt(deficit),
                                 deficit);
    }
    deficit = std::max(deficit, 0.0);
    return eval_H_inv(deficit, tf);
}

double dF_dc(double u, double c, const Transform& tf) {
    const double D = tf.D();
    if (u < D) throw DomainError("dF/dc: u = " + fmt(u) + " below D = " + fmt(D));
    switch (tf.psi().kind()) {
        case Psi::Kind::zero: return 0.0;
        case Psi::Kind::one: {
            const double s = u - D;
            if (c == 0.0) return 0.5 * s * s;
            const double cs = c * s;
            if (cs > 1e-3) return (cs * std::exp(cs) - std::expm1(cs)) / (c * c);
            break;
        }
        default: break;
    }
    return numerics::integrate(
        [&](double t) {
            const double inner = tf.psi_integral(t);
            return std::exp(c * inner) * inner;
        },
        D, u);
}

GGradient grad_G(const TransformPoint& p, const Transform& tf) {
    const double u = eval_F_inv(p.x, p.c, tf);
    const double g = eval_G(p, tf);
    const Phi& phi = tf.phi();
    const double phi_g = phi(g);
    const double phi_u = phi(u);

    GGradient out;
    out.dG_dx = phi_g * std::exp(-p.c * tf.psi_integral(u)) / phi_u;
    out.d2G_dx2 = out.dG_dx * out.dG_dx / phi_g *
                  (phi.derivative(g) - phi.derivative(u) - p.c * phi_u * tf.psi()(u));
    out.dG_dc = -out.dG_dx * dF_dc(u, p.c, tf);
    out.dG_deta = -phi_g;
    return out;
}

MonotoneScan check_varphi_monotone(const Transform& tf, double c_max, std::size_t grid_n,
                                   double x_max, std::size_t c_grid_n) {
    const double D = tf.D();
    grid_n = std::max<std::size_t>(grid_n, 2);
    std::vector<double> xs(grid_n);
    const double start = D > 0.0 ? D : 1e-6;
    const double ratio = std::log(x_max / start);
    for (std::size_t k = 0; k < grid_n; ++k) {
        xs[k] = start * std::exp(ratio * static_cast<double>(k) / static_cast<double>(grid_n - 1));
    }
    xs.front() = D;

    const std::size_t nc = c_max > 0.0 ? std::max<std::size_t>(c_grid_n, 2) : 1;
    for (std::size_t j = 0; j < nc; ++j) {
        const double c = nc == 1 ? 0.0 : c_max * static_cast<double>(j) / static_cast<double>(nc - 1);
        double prev = tf.varphi(xs[0], c);
        for (std::size_t k = 1; k < grid_n; ++k) {
            const double v = tf.varphi(xs[k], c);
            if (v < prev - 1e-10 * (1.0 + std::abs(prev))) {
                return MonotoneScan{false, xs[k], c, prev - v};
            }
            prev = v;
        }
    }
    return MonotoneScan{};
}

double lambda_bar(double Lambda, double eta_T, double C_T, const Transform& tf) {
    if (Lambda < tf.D()) {
        throw DomainError("lambda_bar: Lambda = " + fmt(Lambda) + " below D = " + fmt(tf.D()));
    }
    if (eta_T < 0.0 || C_T < 0.0) throw DomainError("lambda_bar: eta_T and C_T must be nonnegative");
    if (eta_T == 0.0) return eval_F(Lambda, C_T, tf);
    const double h = eval_H(Lambda, tf) + eta_T;
    if (h >= tf.h_mass()) {
        throw RangeError("lambda_bar: eta_T = " + fmt(eta_T) +
                         " is not below int_Lambda^inf dr/phi(r) = " +
                         fmt(tf.h_mass() - eval_H(Lambda, tf)));
    }
    return eval_F(eval_H_inv(h, tf), C_T, tf);
}

}  // namespace grbsde
