#include <doctest.h>

#include <cmath>
#include <numbers>

#include "grbsde/errors.hpp"
#include "grbsde/transform.hpp"
#include "oracles.hpp"

using namespace grbsde;

namespace {
const double e = std::numbers::e;
}

TEST_SUITE("transform") {

TEST_CASE("H closed forms") {
    CHECK(eval_H(e, Transform(1.0, Phi::linear(), Psi::zero())) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(eval_H(3.5, Transform(0.0, Phi::constant(1.0), Psi::zero())) == doctest::Approx(3.5).epsilon(1e-14));
    CHECK(eval_H(std::exp(e), Transform(e, Phi::r_log_r(), Psi::zero())) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("H inverse") {
    const Transform lin(1.0, Phi::linear(), Psi::zero());
    CHECK(eval_H_inv(1.0, lin) == doctest::Approx(e).epsilon(1e-14));
    CHECK(eval_H_inv(0.0, lin) == 1.0);
    const Transform ex(0.0, Phi::exponential(), Psi::zero());
    // H(x) = 1 - e^{-x}, so H^{-1}(y) = -ln(1 - y)
    CHECK(eval_H_inv(0.5, ex) == doctest::Approx(std::log(2.0)).epsilon(1e-13));
    CHECK_THROWS_AS((void)eval_H_inv(1.0, ex), RangeError);
    CHECK_THROWS_AS((void)eval_H(0.5, lin), DomainError);
}

TEST_CASE("custom phi goes through quadrature") {
    const Transform custom(1.0, Phi::custom([](double r) { return r * r; }, [](double r) { return 2 * r; }),
                           Psi::zero());
    // int_1^x r^-2 dr = 1 - 1/x
    CHECK(eval_H(4.0, custom) == doctest::Approx(0.75).epsilon(1e-10));
    CHECK(eval_H_inv(0.75, custom) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("F closed forms and quadrature") {
    const Transform one(0.0, Phi::linear(), Psi::one());
    CHECK(eval_F(2.0, 0.0, one) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(eval_F(std::log(2.0), 1.0, one) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(eval_F_inv(1.0, 1.0, one) == doctest::Approx(std::log(2.0)).epsilon(1e-13));
    CHECK(eval_F_inv(0.0, 3.0, one) == 0.0);

    const Transform id(0.0, Phi::constant(1.0), Psi::identity());
    const double simpson = oracle::simpson([](double t) { return std::exp(t * t); }, 0.0, 1.0);
    constexpr double frozen = 1.4626517459071816;  // int_0^1 e^{t^2} dt
    CHECK(simpson == doctest::Approx(frozen).epsilon(1e-12));
    CHECK(eval_F(1.0, 2.0, id) == doctest::Approx(frozen).epsilon(1e-10));
    CHECK(eval_F_inv(frozen, 2.0, id) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("F anchors Psi at D") {
    // psi = 1, D = 1: F(x, c) = (e^{c (x - 1)} - 1) / c
    const Transform tf(1.0, Phi::linear(), Psi::one());
    CHECK(eval_F(2.0, 1.0, tf) == doctest::Approx(e - 1.0).epsilon(1e-13));
    const double simpson = oracle::simpson([](double t) { return std::exp(0.7 * (t - 1.0)); }, 1.0, 2.5);
    CHECK(eval_F(2.5, 0.7, tf) == doctest::Approx(simpson).epsilon(1e-10));
}

TEST_CASE("G") {
    const Transform tf(1.0, Phi::linear(), Psi::one());
    CHECK(eval_G({e - 1.0, 1.0, 0.0}, tf) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(eval_G({1.0, 0.0, std::log(2.0)}, tf) == doctest::Approx(1.0).epsilon(1e-12));
    for (double x : {0.1, 1.0, 7.0}) {
        CHECK(eval_G({x, 0.4, 0.0}, tf) == doctest::Approx(eval_F_inv(x, 0.4, tf)).epsilon(1e-10));
    }
    // eta beyond H(F^{-1}(x, c)) leaves the admissible set
    CHECK_THROWS_AS((void)eval_G({0.5, 1.0, 5.0}, tf), AdmissibilityError);
    try {
        (void)eval_G({0.5, 1.0, 5.0}, tf);
    } catch (const AdmissibilityError& err) {
        CHECK(err.deficit() < 0.0);
    }
}

TEST_CASE("G monotone in x and eta") {
    const Transform tf(2.0, Phi::r_log_r(), Psi::one());
    double prev = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double g = eval_G({0.5 + 0.3 * i, 0.5, 0.1}, tf);
        CHECK(g >= prev);
        prev = g;
    }
    prev = INFINITY;
    for (int i = 0; i < 20; ++i) {
        const double g = eval_G({20.0, 0.5, 0.02 * i}, tf);
        CHECK(g <= prev);
        prev = g;
    }
}

TEST_CASE("grad_G closed forms") {
    const Transform tf(1.0, Phi::linear(), Psi::zero());
    CHECK(grad_G({1.0, 0.0, 0.0}, tf).dG_deta == doctest::Approx(-2.0).epsilon(1e-12));
    const Transform t1(1.0, Phi::linear(), Psi::one());
    const double u = eval_F_inv(2.0, 0.5, t1);
    CHECK(grad_G({2.0, 0.5, 0.0}, t1).dG_dx == doctest::Approx(std::exp(-0.5 * (u - 1.0))).epsilon(1e-12));
}

TEST_CASE("grad_G against central differences") {
    const Transform tf(2.0, Phi::r_log_r(), Psi::one());
    const TransformPoint p{3.0, 0.4, 0.2};
    const GGradient g = grad_G(p, tf);
    const double h = 1e-5;
    auto G = [&](double x, double c, double eta) { return eval_G({x, c, eta}, tf); };
    const double fx = (G(p.x + h, p.c, p.eta) - G(p.x - h, p.c, p.eta)) / (2 * h);
    const double fc = (G(p.x, p.c + h, p.eta) - G(p.x, p.c - h, p.eta)) / (2 * h);
    const double fe = (G(p.x, p.c, p.eta + h) - G(p.x, p.c, p.eta - h)) / (2 * h);
    const double hx = 1e-4;
    const double fxx = (G(p.x + hx, p.c, p.eta) - 2 * G(p.x, p.c, p.eta) + G(p.x - hx, p.c, p.eta)) / (hx * hx);
    CHECK(g.dG_dx == doctest::Approx(fx).epsilon(1e-6));
    CHECK(g.dG_dc == doctest::Approx(fc).epsilon(1e-6));
    CHECK(g.dG_deta == doctest::Approx(fe).epsilon(1e-6));
    CHECK(g.d2G_dx2 == doctest::Approx(fxx).epsilon(1e-4));
}

TEST_CASE("varphi monotonicity scan") {
    CHECK(check_varphi_monotone(Transform(1.0, Phi::linear(), Psi::one()), 2.0, 100).monotone);
    CHECK(check_varphi_monotone(Transform(0.0, Phi::exponential(), Psi::zero()), 2.0, 100).monotone);
    const Transform bad(1.0, Phi::linear(), Psi::custom([](double r) { return 1.0 / (r * r); }));
    const MonotoneScan scan = check_varphi_monotone(bad, 1.0, 100);
    CHECK_FALSE(scan.monotone);
    CHECK(scan.witness_x < 1.2);
}

TEST_CASE("lambda_bar") {
    const Transform tf(1.0, Phi::linear(), Psi::one());
    CHECK(lambda_bar(2.0, 0.0, 1.0, tf) == doctest::Approx(e - 1.0).epsilon(1e-13));
    CHECK(lambda_bar(3.25, 0.0, 0.0, tf) == 2.25);
    CHECK(lambda_bar(1.0, 0.3, 0.0, tf) == doctest::Approx(std::exp(0.3) - 1.0).epsilon(1e-13));
    const Transform ex(0.0, Phi::exponential(), Psi::zero());
    CHECK_THROWS_AS((void)lambda_bar(1.0, 0.9, 0.0, ex), RangeError);
}

TEST_CASE("degenerate H is refused lazily") {
    const Transform tf(0.0, Phi::linear(), Psi::one());
    CHECK(eval_F(1.0, 0.0, tf) == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)eval_H(1.0, tf), ConfigError);
}

TEST_CASE("round trips on log grids") {
    for (const Phi& phi : {Phi::constant(1.0), Phi::linear(), Phi::r_log_r()}) {
        const Transform tf(2.0, phi, Psi::one());
        for (int i = 0; i <= 40; ++i) {
            const double x = 2.0 * std::pow(500.0, i / 40.0);
            CHECK(std::abs(eval_H_inv(eval_H(x, tf), tf) - x) <= 1e-9 * (1 + x));
            for (double c : {0.0, 0.01, 0.5}) {
                const double fx = eval_F(x, c, tf);
                if (!std::isfinite(fx)) continue;
                CHECK(std::abs(eval_F_inv(fx, c, tf) - x) <= 1e-8 * (1 + x));
            }
        }
    }
}

}  // TEST_SUITE
