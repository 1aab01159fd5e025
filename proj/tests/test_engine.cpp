#include <doctest.h>

#include <cmath>
#include <numbers>

#include "grbsde/errors.hpp"
#include "grbsde/mesh.hpp"
#include "grbsde/paths.hpp"
#include "grbsde/regression.hpp"
#include "grbsde/rng.hpp"
#include "grbsde/tree.hpp"
#include "oracles.hpp"

using namespace grbsde;

TEST_SUITE("engine") {

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using C = Philox4x32::Counter;
    CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("normal pairs are standard") {
    double s1 = 0.0, s2 = 0.0, s4 = 0.0, cross = 0.0;
    const int n = 200000;
    for (int p = 0; p < n / 2; ++p) {
        const auto z = normal_pair(7, static_cast<std::uint64_t>(p), 3, 0);
        for (double v : z) {
            s1 += v;
            s2 += v * v;
            s4 += v * v * v * v;
        }
        cross += z[0] * z[1];
    }
    CHECK(std::abs(s1 / n) < 4.0 / std::sqrt(n));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
    CHECK(std::abs(cross / (n / 2)) < 4.0 / std::sqrt(n / 2));
    CHECK(normal_pair(7, 1, 3, 0) == normal_pair(7, 1, 3, 0));
    CHECK(normal_pair(7, 1, 3, 0) != normal_pair(8, 1, 3, 0));
}

TEST_CASE("mesh") {
    const TimeMesh m = make_mesh(2.0, 4);
    CHECK(m.n_nodes() == 5);
    CHECK(m.dt(3) == doctest::Approx(0.5));
    CHECK(m.horizon() == 2.0);
    CHECK_THROWS_AS(TimeMesh({0.0, 0.5, 0.5}), ConfigError);
    CHECK_THROWS_AS(TimeMesh({0.1, 0.5}), ConfigError);
}

TEST_CASE("paths are reproducible and thread independent") {
    const TimeMesh mesh = make_mesh(1.0, 16);
    const PathEnsemble a = simulate_paths(mesh, 500, 2, 11, ASpec::running_max(), 1);
    const PathEnsemble b = simulate_paths(mesh, 500, 2, 11, ASpec::running_max(), 4);
    for (std::size_t k = 0; k < 2; ++k) CHECK(a.B[k] == b.B[k]);
    CHECK(a.A == b.A);
    CHECK(a.B[0].col(0).isZero());
    CHECK((a.B[1].col(16) - a.B[1].col(15)).isApprox(a.dB[1].col(15)));
    for (Eigen::Index p = 0; p < 500; ++p) {
        CHECK(a.A(p, 16) >= a.A(p, 15));
        CHECK(a.A(p, 16) == doctest::Approx(std::max(0.0, a.B[0].row(p).maxCoeff())));
    }
}

TEST_CASE("increment variance is dt") {
    const TimeMesh mesh = make_mesh(0.5, 5);
    const PathEnsemble e = simulate_paths(mesh, 40000, 1, 5);
    const double var = e.B[0].col(5).squaredNorm() / 40000.0;
    CHECK(var == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("deterministic A") {
    const TimeMesh mesh = make_mesh(1.0, 4);
    const Eigen::VectorXd a = deterministic_a_path(mesh, ASpec::step(0.6, 2.0));
    CHECK(a(0) == 0.0);
    CHECK(a(2) == 0.0);
    CHECK(a(3) == doctest::Approx(2.0));
    CHECK(a(4) == doctest::Approx(2.0));
    CHECK_THROWS_AS((void)deterministic_a_path(mesh, ASpec::running_max()), ConfigError);
}

TEST_CASE("Gamma is a martingale with unit mean") {
    const TimeMesh mesh = make_mesh(1.0, 20);
    const PathEnsemble e = simulate_paths(mesh, 40000, 1, 21);
    const Panel R = Panel::Constant(40000, 21, 1.0);
    const VectorPanel pi{Panel::Constant(40000, 21, 1.0)};
    const Eigen::VectorXd g = gamma_weight(mesh, e, R, pi, 0, 20);
    const double se = std::sqrt((g.array() - g.mean()).square().mean() / 40000.0);
    CHECK(std::abs(g.mean() - 1.0) < 4.0 * se);
    // exact: exp(B_T - T/2)
    CHECK(g(17) == doctest::Approx(std::exp(e.B[0](17, 20) - 0.5)).epsilon(1e-12));
}

TEST_CASE("Gaussian conditional expectation") {
    CHECK(gaussian_conditional_expectation([](double x) { return x * x; }, 0.5, 2.0) ==
          doctest::Approx(2.25).epsilon(1e-10));
    CHECK(gaussian_conditional_expectation([](double x) { return std::exp(x); }, 0.0, 1.0) ==
          doctest::Approx(std::exp(0.5)).epsilon(1e-10));
    CHECK(gaussian_conditional_expectation([](double x) { return x > 0 ? 1.0 : 0.0; }, 0.0, 1.0) ==
          doctest::Approx(0.5).epsilon(1e-9));
    CHECK(gaussian_conditional_expectation([](double x) { return x * x; }, 0.3, 0.0) ==
          doctest::Approx(0.09));
}

TEST_CASE("binomial tree") {
    const BinomialTree tree = binomial_tree(1.0, 16);
    CHECK(tree.node_count() == 153);
    CHECK(tree.state(16, 16) == doctest::Approx(4.0));
    double mass = 0.0, mean_abs = 0.0, oracle_abs = 0.0;
    for (std::size_t j = 0; j <= 16; ++j) {
        mass += tree.reach_probability(16, j);
        mean_abs += tree.reach_probability(16, j) * std::abs(tree.state(16, j));
        oracle_abs += oracle::binom(16, static_cast<int>(j)) / 65536.0 * std::abs(2.0 * j - 16.0) / 4.0;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
    constexpr double frozen = 0.7855224609375;  // E|S_16| / 4
    CHECK(oracle_abs == doctest::Approx(frozen).epsilon(1e-15));
    CHECK(mean_abs == doctest::Approx(frozen).epsilon(1e-14));
    CHECK_THROWS_AS((void)binomial_tree(1.0, 4, 2), ConfigError);
}

TEST_CASE("regression reproduces targets in the span") {
    const TimeMesh mesh = make_mesh(1.0, 1);
    const PathEnsemble e = simulate_paths(mesh, 2000, 1, 9);
    const Eigen::MatrixXd states = e.B[0].col(1);
    const RegressionFit fit(polynomial_estimator({0}, 3), states);
    const Eigen::VectorXd x = states.col(0);
    const Eigen::VectorXd target = (1.0 - 2.0 * x.array() + 0.5 * x.array().cube()).matrix();
    CHECK((fit.project(target) - target).cwiseAbs().maxCoeff() < 1e-9);
    const Eigen::MatrixXd beta = fit.coefficients(target);
    CHECK(beta(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(beta(1, 0) == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK(std::abs(beta(2, 0)) < 1e-8);
    CHECK(beta(3, 0) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(fit.fitted_standard_error(target, fit.project(target)).maxCoeff() < 1e-8);
}

TEST_CASE("regression is idempotent and orthogonal") {
    const TimeMesh mesh = make_mesh(1.0, 1);
    const PathEnsemble e = simulate_paths(mesh, 3000, 1, 10);
    const Eigen::MatrixXd states = e.B[0].col(1);
    const RegressionFit fit(polynomial_estimator({0}, 3), states);
    const Eigen::VectorXd y = states.col(0).array().abs().matrix();
    const Eigen::VectorXd p1 = fit.project(y);
    CHECK((fit.project(p1) - p1).cwiseAbs().maxCoeff() < 1e-10);
    const Eigen::VectorXd r = y - p1;
    CHECK(std::abs(r.sum()) / 3000.0 < 1e-10);
    CHECK(std::abs(r.dot(states.col(0))) / 3000.0 < 1e-10);
}

TEST_CASE("rank deficient designs stay finite") {
    Eigen::MatrixXd states(100, 2);
    for (int r = 0; r < 100; ++r) states(r, 0) = states(r, 1) = r / 50.0;
    const RegressionFit fit(polynomial_estimator({0, 1}, 1), states);
    CHECK(fit.rank_deficient());
    const Eigen::VectorXd y = (2.0 * states.col(0).array() + 1.0).matrix();
    CHECK((fit.project(y) - y).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("local cells reproduce cellwise polynomials") {
    const TimeMesh mesh = make_mesh(1.0, 1);
    const PathEnsemble e = simulate_paths(mesh, 4000, 1, 12);
    const Eigen::MatrixXd states = e.B[0].col(1);
    const RegressionFit fit(local_estimator({0}, 10, 2), states);
    CHECK(fit.n_basis() == 30);
    const Eigen::VectorXd x = states.col(0);
    // quadratic: inside every cell's span
    const Eigen::VectorXd quad = (x.array().square() - x.array()).matrix();
    CHECK((fit.project(quad) - quad).cwiseAbs().maxCoeff() < 1e-8);
    // |x| is not, but the local fit beats a global quadratic
    const Eigen::VectorXd absx = x.cwiseAbs();
    const RegressionFit global(polynomial_estimator({0}, 2), states);
    CHECK((fit.project(absx) - absx).squaredNorm() < 0.2 * (global.project(absx) - absx).squaredNorm());
    CHECK_THROWS_AS((void)local_estimator({0}, 0, 2), ConfigError);
}

TEST_CASE("local cells in two coordinates drop duplicated constants") {
    const TimeMesh mesh = make_mesh(1.0, 1);
    const PathEnsemble e = simulate_paths(mesh, 3000, 2, 13);
    Eigen::MatrixXd states(3000, 2);
    states << e.B[0].col(1), e.B[1].col(1);
    const RegressionFit fit(local_estimator({0, 1}, 5, 1), states);
    CHECK(fit.n_basis() == 10 + 9);
    CHECK_FALSE(fit.rank_deficient());
    const Eigen::VectorXd y = (states.col(0) + 3.0 * states.col(1)).array() + 2.0;
    CHECK((fit.project(Eigen::VectorXd(y)) - y).cwiseAbs().maxCoeff() < 1e-8);
}

}  // TEST_SUITE
