#include <doctest.h>

#include <cmath>

#include "grbsde/errors.hpp"
#include "grbsde/solver.hpp"

using namespace grbsde;

namespace {

double b1(const NodeState& s) { return s.b[0]; }

ProblemSpec constant_driver(double c) {
    ProblemSpec spec;
    spec.f = [c](const NodeState&, double, std::span<const double>) { return c; };
    spec.terminal = [](const NodeState&) { return 0.0; };
    return spec;
}

// Put-style obstacle (K - B)^+ with f = -r y; smooth decomposition of the
// constant part of L is all that is needed for the dK bound.
ProblemSpec put_problem() {
    ProblemSpec spec;
    spec.f = [](const NodeState&, double y, std::span<const double>) { return -0.1 * y; };
    spec.terminal = [](const NodeState& s) { return std::max(0.2 - s.b[0], 0.0); };
    Barrier lower;
    lower.value = [](const NodeState& s) { return std::max(0.2 - s.b[0], 0.0); };
    lower.decomposition = BarrierDecomposition{};
    spec.lower = lower;
    return spec;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("constant driver is integrated exactly") {
    const TimeMesh mesh = make_mesh(2.0, 8);
    const PathEnsemble e = simulate_paths(mesh, 300, 1, 1);
    const SolutionPanel s = solve_gbsde(constant_driver(0.75), mesh, e);
    for (Eigen::Index i = 0; i <= 8; ++i) {
        const double expect = 0.75 * (2.0 - mesh.time(static_cast<std::size_t>(i)));
        CHECK((s.Y.col(i).array() - expect).abs().maxCoeff() < 1e-12);
    }
    CHECK(s.Z[0].cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("terminal B gives Z near 1 and Y near B") {
    const TimeMesh mesh = make_mesh(1.0, 10);
    const PathEnsemble e = simulate_paths(mesh, 2000, 1, 2);
    ProblemSpec spec = constant_driver(0.0);
    spec.terminal = b1;
    const SolutionPanel s = solve_gbsde(spec, mesh, e);
    // regression noise only: Y - B averages out, Z scatters around 1
    CHECK((s.Y - e.B[0]).cwiseAbs().mean() < 0.05);
    // the first slice is a plain average, and projections keep the mean
    CHECK(s.y0() == doctest::Approx(e.B[0].col(10).mean()).epsilon(1e-10));
    CHECK(std::abs(s.Z[0].leftCols(10).mean() - 1.0) < 0.03);
}

TEST_CASE("a distant lower barrier changes nothing") {
    const TimeMesh mesh = make_mesh(1.0, 10);
    const PathEnsemble e = simulate_paths(mesh, 1000, 1, 3);
    ProblemSpec spec;
    spec.f = [](const NodeState&, double y, std::span<const double> z) { return 0.5 * z[0] * z[0] - 0.2 * y; };
    spec.terminal = [](const NodeState& s) { return std::sin(s.b[0]); };
    const SolutionPanel free = solve_gbsde(spec, mesh, e);
    spec.lower = Barrier{[](const NodeState&) { return -1e6; }, std::nullopt, false};
    const SolutionPanel refl = solve_grbsde_one_barrier(spec, mesh, e);
    CHECK((free.Y - refl.Y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(refl.dK_plus.maxCoeff() == 0.0);
}

TEST_CASE("reflection keeps Y above L and satisfies Skorokhod") {
    const TimeMesh mesh = make_mesh(1.0, 20);
    const PathEnsemble e = simulate_paths(mesh, 4000, 1, 4);
    const SolutionPanel s = solve_grbsde_one_barrier(put_problem(), mesh, e);
    CHECK(((s.Y - s.L).minCoeff()) >= -1e-12);
    CHECK(s.diagnostics.skorokhod_lower < 1e-10);
    CHECK(s.dK_plus.minCoeff() >= 0.0);
    CHECK(s.dK_plus.sum() > 0.0);
}

TEST_CASE("two barriers clamp and act singularly") {
    const TimeMesh mesh = make_mesh(1.0, 20);
    const PathEnsemble e = simulate_paths(mesh, 3000, 1, 5);
    ProblemSpec spec = constant_driver(0.0);
    spec.terminal = [](const NodeState& s) { return std::clamp(s.b[0], -0.5, 0.5); };
    spec.lower = Barrier{[](const NodeState&) { return -0.5; }, BarrierDecomposition{}, false};
    spec.upper = Barrier{[](const NodeState&) { return 0.5; }, BarrierDecomposition{}, false};
    spec.f = [](const NodeState& s, double, std::span<const double>) { return s.b[0] > 0 ? 1.0 : -1.0; };
    const SolutionPanel s = solve_grbsde_two_barriers(spec, mesh, e);
    CHECK(s.Y.maxCoeff() <= 0.5 + 1e-12);
    CHECK(s.Y.minCoeff() >= -0.5 - 1e-12);
    CHECK(s.diagnostics.singularity == 0.0);
    CHECK(s.diagnostics.skorokhod_lower < 1e-10);
    CHECK(s.diagnostics.skorokhod_upper < 1e-10);
    spec.upper = Barrier{[](const NodeState&) { return -0.6; }, std::nullopt, false};
    CHECK_THROWS_AS((void)solve_grbsde_two_barriers(spec, mesh, e), ConfigError);
}

TEST_CASE("penalty solutions increase toward the reflected one") {
    const TimeMesh mesh = make_mesh(1.0, 20);
    const PathEnsemble e = simulate_paths(mesh, 4000, 1, 6);
    const ProblemSpec spec = put_problem();
    const double target = solve_grbsde_one_barrier(spec, mesh, e).y0();
    double prev = -1.0;
    double prev_gap = 1e9;
    for (double p : {1.0, 10.0, 100.0, 1e4}) {
        const double y0 = solve_penalized(spec, mesh, e, p).y0();
        CHECK(y0 >= prev - 1e-12);
        CHECK(std::abs(target - y0) <= prev_gap + 1e-12);
        prev = y0;
        prev_gap = std::abs(target - y0);
    }
    CHECK(prev_gap < 1e-3);
    CHECK_THROWS_AS((void)solve_penalized(spec, mesh, e, 0.0), ConfigError);
}

TEST_CASE("dK bound report is per step") {
    const TimeMesh mesh = make_mesh(1.0, 20);
    const PathEnsemble e = simulate_paths(mesh, 4000, 1, 7);
    const ProblemSpec spec = put_problem();
    const SolutionPanel s = solve_grbsde_one_barrier(spec, mesh, e);
    const DkBoundReport rep = check_dk_bounds(s, spec, mesh, e);
    CHECK(rep.violations == 0);
    CHECK(rep.checked > 0);
    CHECK_FALSE(rep.steps.empty());
    for (const auto& st : rep.steps) {
        CHECK_FALSE(st.upper);
        CHECK(st.step < 20);
        CHECK(st.active_paths > 0);
    }
    ProblemSpec bare = spec;
    bare.lower->decomposition.reset();
    CHECK_THROWS_AS((void)check_dk_bounds(s, bare, mesh, e), ConfigError);
}

TEST_CASE("comparison counts ordered pairs") {
    const TimeMesh mesh = make_mesh(1.0, 10);
    const PathEnsemble e = simulate_paths(mesh, 1000, 1, 8);
    const SolutionPanel lo = solve_gbsde(constant_driver(0.1), mesh, e);
    const SolutionPanel hi = solve_gbsde(constant_driver(0.3), mesh, e);
    CHECK(compare_solutions(lo, hi).violations == 0);
    const ComparisonReport rev = compare_solutions(hi, lo);
    CHECK(rev.fraction() > 0.9);
    CHECK(rev.max_excess == doctest::Approx(0.2));
}

TEST_CASE("thread count does not change the answer") {
    const TimeMesh mesh = make_mesh(1.0, 10);
    const PathEnsemble e = simulate_paths(mesh, 2000, 1, 9);
    SolverOptions one, four;
    four.threads = 4;
    const SolutionPanel a = solve_grbsde_one_barrier(put_problem(), mesh, e, {}, one);
    const SolutionPanel b = solve_grbsde_one_barrier(put_problem(), mesh, e, {}, four);
    CHECK(a.Y == b.Y);
}

}  // TEST_SUITE
