// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "grbsde/errors.hpp"
#include "grbsde/scenario.hpp"
#include "grbsde/solver.hpp"
#include "grbsde/transform.hpp"

using namespace grbsde;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

Scenario bundled(const std::string& name) { return load_scenario(resolve_scenario(name, GRBSDE_SCENARIO_DIR)); }

// --- 1: quadratic driver against the exponential change of variable
Outcome c1() {
    const auto t0 = Clock::now();
    const TimeMesh mesh = make_mesh(1.0, 50);
    const PathEnsemble ens = simulate_paths(mesh, 20000, 1, 20240601);
    ProblemSpec spec;
    spec.f = [](const NodeState&, double, std::span<const double> z) { return 0.5 * z[0] * z[0]; };
    spec.terminal = [](const NodeState& s) { return s.b[0]; };
    const SolutionPanel s = solve_gbsde(spec, mesh, ens, polynomial_estimator({0}, 2));
    double worst = 0.0;
    for (Eigen::Index i = 0; i <= 50; ++i) {
        const double shift = 0.5 * (1.0 - mesh.time(static_cast<std::size_t>(i)));
        worst = std::max(worst, (s.Y.col(i) - ens.B[0].col(i)).array().operator-(shift).abs().mean());
    }
    const double z_err = std::abs(s.Z[0].leftCols(50).mean() - 1.0);
    const double rt = seconds_since(t0);
    return {worst <= 0.05 && z_err <= 0.05 && rt <= 60.0,
            fmt("max node mean|Y - oracle| = %.4g, |mean Z - 1| = %.4g, %.2f s", worst, z_err, rt)};
}

// --- 2: H and F round trips
Outcome c2() {
    const auto t0 = Clock::now();
    struct PhiCase {
        Phi phi;
        double D;
        double span;  // grid covers D + [1e-3, span]
    };
    const std::vector<PhiCase> phis{{Phi::constant(1.0), 0.0, 1e3},
                                    {Phi::linear(), 1.0, 1e3},
                                    {Phi::r_log_r(), 2.0, 1e3},
                                    {Phi::exponential(), 0.0, 20.0}};
    struct PsiCase {
        Psi psi;
        std::vector<double> c;
    };
    const std::vector<PsiCase> psis{{Psi::zero(), {0.0, 1.0}}, {Psi::one(), {0.0, 0.05}}, {Psi::identity(), {0.0, 1e-4}}};
    double worst_h = 0.0, worst_f = 0.0;
    for (const auto& pc : phis) {
        for (const auto& sc : psis) {
            const Transform tf(pc.D, pc.phi, sc.psi);
            for (int k = 0; k < 200; ++k) {
                const double x = pc.D + 1e-3 * std::pow(pc.span / 1e-3, k / 199.0);
                worst_h = std::max(worst_h, std::abs(eval_H_inv(eval_H(x, tf), tf) - x) / x);
                for (const double c : sc.c) {
                    worst_f = std::max(worst_f, std::abs(eval_F_inv(eval_F(x, c, tf), c, tf) - x) / x);
                }
            }
        }
    }
    const double rt = seconds_since(t0);
    return {worst_h <= 1e-8 && worst_f <= 1e-8 && rt <= 5.0,
            fmt("max rel error H %.3g, F %.3g, %.2f s", worst_h, worst_f, rt)};
}

// --- 3: grad_G against central differences
Outcome c3() {
    const std::vector<Transform> tfs{Transform(1.0, Phi::linear(), Psi::one()),
                                     Transform(2.0, Phi::r_log_r(), Psi::one()),
                                     Transform(0.0, Phi::constant(1.0), Psi::identity())};
    double worst = 0.0;
    int points = 0;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); };
    for (const Transform& tf : tfs) {
        for (int k = 0; k < 34 && points < 100; ++k, ++points) {
            // interior point: x on a log grid, c in (0, 1), eta a fraction of its admissible range
            const double x = 0.2 * std::pow(25.0, k / 33.0);
            const double c = 0.1 + 0.8 * ((k * 7) % 34) / 33.0;
            const double eta = (0.1 + 0.8 * ((k * 13) % 34) / 33.0) * eval_H(eval_F_inv(x, c, tf), tf);
            const GGradient g = grad_G({x, c, eta}, tf);
            auto G = [&](double xx, double cc, double ee) { return eval_G({xx, cc, ee}, tf); };
            auto d5 = [](const std::function<double(double)>& f, double v, double h) {
                return (-f(v + 2 * h) + 8 * f(v + h) - 8 * f(v - h) + f(v - 2 * h)) / (12 * h);
            };
            const double hx = 1e-3 * x, hc = 1e-3, he = 1e-3 * eta;
            worst = std::max(worst, rel(g.dG_dx, d5([&](double v) { return G(v, c, eta); }, x, hx)));
            worst = std::max(worst, rel(g.dG_dc, d5([&](double v) { return G(x, v, eta); }, c, hc)));
            worst = std::max(worst, rel(g.dG_deta, d5([&](double v) { return G(x, c, v); }, eta, he)));
            worst = std::max(worst, rel(g.d2G_dx2, d5([&](double v) { return grad_G({v, c, eta}, tf).dG_dx; }, x, hx)));
        }
    }
    return {points == 100 && worst <= 1e-6, fmt("%.0f points, max relative discrepancy %.3g", points, worst)};
}

// --- 4: envelope sandwich
Outcome c4() {
    const Scenario sc = bundled("unbounded_linear_psi1");
    const ScenarioReport rep = run_scenario(sc);
    const double viol = rep.metric("sandwich_violations");
    const double dkm = rep.metric("dk_minus_total");
    return {sc.n_paths == 10000 && viol == 0.0 && dkm <= 1e-3,
            fmt("%.0f paths, %.0f sandwich violations, total dK- %.3g", static_cast<double>(sc.n_paths), viol, dkm)};
}

// --- 5: Skorokhod and singularity, per path
Outcome c5() {
    double worst = 0.0, sing = 0.0;
    int count = 0;
    for (const auto& e : list_scenarios(GRBSDE_SCENARIO_DIR)) {
        if (e.kind != "reflected" && e.kind != "two_barrier" && e.kind != "envelope_sandwich") continue;
        const ScenarioReport rep = run_scenario(load_scenario(e.file));
        const SolutionPanel& p = *rep.panel;
        for (Eigen::Index r = 0; r < p.Y.rows(); ++r) {
            const double scale = 1.0 + p.Y.row(r).cwiseAbs().maxCoeff();
            worst = std::max(worst, std::abs(p.skorokhod_lower(r)) / scale);
            worst = std::max(worst, std::abs(p.skorokhod_upper(r)) / scale);
        }
        sing = std::max(sing, p.dK_plus.cwiseMin(p.dK_minus).maxCoeff());
        ++count;
    }
    return {worst <= 1e-3 && sing == 0.0,
            fmt("%.0f scenarios, max |sum (Y-L) dK| / (1 + |Y|) = %.3g, max min(dK+, dK-) = %.3g", count, worst, sing)};
}

// --- 6: dK bounds
Outcome c6() {
    const TimeMesh mesh = make_mesh(1.0, 16);
    const PathEnsemble ens = simulate_paths(mesh, 20000, 1, 3);
    ProblemSpec spec;
    spec.f = [](const NodeState&, double, std::span<const double>) { return -1.0; };
    spec.terminal = [](const NodeState&) { return 0.0; };
    spec.lower = Barrier{[](const NodeState&) { return 0.0; }, BarrierDecomposition{}, false};
    const SolutionPanel s = solve_grbsde_one_barrier(spec, mesh, ens);
    const DkBoundReport exact = check_dk_bounds(s, spec, mesh, ens);
    double step_excess = 0.0;
    for (const auto& st : exact.steps) step_excess = std::max(step_excess, std::abs(st.mean_excess));
    const double path_excess = std::max(std::abs(exact.max_excess_lower), std::abs(exact.max_excess_upper));
    bool ok = path_excess <= 1e-12 && step_excess <= 1e-12 && exact.steps.size() == 16;

    double random_viol = 0.0;
    for (const char* name : {"reflected_put", "reflected_abs", "reflected_quadratic"}) {
        random_viol += run_scenario(bundled(name)).metric("dk_bound_violations");
    }
    ok = ok && random_viol == 0.0;
    return {ok, fmt("constant case excess %.3g (pathwise %.3g); randomized steps over 3 s.e.: %.0f", step_excess,
                    path_excess, random_viol)};
}

// --- 7: comparison over five seeds
Outcome c7() {
    const Scenario sc = bundled("comparison_ordered");
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RunOptions opt;
        opt.seed = seed;
        total += run_scenario(sc, opt).metric("comparison_violations");
    }
    return {total == 0.0, fmt("violations over seeds 1..5: %.0f", total)};
}

// --- 8: tree agreement
Outcome c8() {
    double worst = 0.0;
    bool sized = true;
    for (const char* name : {"reflected_forced", "reflected_abs", "reflected_put"}) {
        const Scenario sc = bundled(name);
        sized = sized && sc.n_paths == 20000 && sc.config["oracle"]["n_steps"] == 16;
        worst = std::max(worst, run_scenario(sc).metric("y0_tree_error"));
    }
    return {sized && worst <= 0.02, fmt("max |Y0 - tree| = %.4g", worst)};
}

// --- 9: Gamma martingale and the Holder bound
Outcome c9() {
    double gz = 0.0, hb = -INFINITY;
    int count = 0;
    for (const auto& e : list_scenarios(GRBSDE_SCENARIO_DIR)) {
        if (e.kind != "sup_gamma") continue;
        const ScenarioReport rep = run_scenario(load_scenario(e.file));
        gz = std::max(gz, rep.metric("gamma_martingale"));
        hb = std::max(hb, rep.metric("holder_bound"));
        ++count;
    }
    return {count > 0 && gz <= 3.0 && hb <= 3.0,
            fmt("%.0f scenarios, max |E Gamma - 1| / s.e. = %.3g, max (lower bound - delta) / s.e. = %.3g", count, gz,
                hb)};
}

// --- 10: first order convergence on the deterministic envelopes
Outcome c10() {
    double lo = INFINITY, hi = 0.0;
    int count = 0;
    for (const auto& e : list_scenarios(GRBSDE_SCENARIO_DIR)) {
        if (e.kind != "deterministic_ode") continue;
        const auto rows = run_convergence(load_scenario(e.file), {10, 20, 40, 80});
        for (std::size_t k = 1; k < rows.size(); ++k) {
            const double r = rows[k - 1].y0_error / rows[k].y0_error;
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        ++count;
    }
    return {count > 0 && lo >= 1.5 && hi <= 3.0, fmt("%.0f scenarios, error ratios in [%.3f, %.3f]", count, lo, hi)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"C1  quadratic driver vs exponential transform", c1},
        {"C2  transform round trips", c2},
        {"C3  grad_G vs finite differences", c3},
        {"C4  envelope sandwich", c4},
        {"C5  Skorokhod and singularity", c5},
        {"C6  dK bounds", c6},
        {"C7  comparison", c7},
        {"C8  tree agreement", c8},
        {"C9  Gamma martingale and Holder bound", c9},
        {"C10 convergence order", c10},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        if (!o.passed) ++failed;
        std::printf("%s  %-46s %s\n", o.passed ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
