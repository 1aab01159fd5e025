#include "grbsde/scenario.hpp"

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "grbsde/envelope.hpp"
#include "grbsde/errors.hpp"
#include "grbsde/oracle.hpp"
#include "grbsde/regression.hpp"
#include "grbsde/solver.hpp"
#include "grbsde/transform.hpp"
#include "grbsde/tree.hpp"

namespace grbsde {

using nlohmann::json;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Reads numeric/string members of one JSON object and rejects members it never read.
class Params {
public:
    Params(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    double num(const std::string& key, double fallback) {
        used_.insert(key);
        if (!j_.contains(key)) return fallback;
        if (!j_[key].is_number()) throw ConfigError(where_ + "." + key + ": expected a number");
        return j_[key].get<double>();
    }
    double num(const std::string& key) {
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing '" + key + "'");
        return num(key, 0.0);
    }
    std::string str(const std::string& key, const std::string& fallback) {
        used_.insert(key);
        if (!j_.contains(key)) return fallback;
        if (!j_[key].is_string()) throw ConfigError(where_ + "." + key + ": expected a string");
        return j_[key].get<std::string>();
    }
    bool flag(const std::string& key, bool fallback) {
        used_.insert(key);
        if (!j_.contains(key)) return fallback;
        if (!j_[key].is_boolean()) throw ConfigError(where_ + "." + key + ": expected true/false");
        return j_[key].get<bool>();
    }
    const json& object(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing '" + key + "'");
        return j_[key];
    }
    bool has(const std::string& key) const { return j_.contains(key); }
    void skip(const std::string& key) { used_.insert(key); }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!used_.contains(key)) throw ConfigError(where_ + ": unknown member '" + key + "'");
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

double norm(std::span<const double> z) {
    double s = 0.0;
    for (const double v : z) s += v * v;
    return std::sqrt(s);
}

[[noreturn]] void unknown(const std::string& what, const std::string& kind) {
    throw ConfigError("unknown " + what + " family '" + kind + "'");
}

// ---------------------------------------------------------------- family builders

Driver make_driver(const json& j) {
    Params p(j, "driver");
    const std::string kind = p.str("kind", "zero");
    Driver f;
    if (kind == "zero") {
        f = [](const NodeState&, double, std::span<const double>) { return 0.0; };
    } else if (kind == "constant") {
        const double v = p.num("value");
        f = [v](const NodeState&, double, std::span<const double>) { return v; };
    } else if (kind == "linear") {
        const double a = p.num("y", 0.0), b = p.num("z", 0.0), c = p.num("c", 0.0);
        f = [a, b, c](const NodeState&, double y, std::span<const double> z) { return a * y + b * z[0] + c; };
    } else if (kind == "quadratic") {
        const double gamma = p.num("gamma");
        f = [gamma](const NodeState&, double, std::span<const double> z) {
            const double r = norm(z);
            return 0.5 * gamma * r * r;
        };
    } else if (kind == "growth") {
        // alpha phi(|y| v D) + C/2 psi(|y| v D) |z|^2 + R |z|
        const double alpha = p.num("alpha", 0.0), C = p.num("C", 0.0), R = p.num("R", 0.0);
        const double D = p.num("D", 1.0);
        const std::string phi = p.str("phi", "linear");
        const std::string psi = p.str("psi", "one");
        if (phi != "linear" && phi != "r_log_r") unknown("growth phi", phi);
        if (psi != "one" && psi != "identity") unknown("growth psi", psi);
        const bool xlogx = phi == "r_log_r";
        const bool psi_id = psi == "identity";
        f = [=](const NodeState&, double y, std::span<const double> z) {
            const double r = std::max(std::abs(y), D);
            const double phi_v = xlogx ? r * std::log(r) : r;
            const double psi_v = psi_id ? r : 1.0;
            const double zn = norm(z);
            return alpha * phi_v + 0.5 * C * psi_v * zn * zn + R * zn;
        };
    } else if (kind == "lipschitz_mix") {
        const double s = p.num("sin", 0.0), a = p.num("abs_z", 0.0), c = p.num("c", 0.0);
        f = [s, a, c](const NodeState&, double y, std::span<const double> z) {
            return s * std::sin(y) + a * norm(z) + c;
        };
    } else {
        unknown("driver", kind);
    }
    p.finish();
    return f;
}

DaDriver make_da_driver(const json& j) {
    Params p(j, "da_driver");
    const std::string kind = p.str("kind", "zero");
    DaDriver g;
    if (kind == "zero") {
        g = {};
    } else if (kind == "constant") {
        const double v = p.num("value");
        g = [v](const NodeState&, double) { return v; };
    } else if (kind == "linear") {
        const double a = p.num("y", 0.0), c = p.num("c", 0.0);
        g = [a, c](const NodeState&, double y) { return a * y + c; };
    } else {
        unknown("da_driver", kind);
    }
    p.finish();
    return g;
}

enum class Side { lower, upper };

Barrier make_barrier(const json& j, Side side) {
    Params p(j, side == Side::lower ? "lower" : "upper");
    const std::string kind = p.str("kind", "constant");
    const bool lower = side == Side::lower;
    Barrier bar;
    BarrierDecomposition dec;
    bool decomposable = true;
    // Lower: L = L0 + Vbar + int rho_bar ds + int chi_bar dB.
    // Upper: U = U0 - V - int rho ds + int chi dB.
    auto set_drift = [&](double drift) {
        const double rho = lower ? drift : -drift;
        dec.rho = [rho](const NodeState&) { return rho; };
    };
    if (kind == "constant") {
        const double v = p.num("value");
        bar.value = [v](const NodeState&) { return v; };
        bar.regression_feature = false;
    } else if (kind == "affine") {
        const double level = p.num("level", 0.0), drift = p.num("drift", 0.0), slope = p.num("slope", 0.0);
        bar.value = [=](const NodeState& ns) { return level + drift * ns.t + slope * ns.b[0]; };
        bar.regression_feature = false;
        set_drift(drift);
        dec.chi = [slope](const NodeState&, std::span<double> out) { out[0] = slope; };
    } else if (kind == "quadratic") {
        const double level = p.num("level", 0.0), drift = p.num("drift", 0.0), s = p.num("scale");
        bar.value = [=](const NodeState& ns) { return level + drift * ns.t + s * ns.b[0] * ns.b[0]; };
        set_drift(drift + s);
        dec.chi = [s](const NodeState& ns, std::span<double> out) { out[0] = 2.0 * s * ns.b[0]; };
    } else if (kind == "abs") {
        const double offset = p.num("offset", 0.0), s = p.num("scale", 1.0);
        bar.value = [=](const NodeState& ns) { return offset + s * std::abs(ns.b[0]); };
        decomposable = lower ? s >= 0.0 : s <= 0.0;  // the local-time term must enter with the right sign
        set_drift(0.0);
        dec.chi = [s](const NodeState& ns, std::span<double> out) {
            out[0] = ns.b[0] > 0.0 ? s : (ns.b[0] < 0.0 ? -s : 0.0);
        };
    } else if (kind == "put") {
        const double offset = p.num("offset", 0.0), s = p.num("scale", 1.0), k = p.num("strike", 0.0);
        bar.value = [=](const NodeState& ns) { return offset + s * std::max(k - ns.b[0], 0.0); };
        decomposable = lower ? s >= 0.0 : s <= 0.0;
        set_drift(0.0);
        dec.chi = [s, k](const NodeState& ns, std::span<double> out) { out[0] = ns.b[0] < k ? -s : 0.0; };
    } else {
        unknown("barrier", kind);
    }
    bar.regression_feature = p.flag("regression_feature", bar.regression_feature);
    p.finish();
    if (decomposable) bar.decomposition = dec;
    return bar;
}

StateFunction make_terminal(const json& j, const std::optional<Barrier>& lower,
                            const std::optional<Barrier>& upper = std::nullopt) {
    Params p(j, "terminal");
    const std::string kind = p.str("kind", "constant");
    std::function<double(double)> h;
    if (kind == "constant") {
        const double v = p.num("value");
        h = [v](double) { return v; };
    } else if (kind == "affine") {
        const double a = p.num("slope", 1.0), b = p.num("offset", 0.0);
        h = [a, b](double x) { return a * x + b; };
    } else if (kind == "abs") {
        const double s = p.num("scale", 1.0), c = p.num("offset", 0.0);
        h = [s, c](double x) { return s * std::abs(x) + c; };
    } else if (kind == "step") {
        const double height = p.num("height", 1.0), k = p.num("strike", 0.0);
        h = [height, k](double x) { return x > k ? height : 0.0; };
    } else if (kind == "call") {
        const double k = p.num("strike", 0.0), s = p.num("scale", 1.0);
        h = [k, s](double x) { return s * std::max(x - k, 0.0); };
    } else if (kind == "put") {
        const double k = p.num("strike", 0.0), s = p.num("scale", 1.0);
        h = [k, s](double x) { return s * std::max(k - x, 0.0); };
    } else if (kind == "exp") {
        const double s = p.num("scale", 1.0);
        h = [s](double x) { return std::exp(s * x); };
    } else {
        unknown("terminal", kind);
    }
    const bool floor = p.flag("floor_at_lower", false);
    const bool cap = p.flag("cap_at_upper", false);
    p.finish();
    if (floor && !lower) throw ConfigError("terminal.floor_at_lower needs a lower barrier");
    if (cap && !upper) throw ConfigError("terminal.cap_at_upper needs an upper barrier");
    const StateFunction l = floor ? lower->value : StateFunction{};
    const StateFunction u = cap ? upper->value : StateFunction{};
    return [h, l, u](const NodeState& ns) {
        double v = h(ns.b[0]);
        if (u) v = std::min(v, u(ns));
        if (l) v = std::max(v, l(ns));
        return v;
    };
}

ProcessSpec make_process(const json& j, const std::string& where) {
    if (j.is_number()) return ProcessSpec::constant(j.get<double>());
    Params p(j, where);
    const std::string kind = p.str("kind", "constant");
    ProcessSpec out;
    if (kind == "constant") out = ProcessSpec::constant(p.num("level", 0.0));
    else if (kind == "ramp") out = ProcessSpec::ramp(p.num("level", 0.0), p.num("slope", 0.0));
    else if (kind == "abs_brownian") out = ProcessSpec::abs_brownian(p.num("level", 0.0), p.num("slope", 0.0));
    else if (kind == "running_max_abs") out = ProcessSpec::running_max_abs(p.num("level", 0.0), p.num("slope", 0.0));
    else unknown("process", kind);
    p.finish();
    if (!out.nonnegative()) throw ConfigError(where + ": process must be nonnegative");
    return out;
}

ASpec make_aspec(const json& j) {
    Params p(j, "ensemble.A");
    const std::string kind = p.str("kind", "identity");
    ASpec a;
    if (kind == "identity") a = ASpec::identity();
    else if (kind == "ramp") a = ASpec::ramp(p.num("rate", 1.0));
    else if (kind == "step") a = ASpec::step(p.num("time", 0.5), p.num("height", 1.0));
    else if (kind == "running_max") a = ASpec::running_max();
    else if (kind == "abs_integral") a = ASpec::abs_integral();
    else unknown("A", kind);
    p.finish();
    return a;
}

Transform make_transform(const json& j) {
    Params p(j, "envelope.transform");
    const double D = p.num("D");
    Params phi(p.object("phi"), "envelope.transform.phi");
    const std::string pk = phi.str("kind", "linear");
    Phi ph = Phi::linear();
    if (pk == "constant") ph = Phi::constant(phi.num("k", 1.0));
    else if (pk == "linear") ph = Phi::linear();
    else if (pk == "r_log_r") ph = Phi::r_log_r();
    else if (pk == "exponential") ph = Phi::exponential();
    else unknown("phi", pk);
    phi.finish();
    const std::string sk = p.str("psi", "zero");
    Psi ps = Psi::zero();
    if (sk == "zero") ps = Psi::zero();
    else if (sk == "one") ps = Psi::one();
    else if (sk == "identity") ps = Psi::identity();
    else unknown("psi", sk);
    p.finish();
    Transform tf(D, ph, ps);
    tf.require_h();
    return tf;
}

ProblemSpec make_problem(const json& j, const std::string& where) {
    Params p(j, where);
    ProblemSpec spec;
    spec.f = make_driver(p.has("driver") ? p.object("driver") : json{{"kind", "zero"}});
    spec.g = make_da_driver(p.has("da_driver") ? p.object("da_driver") : json{{"kind", "zero"}});
    if (p.has("lower")) spec.lower = make_barrier(p.object("lower"), Side::lower);
    if (p.has("upper")) spec.upper = make_barrier(p.object("upper"), Side::upper);
    spec.terminal = make_terminal(p.object("terminal"), spec.lower, spec.upper);
    p.finish();
    return spec;
}

// Probes L <= U and L_T <= xi <= U_T on a (t, b) grid so that a crossing is
// reported before any simulation.
void probe_barriers(const ProblemSpec& spec, double T, const ASpec& a_spec) {
    if (!spec.lower && !spec.upper) return;
    const double span = 5.0 * std::sqrt(T);
    for (int it = 0; it <= 20; ++it) {
        const double t = T * it / 20.0;
        for (int ib = -50; ib <= 50; ++ib) {
            double b = span * ib / 50.0;
            const NodeState ns{t, 0, NodeState::npos, std::span<const double>(&b, 1),
                               a_spec.deterministic() ? 0.0 : 0.0};
            const double l = spec.lower ? spec.lower->value(ns) : -inf;
            const double u = spec.upper ? spec.upper->value(ns) : inf;
            if (l > u) {
                std::ostringstream msg;
                msg << "invariant L <= U violated at t = " << t << ", B = " << b << " (L = " << l << ", U = " << u << ")";
                throw ConfigError(msg.str());
            }
            if (it == 20) {
                const double xi = spec.terminal(ns);
                if (xi < l || xi > u) {
                    std::ostringstream msg;
                    msg << "invariant L_T <= xi <= U_T violated at B_T = " << b << " (xi = " << xi << ")";
                    throw ConfigError(msg.str());
                }
            }
        }
    }
}

std::optional<RegressionEstimator> make_estimator(const json& cfg, std::size_t d) {
    if (!cfg.contains("estimator")) return std::nullopt;
    Params p(cfg["estimator"], "estimator");
    const std::string basis = p.str("basis", "default");
    const double ridge = p.num("ridge", 1e-8);
    std::optional<RegressionEstimator> out;
    if (basis == "polynomial") {
        const auto degree = static_cast<int>(p.num("degree", 3.0));
        if (degree < 0) throw ConfigError("estimator.degree must be >= 0");
        std::vector<std::size_t> idx(d);
        for (std::size_t k = 0; k < d; ++k) idx[k] = k;
        out = polynomial_estimator(idx, degree, ridge);
    } else if (basis == "local") {
        const auto cells = static_cast<int>(p.num("cells", 20.0));
        const auto degree = static_cast<int>(p.num("degree", 2.0));
        std::vector<std::size_t> idx(d);
        for (std::size_t k = 0; k < d; ++k) idx[k] = k;
        out = local_estimator(idx, cells, degree, ridge);
    } else if (basis != "default") {
        unknown("estimator basis", basis);
    }
    p.finish();
    return out;
}

SolverOptions make_solver_options(const json& cfg, std::size_t threads) {
    SolverOptions opt;
    opt.threads = threads;
    if (cfg.contains("solver")) {
        Params p(cfg["solver"], "solver");
        opt.z_cap = p.num("z_cap", opt.z_cap);
        opt.corrector = p.flag("corrector", false);
        p.skip("penalties");
        p.finish();
    }
    return opt;
}

// ---------------------------------------------------------------- shared run state

struct RunContext {
    const Scenario& sc;
    TimeMesh mesh;
    std::uint64_t seed;
    std::size_t threads;
    std::optional<RegressionEstimator> estimator;
    SolverOptions solver;
};

PathEnsemble simulate(const RunContext& ctx, std::uint64_t seed) {
    return simulate_paths(ctx.mesh, ctx.sc.n_paths, ctx.sc.dim, seed, ctx.sc.a_spec, ctx.threads);
}

json diagnostics_json(const SolverDiagnostics& d) {
    return {{"skorokhod_lower", d.skorokhod_lower},   {"skorokhod_upper", d.skorokhod_upper},
            {"singularity", d.singularity},           {"z_cap_breaches", d.z_cap_breaches},
            {"max_condition", d.max_condition},       {"rank_deficient_slices", d.rank_deficient_slices}};
}

double barrier_violation(const SolutionPanel& s) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < s.Y.cols(); ++j) {
        for (Eigen::Index p = 0; p < s.Y.rows(); ++p) {
            worst = std::max({worst, s.L(p, j) - s.Y(p, j), s.Y(p, j) - s.U(p, j)});
        }
    }
    return worst;
}

void add_common(ScenarioReport& rep, const SolutionPanel& s) {
    rep.metrics.emplace_back("skorokhod", std::max(s.diagnostics.skorokhod_lower, s.diagnostics.skorokhod_upper));
    rep.metrics.emplace_back("singularity", s.diagnostics.singularity);
    rep.metrics.emplace_back("z_cap_breaches", static_cast<double>(s.diagnostics.z_cap_breaches));
    rep.diagnostics["solver"] = diagnostics_json(s.diagnostics);
    rep.y0 = s.y0();
    rep.y0_standard_error = s.continuation_se.col(0).mean();
    rep.skorokhod_residual = std::max(s.diagnostics.skorokhod_lower, s.diagnostics.skorokhod_upper);
}

bool wants(const Scenario& sc, const std::string& check) {
    return std::any_of(sc.checks.begin(), sc.checks.end(), [&](const CheckSpec& c) { return c.name == check; });
}

void add_dk_bounds(ScenarioReport& rep, const RunContext& ctx, const SolutionPanel& s, const ProblemSpec& spec,
                   const PathEnsemble& ens) {
    if (!wants(ctx.sc, "dk_bound_excess") && !wants(ctx.sc, "dk_bound_violations")) return;
    const DkBoundReport dk = check_dk_bounds(s, spec, ctx.mesh, ens);
    rep.metrics.emplace_back("dk_bound_excess", std::max(dk.max_excess_lower, dk.max_excess_upper));
    rep.metrics.emplace_back("dk_bound_violations", static_cast<double>(dk.violations));
    rep.diagnostics["dk_bounds"] = {{"max_excess_lower", dk.max_excess_lower},
                                    {"max_excess_upper", dk.max_excess_upper},
                                    {"step_violations", dk.violations},
                                    {"path_exceedances", dk.path_exceedances},
                                    {"checked", dk.checked}};
    double worst = -inf;
    for (const auto& st : dk.steps) {
        if (st.mean_se > 0.0) worst = std::max(worst, st.mean_excess / st.mean_se);
    }
    if (std::isfinite(worst)) rep.diagnostics["dk_bounds"]["max_step_excess_in_se"] = worst;
}

std::vector<double> a_levels(const Scenario& sc, std::size_t n_tree) {
    if (!sc.a_spec.deterministic()) throw ConfigError("tree oracle needs a deterministic A");
    const Eigen::VectorXd a = deterministic_a_path(make_mesh(sc.T, n_tree), sc.a_spec);
    return {a.data(), a.data() + a.size()};
}

// ---------------------------------------------------------------- kinds

void run_gbsde_kind(const RunContext& ctx, ScenarioReport& rep) {
    const json& cfg = ctx.sc.config;
    const ProblemSpec spec = make_problem(cfg["problem"], "problem");
    const PathEnsemble ens = simulate(ctx, ctx.seed);
    SolutionPanel s = solve_gbsde(spec, ctx.mesh, ens, ctx.estimator, ctx.solver);
    add_common(rep, s);

    const json& oracle = cfg["oracle"];
    const std::string okind = oracle.value("kind", "none");
    if (okind == "cole_hopf") {
        const json& term = cfg["problem"]["terminal"];
        const std::string tk = term.value("kind", "constant");
        ColeHopfTerminal xi;
        if (tk == "affine") xi = ColeHopfTerminal::affine(term.value("slope", 1.0), term.value("offset", 0.0));
        else if (tk == "step") xi = ColeHopfTerminal::step(term.value("height", 1.0), term.value("strike", 0.0));
        else throw ConfigError("Cole-Hopf oracle supports affine and step terminals only");
        const OracleResult ref = cole_hopf_exact(oracle.at("gamma").get<double>(), xi, ctx.mesh, ens);
        double worst = 0.0;
        for (Eigen::Index j = 0; j < s.Y.cols(); ++j) {
            worst = std::max(worst, (s.Y.col(j) - ref.Y.col(j)).cwiseAbs().mean());
        }
        const Eigen::Index N = s.Y.cols() - 1;
        const double z_mean = s.Z[0].leftCols(N).mean();
        const double z_ref = ref.Z[0].leftCols(N).mean();
        rep.metrics.emplace_back("max_mean_abs_error", worst);
        rep.metrics.emplace_back("z_mean_error", std::abs(z_mean - z_ref));
        rep.y0_reference = ref.Y.col(0).mean();
        rep.metrics.emplace_back("y0_error", std::abs(rep.y0 - *rep.y0_reference));
        rep.diagnostics["oracle"] = {{"provenance", ref.provenance}, {"y0", *rep.y0_reference}, {"z_mean", z_mean}};
    }
    rep.mesh = ctx.mesh;
    rep.panel = std::move(s);
}

void run_reflected_kind(const RunContext& ctx, ScenarioReport& rep) {
    const json& cfg = ctx.sc.config;
    const ProblemSpec spec = make_problem(cfg["problem"], "problem");
    const PathEnsemble ens = simulate(ctx, ctx.seed);
    SolutionPanel s = ctx.sc.kind == ScenarioKind::two_barrier
                          ? solve_grbsde_two_barriers(spec, ctx.mesh, ens, ctx.estimator, ctx.solver)
                          : solve_grbsde_one_barrier(spec, ctx.mesh, ens, ctx.estimator, ctx.solver);
    add_common(rep, s);
    rep.metrics.emplace_back("barrier_violation", barrier_violation(s));
    add_dk_bounds(rep, ctx, s, spec, ens);

    const json& oracle = cfg["oracle"];
    if (oracle.value("kind", "none") == "tree") {
        const auto n_tree = oracle.value("n_steps", std::size_t{16});
        const TreeResult tree = tree_dp_reflected(spec, binomial_tree(ctx.sc.T, n_tree, ctx.sc.dim),
                                                  a_levels(ctx.sc, n_tree));
        rep.y0_reference = tree.y0;
        rep.metrics.emplace_back("y0_tree_error", std::abs(rep.y0 - tree.y0));
        rep.metrics.emplace_back("y0_error", std::abs(rep.y0 - tree.y0));
        rep.diagnostics["oracle"] = {{"provenance", tree.provenance},
                                     {"y0", tree.y0},
                                     {"expected_k_plus", tree.expected_k_plus},
                                     {"expected_k_minus", tree.expected_k_minus}};
    }
    rep.diagnostics["k_plus_total_mean"] = s.dK_plus.rowwise().sum().mean();
    rep.diagnostics["k_minus_total_mean"] = s.dK_minus.rowwise().sum().mean();
    rep.mesh = ctx.mesh;
    rep.panel = std::move(s);
}

void run_penalized_kind(const RunContext& ctx, ScenarioReport& rep) {
    const json& cfg = ctx.sc.config;
    const ProblemSpec spec = make_problem(cfg["problem"], "problem");
    const PathEnsemble ens = simulate(ctx, ctx.seed);
    std::vector<double> penalties = cfg.at("solver").at("penalties").get<std::vector<double>>();
    std::sort(penalties.begin(), penalties.end());
    const SolutionPanel proj = spec.upper ? solve_grbsde_two_barriers(spec, ctx.mesh, ens, ctx.estimator, ctx.solver)
                                          : solve_grbsde_one_barrier(spec, ctx.mesh, ens, ctx.estimator, ctx.solver);
    std::vector<double> y0s;
    std::vector<double> skor;
    std::optional<SolutionPanel> last;
    json sweep = json::array();
    for (const double pen : penalties) {
        SolutionPanel s = solve_penalized(spec, ctx.mesh, ens, pen, ctx.estimator, ctx.solver);
        y0s.push_back(s.y0());
        skor.push_back(std::max(s.diagnostics.skorokhod_lower, s.diagnostics.skorokhod_upper));
        sweep.push_back({{"penalty", pen}, {"y0", y0s.back()}, {"skorokhod", skor.back()}});
        last = std::move(s);
    }
    std::size_t y_breaks = 0;
    std::size_t s_breaks = 0;
    const double dir = spec.lower ? 1.0 : -1.0;  // Y0 rises toward the projection from below at L
    for (std::size_t k = 1; k < y0s.size(); ++k) {
        if (dir * (y0s[k] - y0s[k - 1]) < -1e-12) ++y_breaks;
        if (skor[k] > skor[k - 1] + 1e-15) ++s_breaks;
    }
    add_common(rep, *last);
    rep.metrics.emplace_back("penalty_gap", std::abs(y0s.back() - proj.y0()));
    rep.metrics.emplace_back("penalty_nonmonotone", static_cast<double>(y_breaks));
    rep.metrics.emplace_back("skorokhod_nonmonotone", static_cast<double>(s_breaks));
    rep.y0_reference = proj.y0();
    rep.diagnostics["projection_y0"] = proj.y0();
    rep.diagnostics["sweep"] = sweep;
    rep.mesh = ctx.mesh;
    rep.panel = std::move(last);
}

void run_comparison_kind(const RunContext& ctx, ScenarioReport& rep, const RunOptions& options) {
    const json& cfg = ctx.sc.config;
    const ProblemSpec a = make_problem(cfg["problem"], "problem");
    const ProblemSpec b = make_problem(cfg["problem_b"], "problem_b");
    std::vector<std::uint64_t> seeds;
    if (options.seed) seeds.push_back(*options.seed);
    else if (cfg.contains("seeds")) seeds = cfg["seeds"].get<std::vector<std::uint64_t>>();
    else seeds.push_back(ctx.sc.seed);

    auto solve = [&](const ProblemSpec& spec, const PathEnsemble& ens) {
        if (spec.lower && spec.upper) return solve_grbsde_two_barriers(spec, ctx.mesh, ens, ctx.estimator, ctx.solver);
        if (spec.lower) return solve_grbsde_one_barrier(spec, ctx.mesh, ens, ctx.estimator, ctx.solver);
        return solve_gbsde(spec, ctx.mesh, ens, ctx.estimator, ctx.solver);
    };
    std::size_t violations = 0;
    double max_excess = -inf;
    json per_seed = json::array();
    std::optional<SolutionPanel> first;
    for (const auto seed : seeds) {
        const PathEnsemble ens = simulate(ctx, seed);
        SolutionPanel sa = solve(a, ens);
        const SolutionPanel sb = solve(b, ens);
        const ComparisonReport cr = compare_solutions(sa, sb);
        violations += cr.violations;
        max_excess = std::max(max_excess, cr.max_excess);
        per_seed.push_back({{"seed", seed}, {"violations", cr.violations}, {"max_excess", cr.max_excess}});
        if (!first) first = std::move(sa);
    }
    add_common(rep, *first);
    rep.metrics.emplace_back("comparison_violations", static_cast<double>(violations));
    rep.diagnostics["seeds"] = per_seed;
    rep.diagnostics["max_excess"] = max_excess;
    rep.mesh = ctx.mesh;
    rep.panel = std::move(first);
}

struct EnvelopeConfig {
    UnboundedFamily family;
    EnvelopeSpec spec;
    std::string conditional = "gaussian";
    double tol = 1e-6;
};

EnvelopeConfig make_unbounded_envelope(const json& j) {
    Params p(j, "envelope");
    const std::string fam = p.str("family", "linear_psi1");
    const double D = p.num("D", 1.0);
    const double m = p.num("m", 1.0);
    EnvelopeConfig out{UnboundedFamily::from_name(fam, D, m), EnvelopeSpec{UnboundedFamily::from_name(fam, D, m).transform()}};
    out.spec.alpha = make_process(p.has("alpha") ? p.object("alpha") : json(0.0), "envelope.alpha");
    out.spec.beta = make_process(p.has("beta") ? p.object("beta") : json(0.0), "envelope.beta");
    if (out.family.kind == UnboundedFamily::Kind::linear_psi1) {
        out.spec.C = make_process(p.has("C") ? p.object("C") : json(0.0), "envelope.C");
    } else {
        out.spec.C = ProcessSpec::constant(m);
    }
    out.conditional = p.str("conditional", "gaussian");
    if (out.conditional != "gaussian" && out.conditional != "regression") unknown("conditional expectation", out.conditional);
    out.tol = p.num("sandwich_tol", 1e-6);
    p.finish();
    out.spec.validate();
    return out;
}

bool deterministic_process(const ProcessSpec& p) {
    return p.kind == ProcessSpec::Kind::constant || p.kind == ProcessSpec::Kind::ramp;
}

void run_sandwich_kind(const RunContext& ctx, ScenarioReport& rep) {
    const json& cfg = ctx.sc.config;
    const EnvelopeConfig env = make_unbounded_envelope(cfg["envelope"]);
    const ProblemSpec spec = make_problem(cfg["problem"], "problem");
    if (!spec.lower || spec.upper) throw ConfigError("envelope_sandwich needs exactly a lower barrier");
    const PathEnsemble ens = simulate(ctx, ctx.seed);
    const TimeMesh& mesh = ctx.mesh;
    const auto n = static_cast<Eigen::Index>(ens.n_paths);
    const auto N = static_cast<Eigen::Index>(mesh.n_steps());
    const Transform& tf = env.spec.transform;
    const double D = env.family.D;

    SolutionPanel y = solve_grbsde_one_barrier(spec, mesh, ens, ctx.estimator, ctx.solver);
    const Panel eta = env.spec.eta_path(mesh, ens);
    const Panel C = env.spec.C.materialize(mesh, ens);

    // Lambda = xi v sup L v D and Lambda_bar = F(H^{-1}(H(Lambda) + eta_T), C_T) per path.
    Eigen::VectorXd lam_bar(n);
    for (Eigen::Index p = 0; p < n; ++p) {
        const double lam = std::max({y.Y(p, N), y.L.row(p).maxCoeff(), D});
        lam_bar(p) = lambda_bar(lam, eta(p, N), C(p, N), tf);
    }

    Panel cond(n, N + 1);
    cond.col(N) = lam_bar;
    if (env.conditional == "gaussian") {
        if (!ctx.sc.a_spec.deterministic() || !deterministic_process(env.spec.alpha) ||
            !deterministic_process(env.spec.beta) || !deterministic_process(env.spec.C)) {
            throw ConfigError("gaussian conditional expectation needs deterministic A, alpha, beta and C");
        }
        if (y.L.maxCoeff() > D) throw ConfigError("gaussian conditional expectation needs L <= D on every path");
        const double etaT = eta(0, N);
        const double CT = C(0, N);
        const double aT = ens.A(0, N);
        const double T = mesh.horizon();
        auto lam_of_b = [&](double b) {
            const NodeState ns{T, static_cast<std::size_t>(N), NodeState::npos, std::span<const double>(&b, 1), aT};
            return lambda_bar(std::max(spec.terminal(ns), D), etaT, CT, tf);
        };
        constexpr int grid = 257;
        for (Eigen::Index j = 0; j < N; ++j) {
            const double tau = T - mesh.time(static_cast<std::size_t>(j));
            const double lo = ens.B[0].col(j).minCoeff();
            const double hi = ens.B[0].col(j).maxCoeff();
            if (hi - lo < 1e-12) {
                cond.col(j).setConstant(gaussian_conditional_expectation(lam_of_b, 0.5 * (lo + hi), tau));
                continue;
            }
            const double h = (hi - lo) / (grid - 1);
            std::vector<double> v(grid);
            for (int k = 0; k < grid; ++k) v[static_cast<std::size_t>(k)] = gaussian_conditional_expectation(lam_of_b, lo + h * k, tau);
            const boost::math::interpolators::cardinal_cubic_b_spline<double> spline(v.begin(), v.end(), lo, h);
            for (Eigen::Index p = 0; p < n; ++p) cond(p, j) = std::max(0.0, spline(ens.B[0](p, j)));
        }
    } else {
        const RegressionEstimator est = default_estimator(ProblemSpec{}, ens);
        Eigen::MatrixXd states(n, static_cast<Eigen::Index>(regression_state_size(ens.dim)));
        states.setZero();
        for (Eigen::Index j = 0; j < N; ++j) {
            for (std::size_t k = 0; k < ens.dim; ++k) states.col(static_cast<Eigen::Index>(k)) = ens.B[k].col(j);
            states.col(static_cast<Eigen::Index>(ens.dim)) = ens.A.col(j);
            cond.col(j) = conditional_expectation(est, states, lam_bar).cwiseMax(0.0);
        }
    }

    const Panel x = unbounded_envelope(env.family, cond, C, eta);

    std::size_t violating_paths = 0;
    double worst_upper = -inf;
    double worst_lower = -inf;
    json worst_at;
    for (Eigen::Index p = 0; p < n; ++p) {
        bool bad = false;
        for (Eigen::Index j = 0; j <= N; ++j) {
            const double up = y.Y(p, j) - x(p, j) - 3.0 * y.continuation_se(p, j);
            const double dn = y.L(p, j) - y.Y(p, j);
            if (up > worst_upper) {
                worst_at = {{"node", j}, {"path", p}, {"Y", y.Y(p, j)}, {"x", x(p, j)},
                            {"se", y.continuation_se(p, j)}, {"B", ens.B[0](p, j)}};
            }
            worst_upper = std::max(worst_upper, up);
            worst_lower = std::max(worst_lower, dn);
            if (up > env.tol || dn > env.tol) bad = true;
        }
        if (bad) ++violating_paths;
    }

    // Solve again with the envelope as an upper barrier: it should never bind.
    ProblemSpec capped = spec;
    capped.upper = Barrier{[&x](const NodeState& ns) {
                               return x(static_cast<Eigen::Index>(ns.path), static_cast<Eigen::Index>(ns.step));
                           },
                           std::nullopt, true};
    const SolutionPanel yc = solve_grbsde_two_barriers(capped, mesh, ens, ctx.estimator, ctx.solver);
    const double dk_minus_total = yc.dK_minus.rowwise().sum().mean();

    add_common(rep, y);
    rep.metrics.emplace_back("sandwich_violations", static_cast<double>(violating_paths));
    rep.metrics.emplace_back("dk_minus_total", dk_minus_total);
    rep.metrics.emplace_back("barrier_violation", barrier_violation(y));
    rep.diagnostics["envelope"] = {{"family", env.family.name()},
                                   {"x0_mean", x.col(0).mean()},
                                   {"max_excess_over_envelope", worst_upper},
                                   {"max_excess_below_lower", worst_lower},
                                   {"worst_upper_node", worst_at},
                                   {"conditional", env.conditional},
                                   {"dk_minus_paths", (yc.dK_minus.rowwise().sum().array() > 0.0).count()}};
    rep.mesh = mesh;
    rep.panel = std::move(y);
}

struct OdeConfig {
    Transform transform;
    double a;
    EnvelopeSpec spec;
};

OdeConfig make_ode_envelope(const json& j) {
    Params p(j, "envelope");
    Transform tf = make_transform(p.object("transform"));
    const double a = p.num("a");
    EnvelopeSpec spec{tf};
    spec.alpha = make_process(p.has("alpha") ? p.object("alpha") : json(0.0), "envelope.alpha");
    spec.beta = make_process(p.has("beta") ? p.object("beta") : json(0.0), "envelope.beta");
    p.finish();
    spec.validate();
    if (!deterministic_process(spec.alpha) || !deterministic_process(spec.beta)) {
        throw ConfigError("deterministic_ode needs deterministic alpha and beta");
    }
    if (!(a >= 0.0) || a >= tf.h_mass()) throw ConfigError("envelope.a must lie in [0, int_D^inf dr/phi)");
    return {tf, a, spec};
}

void run_ode_kind(const RunContext& ctx, ScenarioReport& rep) {
    const OdeConfig env = make_ode_envelope(ctx.sc.config["envelope"]);
    if (!ctx.sc.a_spec.deterministic()) throw ConfigError("deterministic_ode needs a deterministic A");
    const PathEnsemble ens = simulate(ctx, ctx.seed);
    const Panel eta = env.spec.eta_path(ctx.mesh, ens);
    const Eigen::VectorXd eta_row = eta.row(0).transpose();
    if (eta_row(eta_row.size() - 1) > env.a) throw ConfigError("eta_T exceeds a: the envelope leaves [D, inf)");

    const Eigen::VectorXd x = bounded_envelope(env.transform, env.a, eta_row);
    const Eigen::VectorXd ode = deterministic_ode_solution(env.transform, env.a, eta_row);

    const Panel alpha = env.spec.alpha.materialize(ctx.mesh, ens);
    const Panel beta = env.spec.beta.materialize(ctx.mesh, ens);
    const Transform& tf = env.transform;
    ProblemSpec spec;
    spec.f = [&alpha, &tf](const NodeState& ns, double y, std::span<const double>) {
        return alpha(static_cast<Eigen::Index>(ns.path), static_cast<Eigen::Index>(ns.step)) * tf.phi()(y);
    };
    spec.g = [&beta, &tf](const NodeState& ns, double y) {
        return beta(static_cast<Eigen::Index>(ns.path), static_cast<Eigen::Index>(ns.step)) * tf.phi()(y);
    };
    const double xT = x(x.size() - 1);
    spec.terminal = [xT](const NodeState&) { return xT; };
    SolutionPanel s = solve_gbsde(spec, ctx.mesh, ens, ctx.estimator, ctx.solver);

    add_common(rep, s);
    // Reference: H^{-1}(a - eta_0) with eta_0 = 0, independent of the mesh.
    rep.y0_reference = eval_H_inv(env.a, tf);
    rep.metrics.emplace_back("ode_agreement", (x - ode).cwiseAbs().maxCoeff());
    rep.metrics.emplace_back("y0_error", std::abs(rep.y0 - *rep.y0_reference));
    rep.metrics.emplace_back("envelope_residual", envelope_identity_residual(tf, x, eta_row));
    rep.diagnostics["envelope"] = {{"x0", x(0)}, {"xT", xT}, {"eta_T", eta_row(eta_row.size() - 1)}};
    rep.mesh = ctx.mesh;
    rep.panel = std::move(s);
}

void run_sup_gamma_kind(const RunContext& ctx, ScenarioReport& rep) {
    const json& cfg = ctx.sc.config;
    Params p(cfg["sup_gamma"], "sup_gamma");
    const PathEnsemble ens = simulate(ctx, ctx.seed);
    const auto n = static_cast<Eigen::Index>(ens.n_paths);
    const auto N = static_cast<Eigen::Index>(ctx.mesh.n_steps());
    const ProcessSpec R_spec = make_process(p.has("R") ? p.object("R") : json(0.0), "sup_gamma.R");
    const Panel R = R_spec.materialize(ctx.mesh, ens);

    // Lambda_bar: e^{scale B_T}, or (Lambda e^{eta_T} - D) with Lambda = xi v D (phi = x, psi = 0).
    Params lb(p.object("lambda_bar"), "sup_gamma.lambda_bar");
    const std::string lk = lb.str("kind", "exp_brownian");
    Eigen::VectorXd lam(n);
    if (lk == "exp_brownian") {
        const double s = lb.num("scale", 1.0);
        lam = (s * ens.B[0].col(N)).array().exp().matrix();
    } else if (lk == "linear_psi0") {
        const double D = lb.num("D", 1.0);
        const double eta_T = lb.num("eta_T", 0.0);
        const StateFunction xi = make_terminal(lb.object("terminal"), std::nullopt);
        std::vector<double> b(ens.dim);
        for (Eigen::Index q = 0; q < n; ++q) {
            for (std::size_t k = 0; k < ens.dim; ++k) b[k] = ens.B[k](q, N);
            const NodeState ns{ctx.mesh.horizon(), static_cast<std::size_t>(N), static_cast<std::size_t>(q), b, ens.A(q, N)};
            lam(q) = std::max(xi(ns), D) * std::exp(eta_T) - D;
        }
    } else {
        unknown("lambda_bar", lk);
    }
    lb.finish();

    std::vector<double> q_grid{1.5, 2.0, 3.0, 4.0};
    if (p.has("q_grid")) q_grid = p.object("q_grid").get<std::vector<double>>();
    const double n_cap = p.num("n_cap", inf);
    const bool use_feedback = p.flag("feedback", true);
    p.finish();

    PiFamily family = constant_pi_family(ens.dim, n, N + 1);
    std::optional<PilotResult> pilot;
    if (use_feedback) {
        pilot = pilot_feedback(lam, R, ctx.mesh, ens);
        family.push_back(pilot->pi);
    }
    const SupGammaResult sup = estimate_sup_gamma(lam, R, family, ctx.mesh, ens);
    const MeanEstimate delta = delta_bound_min(lam, R, q_grid, n_cap, ctx.mesh);

    double worst_z = 0.0;
    for (std::size_t k = 1; k < 1 + 2 * ens.dim; ++k) {
        const MeanEstimate g = gamma_mean(R, family[k], ctx.mesh, ens);
        worst_z = std::max(worst_z, g.standard_error > 0.0 ? std::abs(g.value - 1.0) / g.standard_error : 0.0);
    }
    const double holder = delta.standard_error > 0.0 ? (sup.lower_bound - delta.value) / delta.standard_error
                                                     : (sup.lower_bound > delta.value ? inf : -inf);
    rep.metrics.emplace_back("gamma_martingale", worst_z);
    rep.metrics.emplace_back("holder_bound", holder);
    rep.y0 = sup.best;
    rep.y0_standard_error = sup.standard_errors[sup.argmax];
    rep.diagnostics["sup_gamma"] = {{"means", sup.means},
                                    {"standard_errors", sup.standard_errors},
                                    {"argmax", sup.argmax},
                                    {"lower_bound", sup.lower_bound},
                                    {"delta_bound", delta.value},
                                    {"delta_standard_error", delta.standard_error},
                                    {"pilot_y0", pilot ? pilot->y0 : std::numeric_limits<double>::quiet_NaN()}};
}

}  // namespace

// ---------------------------------------------------------------- public API

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::gbsde: return "gbsde";
        case ScenarioKind::reflected: return "reflected";
        case ScenarioKind::two_barrier: return "two_barrier";
        case ScenarioKind::penalized: return "penalized";
        case ScenarioKind::comparison: return "comparison";
        case ScenarioKind::envelope_sandwich: return "envelope_sandwich";
        case ScenarioKind::deterministic_ode: return "deterministic_ode";
        case ScenarioKind::sup_gamma: return "sup_gamma";
    }
    return "?";
}

ScenarioKind scenario_kind_from(const std::string& name) {
    for (const auto k : {ScenarioKind::gbsde, ScenarioKind::reflected, ScenarioKind::two_barrier,
                         ScenarioKind::penalized, ScenarioKind::comparison, ScenarioKind::envelope_sandwich,
                         ScenarioKind::deterministic_ode, ScenarioKind::sup_gamma}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown scenario kind '" + name + "'");
}

std::vector<std::string> known_checks(ScenarioKind kind) {
    const std::vector<std::string> common{"skorokhod", "singularity", "z_cap_breaches"};
    std::vector<std::string> extra;
    switch (kind) {
        case ScenarioKind::gbsde: extra = {"max_mean_abs_error", "z_mean_error", "y0_error"}; break;
        case ScenarioKind::reflected:
        case ScenarioKind::two_barrier:
            extra = {"barrier_violation", "dk_bound_excess", "dk_bound_violations", "y0_tree_error", "y0_error"};
            break;
        case ScenarioKind::penalized: extra = {"penalty_gap", "penalty_nonmonotone", "skorokhod_nonmonotone"}; break;
        case ScenarioKind::comparison: extra = {"comparison_violations"}; break;
        case ScenarioKind::envelope_sandwich:
            extra = {"sandwich_violations", "dk_minus_total", "barrier_violation"};
            break;
        case ScenarioKind::deterministic_ode: extra = {"ode_agreement", "y0_error", "envelope_residual"}; break;
        case ScenarioKind::sup_gamma: return {"gamma_martingale", "holder_bound"};
    }
    extra.insert(extra.end(), common.begin(), common.end());
    return extra;
}

Scenario parse_scenario(const json& config) {
    Params top(config, "scenario");
    Scenario sc;
    sc.name = top.str("name", "");
    if (sc.name.empty()) throw ConfigError("scenario: missing 'name'");
    sc.description = top.str("description", "");
    sc.kind = scenario_kind_from(top.str("kind", "gbsde"));

    Params mesh(top.object("mesh"), "mesh");
    sc.T = mesh.num("T", 1.0);
    const double steps = mesh.num("n_steps", 10.0);
    mesh.finish();
    if (!(sc.T > 0.0) || !std::isfinite(sc.T)) throw ConfigError("mesh.T must be positive");
    if (!(steps >= 1.0) || steps != std::floor(steps)) throw ConfigError("mesh.n_steps must be a positive integer");
    sc.n_steps = static_cast<std::size_t>(steps);

    Params ensemble(top.object("ensemble"), "ensemble");
    const double paths = ensemble.num("n_paths", 1000.0);
    const double seed = ensemble.num("seed", 1.0);
    const double d = ensemble.num("d", 1.0);
    if (ensemble.has("A")) sc.a_spec = make_aspec(ensemble.object("A"));
    ensemble.finish();
    if (!(paths >= 2.0) || paths != std::floor(paths)) throw ConfigError("ensemble.n_paths must be an integer >= 2");
    if (!(seed >= 0.0) || seed != std::floor(seed)) throw ConfigError("ensemble.seed must be a nonnegative integer");
    if (!(d >= 1.0) || d != std::floor(d)) throw ConfigError("ensemble.d must be a positive integer");
    sc.n_paths = static_cast<std::size_t>(paths);
    sc.seed = static_cast<std::uint64_t>(seed);
    sc.dim = static_cast<std::size_t>(d);

    sc.panel_paths = static_cast<std::size_t>(top.num("panel_paths", 100.0));

    // Family sections: build once here so every identifier is checked up front.
    for (const char* key : {"problem", "problem_b", "envelope", "oracle", "estimator", "solver", "sup_gamma", "seeds",
                            "outputs"}) {
        top.skip(key);
    }
    const std::string kind = to_string(sc.kind);
    auto need = [&](const char* key) {
        if (!config.contains(key)) throw ConfigError(kind + " scenario needs a '" + key + "' section");
    };
    if (config.contains("problem")) {
        const ProblemSpec spec = make_problem(config["problem"], "problem");
        probe_barriers(spec, sc.T, sc.a_spec);
    }
    if (config.contains("problem_b")) probe_barriers(make_problem(config["problem_b"], "problem_b"), sc.T, sc.a_spec);
    (void)make_estimator(config, sc.dim);
    (void)make_solver_options(config, 1);
    switch (sc.kind) {
        case ScenarioKind::gbsde:
        case ScenarioKind::reflected:
        case ScenarioKind::two_barrier:
        case ScenarioKind::penalized: need("problem"); break;
        case ScenarioKind::comparison:
            need("problem");
            need("problem_b");
            break;
        case ScenarioKind::envelope_sandwich:
            need("problem");
            need("envelope");
            (void)make_unbounded_envelope(config["envelope"]);
            break;
        case ScenarioKind::deterministic_ode:
            need("envelope");
            (void)make_ode_envelope(config["envelope"]);
            break;
        case ScenarioKind::sup_gamma: need("sup_gamma"); break;
    }
    if (sc.kind == ScenarioKind::penalized &&
        !(config.contains("solver") && config["solver"].contains("penalties") && config["solver"]["penalties"].is_array() &&
          !config["solver"]["penalties"].empty())) {
        throw ConfigError("penalized scenario needs solver.penalties");
    }
    if (config.contains("oracle")) {
        Params o(config["oracle"], "oracle");
        const std::string ok = o.str("kind", "none");
        if (ok == "cole_hopf") {
            if (o.num("gamma") <= 0.0) throw ConfigError("oracle.gamma must be positive");
        } else if (ok == "tree") {
            const double nt = o.num("n_steps", 16.0);
            if (!(nt >= 1.0 && nt <= 20.0)) throw ConfigError("oracle.n_steps must lie in [1, 20]");
            if (sc.dim != 1) throw ConfigError("tree oracle needs d = 1");
        } else if (ok != "none") {
            unknown("oracle", ok);
        }
        o.finish();
    }

    const auto allowed = known_checks(sc.kind);
    if (config.contains("checks")) {
        for (const auto& c : top.object("checks")) {
            Params cp(c, "checks[]");
            CheckSpec spec{cp.str("name", ""), cp.num("tolerance")};
            cp.finish();
            if (std::find(allowed.begin(), allowed.end(), spec.name) == allowed.end()) {
                throw ConfigError("check '" + spec.name + "' is not available for " + kind + " scenarios");
            }
            sc.checks.push_back(spec);
        }
    }
    top.skip("checks");
    top.finish();
    sc.config = config;
    if (!sc.config.contains("oracle")) sc.config["oracle"] = {{"kind", "none"}};
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_scenario(j);
}

bool ScenarioReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

double ScenarioReport::metric(const std::string& name) const {
    for (const auto& [k, v] : metrics) {
        if (k == name) return v;
    }
    throw ConfigError("metric '" + name + "' was not computed");
}

ScenarioReport run_scenario(const Scenario& sc, const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    RunContext ctx{sc,
                   make_mesh(sc.T, options.n_steps.value_or(sc.n_steps)),
                   options.seed.value_or(sc.seed),
                   std::max<std::size_t>(1, options.threads),
                   make_estimator(sc.config, sc.dim),
                   make_solver_options(sc.config, options.threads)};
    ScenarioReport rep;
    rep.name = sc.name;
    rep.kind = sc.kind;
    rep.seed = ctx.seed;
    rep.n_steps = ctx.mesh.n_steps();
    rep.n_paths = sc.n_paths;

    switch (sc.kind) {
        case ScenarioKind::gbsde: run_gbsde_kind(ctx, rep); break;
        case ScenarioKind::reflected:
        case ScenarioKind::two_barrier: run_reflected_kind(ctx, rep); break;
        case ScenarioKind::penalized: run_penalized_kind(ctx, rep); break;
        case ScenarioKind::comparison: run_comparison_kind(ctx, rep, options); break;
        case ScenarioKind::envelope_sandwich: run_sandwich_kind(ctx, rep); break;
        case ScenarioKind::deterministic_ode: run_ode_kind(ctx, rep); break;
        case ScenarioKind::sup_gamma: run_sup_gamma_kind(ctx, rep); break;
    }

    for (const CheckSpec& c : sc.checks) {
        const double v = rep.metric(c.name);
        rep.checks.push_back({c.name, v <= c.tolerance, v, c.tolerance});
    }
    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

json report_to_json(const ScenarioReport& rep) {
    json checks = json::array();
    for (const auto& c : rep.checks) {
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"tolerance", c.tolerance}});
    }
    json metrics = json::object();
    for (const auto& [k, v] : rep.metrics) metrics[k] = v;
    json diag = rep.diagnostics;
    diag["metrics"] = metrics;
    diag["y0"] = rep.y0;
    diag["y0_standard_error"] = rep.y0_standard_error;
    if (rep.y0_reference) diag["y0_reference"] = *rep.y0_reference;
    return {{"scenario", rep.name},         {"kind", to_string(rep.kind)}, {"seed", rep.seed},
            {"n_steps", rep.n_steps},       {"n_paths", rep.n_paths},      {"passed", rep.passed()},
            {"checks", checks},             {"diagnostics", diag},         {"runtime_s", rep.runtime_s}};
}

namespace {

void put_number(std::string& line, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    line += buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

}  // namespace

void write_panel_csv(const std::filesystem::path& path, const TimeMesh& mesh, const SolutionPanel& panel,
                     std::size_t max_paths) {
    std::ofstream out = open_out(path);
    const auto n = std::min<Eigen::Index>(panel.Y.rows(), static_cast<Eigen::Index>(max_paths));
    const auto nodes = panel.Y.cols();
    std::string line = "t,path,Y";
    for (std::size_t k = 0; k < panel.Z.size(); ++k) line += ",Z_" + std::to_string(k + 1);
    line += ",dK_plus,dK_minus\n";
    out << line;
    for (Eigen::Index j = 0; j < nodes; ++j) {
        for (Eigen::Index p = 0; p < n; ++p) {
            line.clear();
            put_number(line, mesh.time(static_cast<std::size_t>(j)));
            line += ',' + std::to_string(p) + ',';
            put_number(line, panel.Y(p, j));
            for (const Panel& z : panel.Z) {
                line += ',';
                put_number(line, z(p, j));
            }
            const bool step = j + 1 < nodes;
            line += ',';
            put_number(line, step ? panel.dK_plus(p, j) : 0.0);
            line += ',';
            put_number(line, step ? panel.dK_minus(p, j) : 0.0);
            line += '\n';
            out << line;
        }
    }
}

std::vector<ConvergenceRow> run_convergence(const Scenario& sc, const std::vector<std::size_t>& steps,
                                            const RunOptions& options) {
    if (steps.empty()) throw ConfigError("converge: no mesh sizes given");
    std::vector<ConvergenceRow> rows;
    for (const std::size_t n : steps) {
        if (n == 0) throw ConfigError("converge: mesh sizes must be positive");
        RunOptions o = options;
        o.n_steps = n;
        const ScenarioReport rep = run_scenario(sc, o);
        if (!rep.y0_reference) throw ConfigError("scenario '" + sc.name + "' has no oracle reference to converge to");
        rows.push_back({n, std::abs(rep.y0 - *rep.y0_reference), rep.y0_standard_error, rep.skorokhod_residual,
                        rep.runtime_s});
    }
    return rows;
}

bool errors_decay(const std::vector<ConvergenceRow>& rows) {
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double noise = 3.0 * std::max(rows[k].y0_standard_error, rows[k - 1].y0_standard_error) + 1e-12;
        if (rows[k].y0_error > rows[k - 1].y0_error + noise) return false;
    }
    return true;
}

void write_convergence_csv(const std::filesystem::path& path, const std::vector<ConvergenceRow>& rows) {
    std::ofstream out = open_out(path);
    out << "n_steps,Y0_error,skorokhod_residual,runtime_s\n";
    for (const auto& r : rows) {
        std::string line = std::to_string(r.n_steps) + ',';
        put_number(line, r.y0_error);
        line += ',';
        put_number(line, r.skorokhod_residual);
        line += ',';
        put_number(line, r.runtime_s);
        line += '\n';
        out << line;
    }
}

std::vector<CatalogEntry> list_scenarios(const std::filesystem::path& dir) {
    std::vector<CatalogEntry> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        const json j = json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        out.push_back({j.value("name", entry.path().stem().string()), j.value("kind", "?"), j.value("description", ""),
                       entry.path()});
    }
    std::sort(out.begin(), out.end(), [](const CatalogEntry& a, const CatalogEntry& b) { return a.name < b.name; });
    return out;
}

std::filesystem::path resolve_scenario(const std::string& name_or_path, const std::filesystem::path& dir) {
    const std::filesystem::path direct(name_or_path);
    if (std::filesystem::is_regular_file(direct)) return direct;
    const std::filesystem::path bundled = dir / (name_or_path + ".json");
    if (std::filesystem::is_regular_file(bundled)) return bundled;
    throw ConfigError("no scenario file or bundled scenario named '" + name_or_path + "'");
}

}  // namespace grbsde
