#include "grbsde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "grbsde/errors.hpp"
#include "grbsde/parallel.hpp"

namespace grbsde {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

enum class Reflection { none, project, penalty };

// B values of one path at one node, copied into a contiguous buffer.
void load_b(const PathEnsemble& ens, Eigen::Index p, Eigen::Index node, std::vector<double>& b) {
    for (std::size_t k = 0; k < ens.dim; ++k) b[k] = ens.B[k](p, node);
}

NodeState node_state(const TimeMesh& mesh, const PathEnsemble& ens, Eigen::Index p, Eigen::Index node,
                     const std::vector<double>& b) {
    return {mesh.time(static_cast<std::size_t>(node)), static_cast<std::size_t>(node),
            static_cast<std::size_t>(p), std::span<const double>(b), ens.A(p, node)};
}

Panel evaluate_barrier(const std::optional<Barrier>& barrier, double absent, const TimeMesh& mesh,
                       const PathEnsemble& ens, std::size_t threads) {
    const auto rows = static_cast<Eigen::Index>(ens.n_paths);
    const auto cols = static_cast<Eigen::Index>(mesh.n_nodes());
    Panel out = Panel::Constant(rows, cols, absent);
    if (!barrier) return out;
    if (!barrier->value) throw ConfigError("barrier has no value function");
    parallel_for_blocks(ens.n_paths, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> b(ens.dim);
        for (auto p = static_cast<Eigen::Index>(begin); p < static_cast<Eigen::Index>(end); ++p) {
            for (Eigen::Index j = 0; j < cols; ++j) {
                load_b(ens, p, j, b);
                out(p, j) = barrier->value(node_state(mesh, ens, p, j, b));
            }
        }
    });
    return out;
}

void check_inputs(const ProblemSpec& spec, const TimeMesh& mesh, const PathEnsemble& ens) {
    if (!spec.f || !spec.terminal) throw ConfigError("problem needs a driver f and a terminal value");
    if (ens.n_paths == 0 || ens.dim == 0) throw ConfigError("empty path ensemble");
    if (ens.A.cols() != static_cast<Eigen::Index>(mesh.n_nodes()) ||
        ens.dA.cols() != static_cast<Eigen::Index>(mesh.n_steps())) {
        throw ConfigError("path ensemble was simulated on a different mesh");
    }
}

SolutionPanel solve_impl(const ProblemSpec& spec, const TimeMesh& mesh, const PathEnsemble& ens,
                         const std::optional<RegressionEstimator>& estimator, const SolverOptions& opt,
                         Reflection mode, double penalty) {
    check_inputs(spec, mesh, ens);
    const auto n = static_cast<Eigen::Index>(ens.n_paths);
    const auto nodes = static_cast<Eigen::Index>(mesh.n_nodes());
    const auto N = nodes - 1;
    const std::size_t d = ens.dim;
    const std::size_t threads = std::max<std::size_t>(1, opt.threads);

    SolutionPanel out;
    out.L = evaluate_barrier(spec.lower, -inf, mesh, ens, threads);
    out.U = evaluate_barrier(spec.upper, inf, mesh, ens, threads);
    if (spec.lower && spec.upper) {
        for (Eigen::Index j = 0; j < nodes; ++j) {
            for (Eigen::Index p = 0; p < n; ++p) {
                if (out.L(p, j) > out.U(p, j) + opt.reflection_tol) {
                    std::ostringstream msg;
                    msg << "barrier crossing L > U at node " << j << " (t = " << mesh.time(static_cast<std::size_t>(j))
                        << "), path " << p << ": L = " << out.L(p, j) << ", U = " << out.U(p, j);
                    throw ConfigError(msg.str());
                }
            }
        }
    }

    out.Y.resize(n, nodes);
    out.Z = zero_vector_panel(d, n, nodes);
    out.dK_plus = Panel::Zero(n, N);
    out.dK_minus = Panel::Zero(n, N);
    out.continuation_se = Panel::Zero(n, nodes);

    {
        std::vector<double> b(d);
        for (Eigen::Index p = 0; p < n; ++p) {
            load_b(ens, p, N, b);
            const double xi = spec.terminal(node_state(mesh, ens, p, N, b));
            if (xi < out.L(p, N) - opt.reflection_tol) {
                std::ostringstream msg;
                msg << "terminal value below the lower barrier on path " << p << ": xi = " << xi
                    << ", L_T = " << out.L(p, N);
                throw ConfigError(msg.str());
            }
            if (xi > out.U(p, N) + opt.reflection_tol) {
                std::ostringstream msg;
                msg << "terminal value above the upper barrier on path " << p << ": xi = " << xi
                    << ", U_T = " << out.U(p, N);
                throw ConfigError(msg.str());
            }
            out.Y(p, N) = xi;
        }
    }

    const RegressionEstimator est = estimator ? *estimator : default_estimator(spec, ens);
    const std::size_t state_dim = regression_state_size(d);
    std::vector<std::uint32_t> breaches(ens.n_paths, 0);

    Eigen::MatrixXd states(n, static_cast<Eigen::Index>(state_dim));
    Eigen::MatrixXd targets(n, static_cast<Eigen::Index>(d + 1));
    for (Eigen::Index i = N - 1; i >= 0; --i) {
        const double dt = mesh.dt(static_cast<std::size_t>(i));
        for (std::size_t k = 0; k < d; ++k) states.col(static_cast<Eigen::Index>(k)) = ens.B[k].col(i);
        states.col(static_cast<Eigen::Index>(d)) = ens.A.col(i);
        for (Eigen::Index p = 0; p < n; ++p) {
            const double b1 = ens.B[0](p, i);
            const double lgap = out.L(p, i) - b1;
            const double ugap = out.U(p, i) - b1;
            states(p, static_cast<Eigen::Index>(d) + 1) = std::isfinite(lgap) ? lgap : 0.0;
            states(p, static_cast<Eigen::Index>(d) + 2) = std::isfinite(ugap) ? ugap : 0.0;
        }

        const RegressionFit fit(est, states);
        out.diagnostics.max_condition = std::max(out.diagnostics.max_condition, fit.condition_number());
        if (fit.rank_deficient()) ++out.diagnostics.rank_deficient_slices;

        // Z regresses (Y_{i+1} - Y*) dB / dt: same conditional mean as Y_{i+1} dB / dt
        // since E(Y* dB | F_i) = 0, with far less variance. Quadratic drivers
        // turn that variance into upward bias through |z|^2.
        targets.col(0) = out.Y.col(i + 1);
        const Eigen::VectorXd continuation = fit.project(Eigen::VectorXd(targets.col(0)));
        const Eigen::VectorXd innovation = out.Y.col(i + 1) - continuation;
        for (std::size_t k = 0; k < d; ++k) {
            targets.col(static_cast<Eigen::Index>(k) + 1) = innovation.cwiseProduct(ens.dB[k].col(i)) / dt;
        }
        Eigen::MatrixXd fitted = fit.project(targets);
        fitted.col(0) = continuation;
        out.continuation_se.col(i) = fit.fitted_standard_error(out.Y.col(i + 1), continuation);

        parallel_for_blocks(ens.n_paths, threads, [&](std::size_t begin, std::size_t end) {
            std::vector<double> b(d);
            std::vector<double> z(d);
            for (auto p = static_cast<Eigen::Index>(begin); p < static_cast<Eigen::Index>(end); ++p) {
                load_b(ens, p, i, b);
                const NodeState ns = node_state(mesh, ens, p, i, b);
                for (std::size_t k = 0; k < d; ++k) {
                    double zk = fitted(p, static_cast<Eigen::Index>(k) + 1);
                    if (!(std::abs(zk) <= opt.z_cap)) {
                        ++breaches[static_cast<std::size_t>(p)];
                        zk = std::isnan(zk) ? 0.0 : std::clamp(zk, -opt.z_cap, opt.z_cap);
                    }
                    z[k] = zk;
                    out.Z[k](p, i) = zk;
                }
                const double ystar = fitted(p, 0);
                const double da = ens.dA(p, i);
                auto step = [&](double y) {
                    double v = ystar + spec.f(ns, y, z) * dt;
                    if (spec.g && da != 0.0) v += spec.g(ns, y) * da;
                    return v;
                };
                double cand = step(ystar);
                if (opt.corrector) cand = step(cand);

                const double lo = out.L(p, i);
                const double hi = out.U(p, i);
                double y = cand;
                double kp = 0.0;
                double km = 0.0;
                if (mode == Reflection::project) {
                    if (cand < lo) {
                        y = lo;
                        kp = lo - cand;
                    } else if (cand > hi) {
                        y = hi;
                        km = cand - hi;
                    }
                } else if (mode == Reflection::penalty) {
                    const double w = penalty * dt;
                    if (cand < lo) {
                        y = (cand + w * lo) / (1.0 + w);
                        kp = w * (lo - y);
                    } else if (cand > hi) {
                        y = (cand + w * hi) / (1.0 + w);
                        km = w * (y - hi);
                    }
                }
                out.Y(p, i) = y;
                out.dK_plus(p, i) = kp;
                out.dK_minus(p, i) = km;
            }
        });
    }

    for (const auto c : breaches) out.diagnostics.z_cap_breaches += c;
    out.skorokhod_lower = Eigen::VectorXd::Zero(n);
    out.skorokhod_upper = Eigen::VectorXd::Zero(n);
    for (Eigen::Index p = 0; p < n; ++p) {
        const double scale = 1.0 + out.Y.row(p).cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < N; ++i) {
            if (out.dK_plus(p, i) != 0.0) out.skorokhod_lower(p) += (out.Y(p, i) - out.L(p, i)) * out.dK_plus(p, i);
            if (out.dK_minus(p, i) != 0.0) out.skorokhod_upper(p) += (out.U(p, i) - out.Y(p, i)) * out.dK_minus(p, i);
            out.diagnostics.singularity =
                std::max(out.diagnostics.singularity, std::min(out.dK_plus(p, i), out.dK_minus(p, i)));
        }
        out.diagnostics.skorokhod_lower =
            std::max(out.diagnostics.skorokhod_lower, std::abs(out.skorokhod_lower(p)) / scale);
        out.diagnostics.skorokhod_upper =
            std::max(out.diagnostics.skorokhod_upper, std::abs(out.skorokhod_upper(p)) / scale);
    }
    return out;
}

}  // namespace

RegressionEstimator default_estimator(const ProblemSpec& spec, const PathEnsemble& ensemble) {
    std::vector<std::size_t> b_indices(ensemble.dim);
    for (std::size_t k = 0; k < ensemble.dim; ++k) b_indices[k] = k;
    RegressionEstimator est = polynomial_estimator(b_indices, 3);
    const std::size_t d = ensemble.dim;
    auto add_square_pair = [&est](std::size_t idx) {
        est.basis.emplace_back([idx](std::span<const double> s) { return s[idx]; });
        est.basis.emplace_back([idx](std::span<const double> s) { return s[idx] * s[idx]; });
    };
    if (!ensemble.a_spec.deterministic()) add_square_pair(d);
    if (spec.lower && spec.lower->regression_feature) add_square_pair(d + 1);
    if (spec.upper && spec.upper->regression_feature) add_square_pair(d + 2);
    return est;
}

SolutionPanel solve_gbsde(const ProblemSpec& spec, const TimeMesh& mesh, const PathEnsemble& ensemble,
                          const std::optional<RegressionEstimator>& estimator, const SolverOptions& options) {
    if (spec.lower || spec.upper) throw ConfigError("solve_gbsde takes no barriers");
    return solve_impl(spec, mesh, ensemble, estimator, options, Reflection::none, 0.0);
}

SolutionPanel solve_grbsde_one_barrier(const ProblemSpec& spec, const TimeMesh& mesh,
                                       const PathEnsemble& ensemble,
                                       const std::optional<RegressionEstimator>& estimator,
                                       const SolverOptions& options) {
    if (!spec.lower) throw ConfigError("one-barrier solver needs a lower barrier");
    if (spec.upper) throw ConfigError("one-barrier solver takes no upper barrier");
    return solve_impl(spec, mesh, ensemble, estimator, options, Reflection::project, 0.0);
}

SolutionPanel solve_grbsde_two_barriers(const ProblemSpec& spec, const TimeMesh& mesh,
                                        const PathEnsemble& ensemble,
                                        const std::optional<RegressionEstimator>& estimator,
                                        const SolverOptions& options) {
    if (!spec.lower || !spec.upper) throw ConfigError("two-barrier solver needs both barriers");
    return solve_impl(spec, mesh, ensemble, estimator, options, Reflection::project, 0.0);
}

SolutionPanel solve_penalized(const ProblemSpec& spec, const TimeMesh& mesh, const PathEnsemble& ensemble,
                              double penalty, const std::optional<RegressionEstimator>& estimator,
                              const SolverOptions& options) {
    if (!(penalty > 0.0) || !std::isfinite(penalty)) throw ConfigError("penalty must be positive and finite");
    if (!spec.lower && !spec.upper) throw ConfigError("penalized solver needs a barrier");
    return solve_impl(spec, mesh, ensemble, estimator, options, Reflection::penalty, penalty);
}

DkBoundReport check_dk_bounds(const SolutionPanel& panel, const ProblemSpec& spec, const TimeMesh& mesh,
                              const PathEnsemble& ens, double tol) {
    if (spec.lower && !spec.lower->decomposition) {
        throw ConfigError("dK bound check: lower barrier has no decomposition");
    }
    if (spec.upper && !spec.upper->decomposition) {
        throw ConfigError("dK bound check: upper barrier has no decomposition");
    }
    const auto n = static_cast<Eigen::Index>(ens.n_paths);
    const auto N = static_cast<Eigen::Index>(mesh.n_steps());
    if (panel.dK_plus.rows() != n || panel.dK_plus.cols() != N) {
        throw ConfigError("dK bound check: panel does not match the ensemble");
    }
    auto eval = [](const StateFunction& fn, const NodeState& ns) { return fn ? fn(ns) : 0.0; };

    DkBoundReport rep;
    std::vector<double> b(ens.dim);
    std::vector<double> chi(ens.dim);
    for (Eigen::Index i = 0; i < N; ++i) {
        const double dt = mesh.dt(static_cast<std::size_t>(i));
        DkStepExcess lo_step{static_cast<std::size_t>(i), false};
        DkStepExcess hi_step{static_cast<std::size_t>(i), true};
        for (Eigen::Index p = 0; p < n; ++p) {
            load_b(ens, p, i, b);
            const NodeState ns = node_state(mesh, ens, p, i, b);
            const double da = ens.dA(p, i);
            const double se = panel.continuation_se(p, i);
            auto gval = [&](double y) { return spec.g ? spec.g(ns, y) : 0.0; };
            auto load_chi = [&](const BarrierDecomposition& dec) {
                std::fill(chi.begin(), chi.end(), 0.0);
                if (dec.chi) dec.chi(ns, chi);
            };
            auto record = [&](double dk, double excess, double& worst, DkStepExcess& st) {
                worst = std::max(worst, excess);
                if (excess > 3.0 * se + tol) ++rep.path_exceedances;
                ++rep.checked;
                if (dk > 0.0) {
                    ++st.active_paths;
                    st.mean_excess += excess;
                    st.mean_se += se;
                }
            };
            if (spec.lower) {
                const auto& dec = *spec.lower->decomposition;
                load_chi(dec);
                const double l = panel.L(p, i);
                const double bound = std::max(0.0, -spec.f(ns, l, chi) - eval(dec.rho, ns)) * dt +
                                     std::max(0.0, -gval(l) - eval(dec.theta, ns)) * da;
                record(panel.dK_plus(p, i), panel.dK_plus(p, i) - bound, rep.max_excess_lower, lo_step);
            }
            if (spec.upper) {
                const auto& dec = *spec.upper->decomposition;
                load_chi(dec);
                const double u = panel.U(p, i);
                const double bound = std::max(0.0, spec.f(ns, u, chi) - eval(dec.rho, ns)) * dt +
                                     std::max(0.0, gval(u) - eval(dec.theta, ns)) * da;
                record(panel.dK_minus(p, i), panel.dK_minus(p, i) - bound, rep.max_excess_upper, hi_step);
            }
        }
        for (DkStepExcess* st : {&lo_step, &hi_step}) {
            if (st->active_paths == 0) continue;
            const auto m = static_cast<double>(st->active_paths);
            st->mean_excess /= m;
            st->mean_se /= m;
            if (st->mean_excess > 3.0 * st->mean_se + tol) ++rep.violations;
            rep.steps.push_back(*st);
        }
    }
    return rep;
}

ComparisonReport compare_solutions(const SolutionPanel& a, const SolutionPanel& b, double tol) {
    if (a.Y.rows() != b.Y.rows() || a.Y.cols() != b.Y.cols()) {
        throw ConfigError("compare_solutions: panels come from different meshes or ensembles");
    }
    ComparisonReport rep;
    rep.max_excess = -inf;
    for (Eigen::Index j = 0; j < a.Y.cols(); ++j) {
        for (Eigen::Index p = 0; p < a.Y.rows(); ++p) {
            const double se = std::max(a.continuation_se(p, j), b.continuation_se(p, j));
            const double excess = a.Y(p, j) - b.Y(p, j);
            rep.max_excess = std::max(rep.max_excess, excess);
            if (excess > 3.0 * se + tol) ++rep.violations;
            ++rep.total;
        }
    }
    return rep;
}

}  // namespace grbsde
