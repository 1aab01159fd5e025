#include "grbsde/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "grbsde/errors.hpp"
#include "grbsde/solver.hpp"

namespace grbsde {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

Eigen::VectorXd integrated_r2(const Panel& R, const TimeMesh& mesh) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(R.rows());
    for (Eigen::Index i = 0; i + 1 < R.cols(); ++i) {
        out += R.col(i).cwiseAbs2() * mesh.dt(static_cast<std::size_t>(i));
    }
    return out;
}

MeanEstimate sample_mean(const Eigen::VectorXd& v) {
    const auto n = static_cast<double>(v.size());
    const double mean = v.mean();
    const double var = v.size() > 1 ? (v.array() - mean).square().sum() / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

}  // namespace

double ColeHopfTerminal::operator()(double b_T) const {
    switch (kind) {
        case Kind::brownian: return b_T;
        case Kind::affine: return slope * b_T + offset;
        case Kind::step: return b_T > strike ? height : 0.0;
    }
    return 0.0;
}

OracleResult cole_hopf_exact(double gamma, const ColeHopfTerminal& xi, const TimeMesh& mesh,
                             const PathEnsemble& ens) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("Cole-Hopf oracle needs gamma > 0");
    const Eigen::Index n = ens.B[0].rows();
    const auto nodes = static_cast<Eigen::Index>(mesh.n_nodes());
    OracleResult out;
    out.provenance = "cole_hopf:" + std::string(xi.kind == ColeHopfTerminal::Kind::step ? "step" : "affine");
    out.Y.resize(n, nodes);
    out.Z = zero_vector_panel(ens.dim, n, nodes);
    const double T = mesh.horizon();
    for (Eigen::Index j = 0; j < nodes; ++j) {
        const double tau = T - mesh.time(static_cast<std::size_t>(j));
        for (Eigen::Index p = 0; p < n; ++p) {
            const double b = ens.B[0](p, j);
            switch (xi.kind) {
                case ColeHopfTerminal::Kind::brownian:
                case ColeHopfTerminal::Kind::affine: {
                    const double a = xi.kind == ColeHopfTerminal::Kind::brownian ? 1.0 : xi.slope;
                    const double c = xi.kind == ColeHopfTerminal::Kind::brownian ? 0.0 : xi.offset;
                    out.Y(p, j) = a * b + c + 0.5 * gamma * a * a * tau;
                    out.Z[0](p, j) = a;
                    break;
                }
                case ColeHopfTerminal::Kind::step: {
                    if (tau <= 0.0) {
                        out.Y(p, j) = xi(b);
                        break;
                    }
                    const double jump = std::expm1(gamma * xi.height);
                    const double s = std::sqrt(tau);
                    const double w = (b - xi.strike) / s;
                    const double m = 1.0 + jump * normal_cdf(w);
                    out.Y(p, j) = std::log(m) / gamma;
                    out.Z[0](p, j) = jump * normal_pdf(w) / (s * gamma * m);
                    break;
                }
            }
        }
    }
    return out;
}

Eigen::VectorXd deterministic_ode_solution(const Transform& tf, double a, const Eigen::VectorXd& eta,
                                           std::size_t substeps) {
    if (eta.size() < 1) throw ConfigError("deterministic ODE: empty eta path");
    if (substeps == 0) throw ConfigError("deterministic ODE: substeps must be positive");
    if (!(a >= 0.0) || a >= tf.h_mass()) throw RangeError("deterministic ODE: a must lie below the mass of 1/phi");
    const Eigen::Index N = eta.size() - 1;
    if (eta(N) > a) throw RangeError("deterministic ODE: eta_T exceeds a");
    for (Eigen::Index i = 0; i < N; ++i) {
        if (eta(i + 1) < eta(i)) throw ConfigError("deterministic ODE: eta must be nondecreasing");
    }
    const Phi& phi = tf.phi();
    Eigen::VectorXd x(eta.size());
    x(N) = eval_H_inv(a - eta(N), tf);
    // In the eta variable, dx/d eta = -phi(x); step from eta_{i+1} down to eta_i.
    for (Eigen::Index i = N - 1; i >= 0; --i) {
        const double h = -(eta(i + 1) - eta(i)) / static_cast<double>(substeps);
        double v = x(i + 1);
        for (std::size_t s = 0; s < substeps; ++s) {
            const double k1 = -phi(v);
            const double k2 = -phi(v + 0.5 * h * k1);
            const double k3 = -phi(v + 0.5 * h * k2);
            const double k4 = -phi(v + h * k3);
            v += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        x(i) = v;
    }
    return x;
}

TreeResult tree_dp_reflected(const ProblemSpec& spec, const BinomialTree& tree, const std::vector<double>& a_nodes) {
    if (!spec.f || !spec.terminal) throw ConfigError("tree oracle: problem needs f and a terminal value");
    const std::size_t n = tree.n_steps();
    if (n > 20) throw ConfigError("tree oracle: at most 20 steps");
    if (!a_nodes.empty() && a_nodes.size() != n + 1) throw ConfigError("tree oracle: A needs one value per level");
    auto a_at = [&](std::size_t level) { return a_nodes.empty() ? 0.0 : a_nodes[level]; };
    auto state = [&](std::size_t level, std::size_t j, double& b) {
        b = tree.state(level, j);
        return NodeState{tree.time(level), level, NodeState::npos, std::span<const double>(&b, 1), a_at(level)};
    };
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto lower = [&](const NodeState& ns) { return spec.lower ? spec.lower->value(ns) : -inf; };
    auto upper = [&](const NodeState& ns) { return spec.upper ? spec.upper->value(ns) : inf; };

    TreeResult out;
    out.provenance = "binomial_tree_dp:n=" + std::to_string(n);
    out.values.resize(n + 1);
    out.values[n].resize(n + 1);
    double b = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
        const NodeState ns = state(n, j, b);
        const double xi = spec.terminal(ns);
        if (xi < lower(ns) || xi > upper(ns)) throw ConfigError("tree oracle: terminal value outside the barriers");
        out.values[n][j] = xi;
    }
    const double dt = tree.dt();
    const double sq = std::sqrt(dt);
    for (std::size_t level = n; level-- > 0;) {
        out.values[level].resize(level + 1);
        const double da = a_at(level + 1) - a_at(level);
        for (std::size_t j = 0; j <= level; ++j) {
            const NodeState ns = state(level, j, b);
            const double up = out.values[level + 1][j + 1];
            const double down = out.values[level + 1][j];
            const double cont = 0.5 * (up + down);
            const double z = (up - down) / (2.0 * sq);
            double cand = cont + spec.f(ns, cont, std::span<const double>(&z, 1)) * dt;
            if (spec.g && da != 0.0) cand += spec.g(ns, cont) * da;
            const double lo = lower(ns);
            const double hi = upper(ns);
            if (lo > hi) throw ConfigError("tree oracle: barrier crossing L > U");
            const double y = std::clamp(cand, lo, hi);
            const double w = tree.reach_probability(level, j);
            out.expected_k_plus += w * std::max(0.0, lo - cand);
            out.expected_k_minus += w * std::max(0.0, cand - hi);
            out.values[level][j] = y;
            if (level == 0) out.z0 = z;
        }
    }
    out.y0 = out.values[0][0];
    return out;
}

PiFamily constant_pi_family(std::size_t d, Eigen::Index rows, Eigen::Index cols) {
    PiFamily family;
    family.push_back(zero_vector_panel(d, rows, cols));
    for (std::size_t k = 0; k < d; ++k) {
        for (const double sign : {1.0, -1.0}) {
            VectorPanel pi = zero_vector_panel(d, rows, cols);
            pi[k].setConstant(sign);
            family.push_back(std::move(pi));
        }
    }
    return family;
}

VectorPanel feedback_pi(const VectorPanel& Z) {
    if (Z.empty()) return {};
    Panel norm = Panel::Zero(Z[0].rows(), Z[0].cols());
    for (const Panel& zk : Z) norm += zk.cwiseAbs2();
    norm = norm.cwiseSqrt();
    VectorPanel pi;
    for (const Panel& zk : Z) {
        pi.push_back(zk.binaryExpr(norm, [](double z, double r) { return r > 0.0 ? z / r : 0.0; }));
    }
    return pi;
}

SupGammaResult estimate_sup_gamma(const Eigen::VectorXd& lambda_bar_T, const Panel& R, const PiFamily& family,
                                  const TimeMesh& mesh, const PathEnsemble& ens) {
    if (family.empty()) throw ConfigError("estimate_sup_gamma: empty pi family");
    if (lambda_bar_T.size() != static_cast<Eigen::Index>(ens.n_paths)) {
        throw ConfigError("estimate_sup_gamma: one Lambda_bar value per path expected");
    }
    SupGammaResult out;
    for (const VectorPanel& pi : family) {
        const Eigen::VectorXd gamma = gamma_weight(mesh, ens, R, pi, 0, mesh.n_steps());
        const MeanEstimate m = sample_mean(gamma.cwiseProduct(lambda_bar_T));
        out.means.push_back(m.value);
        out.standard_errors.push_back(m.standard_error);
    }
    out.argmax = static_cast<std::size_t>(
        std::distance(out.means.begin(), std::max_element(out.means.begin(), out.means.end())));
    out.best = out.means[out.argmax];
    out.lower_bound = out.best - 3.0 * out.standard_errors[out.argmax];
    return out;
}

PilotResult pilot_feedback(const Eigen::VectorXd& lambda_bar_T, const Panel& R, const TimeMesh& mesh,
                           const PathEnsemble& ens) {
    ProblemSpec spec;
    spec.f = [&R](const NodeState& ns, double, std::span<const double> z) {
        double r2 = 0.0;
        for (const double v : z) r2 += v * v;
        return R(static_cast<Eigen::Index>(ns.path), static_cast<Eigen::Index>(ns.step)) * std::sqrt(r2);
    };
    spec.terminal = [&lambda_bar_T](const NodeState& ns) {
        return lambda_bar_T(static_cast<Eigen::Index>(ns.path));
    };
    const SolutionPanel sol = solve_gbsde(spec, mesh, ens);
    return {sol.y0(), feedback_pi(sol.Z)};
}

MeanEstimate gamma_mean(const Panel& R, const VectorPanel& pi, const TimeMesh& mesh, const PathEnsemble& ens) {
    return sample_mean(gamma_weight(mesh, ens, R, pi, 0, mesh.n_steps()));
}

MeanEstimate delta_bound(const Eigen::VectorXd& lambda_bar_T, const Panel& R, double q, double n_cap,
                         const TimeMesh& mesh) {
    if (!(q > 1.0)) throw ConfigError("delta_bound: q must exceed 1");
    if (R.rows() != lambda_bar_T.size()) throw ConfigError("delta_bound: R and Lambda_bar differ in paths");
    const Eigen::VectorXd r2 = integrated_r2(R, mesh);
    const double expo = q / (2.0 * (q - 1.0));
    Eigen::VectorXd sample(lambda_bar_T.size());
    for (Eigen::Index p = 0; p < sample.size(); ++p) {
        const double lam = lambda_bar_T(p);
        const bool kept = lam + r2(p) <= n_cap;
        sample(p) = kept ? std::exp(expo * r2(p)) * std::pow(lam, q) : 0.0;
    }
    const MeanEstimate m = sample_mean(sample);
    if (m.value <= 0.0) return {0.0, 0.0};
    const double value = std::pow(m.value, 1.0 / q);
    return {value, value / (q * m.value) * m.standard_error};
}

MeanEstimate delta_bound_min(const Eigen::VectorXd& lambda_bar_T, const Panel& R, const std::vector<double>& q_grid,
                             double n_cap, const TimeMesh& mesh) {
    if (q_grid.empty()) throw ConfigError("delta_bound_min: empty q grid");
    MeanEstimate best{std::numeric_limits<double>::infinity(), 0.0};
    for (const double q : q_grid) {
        const MeanEstimate m = delta_bound(lambda_bar_T, R, q, n_cap, mesh);
        if (m.value < best.value) best = m;
    }
    return best;
}

}  // namespace grbsde
