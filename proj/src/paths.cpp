#include "grbsde/paths.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "grbsde/errors.hpp"
#include "grbsde/numerics.hpp"
#include "grbsde/parallel.hpp"
#include "grbsde/rng.hpp"

namespace grbsde {

std::string ASpec::name() const {
    switch (kind) {
        case Kind::identity: return "identity";
        case Kind::ramp: return "ramp";
        case Kind::step: return "step";
        case Kind::running_max: return "running_max";
        case Kind::abs_integral: return "abs_integral";
    }
    return "?";
}

namespace {

void validate(const ASpec& a) {
    if (a.kind == ASpec::Kind::ramp && !(a.rate >= 0.0)) {
        throw ConfigError("A ramp rate must be nonnegative");
    }
    if (a.kind == ASpec::Kind::step && !(a.height >= 0.0)) {
        throw ConfigError("A step height must be nonnegative");
    }
}

// Index k of the interval [t_k, t_{k+1}) that receives the step jump.
std::size_t step_interval(const TimeMesh& mesh, double time) {
    const auto& t = mesh.times();
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    std::size_t k = it == t.begin() ? 0 : static_cast<std::size_t>(std::distance(t.begin(), it)) - 1;
    return std::min(k, mesh.n_steps() - 1);
}

}  // namespace

Eigen::VectorXd deterministic_a_path(const TimeMesh& mesh, const ASpec& a_spec) {
    validate(a_spec);
    const auto n = static_cast<Eigen::Index>(mesh.n_nodes());
    Eigen::VectorXd a(n);
    switch (a_spec.kind) {
        case ASpec::Kind::identity:
            for (Eigen::Index i = 0; i < n; ++i) a(i) = mesh.time(static_cast<std::size_t>(i));
            break;
        case ASpec::Kind::ramp:
            for (Eigen::Index i = 0; i < n; ++i) a(i) = a_spec.rate * mesh.time(static_cast<std::size_t>(i));
            break;
        case ASpec::Kind::step: {
            const auto k = static_cast<Eigen::Index>(step_interval(mesh, a_spec.time));
            for (Eigen::Index i = 0; i < n; ++i) a(i) = i <= k ? 0.0 : a_spec.height;
            break;
        }
        default:
            throw ConfigError("A spec '" + a_spec.name() + "' is pathwise, not deterministic");
    }
    return a;
}

PathEnsemble simulate_paths(const TimeMesh& mesh, std::size_t n_paths, std::size_t d,
                            std::uint64_t seed, const ASpec& a_spec, std::size_t threads) {
    if (n_paths < 1) throw ConfigError("ensemble needs n_paths >= 1");
    if (d < 1) throw ConfigError("ensemble needs d >= 1");
    validate(a_spec);

    const auto rows = static_cast<Eigen::Index>(n_paths);
    const auto steps = static_cast<Eigen::Index>(mesh.n_steps());
    PathEnsemble ens;
    ens.seed = seed;
    ens.n_paths = n_paths;
    ens.dim = d;
    ens.a_spec = a_spec;
    ens.dB = zero_vector_panel(d, rows, steps);
    ens.B = zero_vector_panel(d, rows, steps + 1);
    ens.dA = Panel::Zero(rows, steps);
    ens.A = Panel::Zero(rows, steps + 1);

    const Eigen::VectorXd sqrt_dt = mesh.steps().cwiseSqrt();
    const std::size_t blocks = (d + 1) / 2;

    parallel_for_blocks(n_paths, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const auto row = static_cast<Eigen::Index>(p);
            for (Eigen::Index i = 0; i < steps; ++i) {
                for (std::size_t b = 0; b < blocks; ++b) {
                    const auto z = normal_pair(seed, p, static_cast<std::uint32_t>(i),
                                               static_cast<std::uint32_t>(b));
                    ens.dB[2 * b](row, i) = sqrt_dt(i) * z[0];
                    if (2 * b + 1 < d) ens.dB[2 * b + 1](row, i) = sqrt_dt(i) * z[1];
                }
                for (std::size_t k = 0; k < d; ++k) {
                    ens.B[k](row, i + 1) = ens.B[k](row, i) + ens.dB[k](row, i);
                }
            }
        }
    });

    if (a_spec.deterministic()) {
        const Eigen::VectorXd a = deterministic_a_path(mesh, a_spec);
        ens.A.rowwise() = a.transpose();
        ens.dA.rowwise() = (a.tail(steps) - a.head(steps)).transpose();
        return ens;
    }

    const Panel& b1 = ens.B[0];
    for (Eigen::Index i = 0; i < steps; ++i) {
        if (a_spec.kind == ASpec::Kind::running_max) {
            ens.A.col(i + 1) = ens.A.col(i).cwiseMax(b1.col(i + 1));
        } else {
            ens.A.col(i + 1) = ens.A.col(i) + b1.col(i).cwiseAbs() * mesh.dt(static_cast<std::size_t>(i));
        }
        ens.dA.col(i) = ens.A.col(i + 1) - ens.A.col(i);
    }
    return ens;
}

Eigen::VectorXd gamma_weight(const TimeMesh& mesh, const PathEnsemble& ensemble, const Panel& R,
                             const VectorPanel& pi, std::size_t t_idx, std::size_t s_idx) {
    if (t_idx > s_idx || s_idx > mesh.n_steps()) throw ConfigError("gamma_weight: need t_idx <= s_idx <= n_steps");
    if (pi.size() != ensemble.dim) throw ConfigError("gamma_weight: pi dimension differs from d");
    const auto rows = static_cast<Eigen::Index>(ensemble.n_paths);
    if (R.rows() != rows || R.cols() < static_cast<Eigen::Index>(s_idx)) {
        throw ConfigError("gamma_weight: R panel shape mismatch");
    }

    Eigen::VectorXd log_gamma = Eigen::VectorXd::Zero(rows);
    for (auto i = static_cast<Eigen::Index>(t_idx); i < static_cast<Eigen::Index>(s_idx); ++i) {
        const double dt = mesh.dt(static_cast<std::size_t>(i));
        Eigen::VectorXd norm2 = Eigen::VectorXd::Zero(rows);
        Eigen::VectorXd drive = Eigen::VectorXd::Zero(rows);
        for (std::size_t k = 0; k < ensemble.dim; ++k) {
            norm2 += pi[k].col(i).cwiseAbs2();
            drive += pi[k].col(i).cwiseProduct(ensemble.dB[k].col(i));
        }
        if (norm2.maxCoeff() > 1.0 + 1e-12) {
            throw DomainError("gamma_weight: |pi| exceeds 1 at step " + std::to_string(i));
        }
        const auto r = R.col(i).array();
        log_gamma.array() += r * drive.array() - 0.5 * r.square() * norm2.array() * dt;
    }
    return log_gamma.array().exp();
}

double gaussian_conditional_expectation(const std::function<double(double)>& g, double b_t,
                                        double tau) {
    if (tau <= 0.0) return g(b_t);
    const double s = std::sqrt(tau);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    return numerics::integrate(
        [&](double u) { return g(b_t + s * u) * norm * std::exp(-0.5 * u * u); }, -12.0, 12.0);
}

}  // namespace grbsde
