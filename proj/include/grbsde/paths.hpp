#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "grbsde/mesh.hpp"
#include "grbsde/types.hpp"

namespace grbsde {

/// Increasing process A with A_0 = 0 driving the dA integrator.
struct ASpec {
    enum class Kind {
        identity,      ///< A_t = t
        ramp,          ///< A_t = rate * t
        step,          ///< jump of `height` at `time`, spread over the mesh interval containing it
        running_max,   ///< A_t = max_{s <= t} B^1_s (B_0 = 0)
        abs_integral,  ///< A_t = int_0^t |B^1_s| ds, left-point
    };

    Kind kind = Kind::identity;
    double rate = 1.0;
    double time = 0.5;
    double height = 1.0;

    static ASpec identity() { return {}; }
    static ASpec ramp(double rate) { return {Kind::ramp, rate, 0.5, 1.0}; }
    static ASpec step(double time, double height) { return {Kind::step, 1.0, time, height}; }
    static ASpec running_max() { return {Kind::running_max, 1.0, 0.5, 1.0}; }
    static ASpec abs_integral() { return {Kind::abs_integral, 1.0, 0.5, 1.0}; }

    [[nodiscard]] bool deterministic() const noexcept {
        return kind == Kind::identity || kind == Kind::ramp || kind == Kind::step;
    }
    [[nodiscard]] std::string name() const;
};

/// Brownian increments and A increments on a mesh, plus the cumulated paths.
/// Panels are paths x steps (increments) and paths x nodes (levels).
struct PathEnsemble {
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    std::size_t dim = 0;
    ASpec a_spec;

    VectorPanel dB;
    Panel dA;
    VectorPanel B;
    Panel A;
};

/// Gaussian increments with variance dt per component, generated from
/// Philox keyed on (seed, path, step): bit-identical for every thread count.
[[nodiscard]] PathEnsemble simulate_paths(const TimeMesh& mesh, std::size_t n_paths, std::size_t d,
                                          std::uint64_t seed, const ASpec& a_spec = ASpec::identity(),
                                          std::size_t threads = 1);

/// A on the mesh nodes for a deterministic ASpec. Throws ConfigError otherwise.
[[nodiscard]] Eigen::VectorXd deterministic_a_path(const TimeMesh& mesh, const ASpec& a_spec);

/// Gamma_{t,s}^pi = exp(sum R pi . dB - 1/2 sum R^2 |pi|^2 dt) over steps
/// [t_idx, s_idx), left-point. R is paths x nodes; pi holds one paths x nodes
/// panel per Brownian component with |pi| <= 1.
[[nodiscard]] Eigen::VectorXd gamma_weight(const TimeMesh& mesh, const PathEnsemble& ensemble,
                                           const Panel& R, const VectorPanel& pi,
                                           std::size_t t_idx, std::size_t s_idx);

/// E[g(b_t + sqrt(tau) N)] for standard normal N, by adaptive quadrature.
/// Exact conditional expectation of a functional of B_T given B_t = b_t, tau = T - t.
[[nodiscard]] double gaussian_conditional_expectation(const std::function<double(double)>& g,
                                                      double b_t, double tau);

}  // namespace grbsde
