#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "grbsde/mesh.hpp"
#include "grbsde/paths.hpp"
#include "grbsde/problem.hpp"
#include "grbsde/transform.hpp"
#include "grbsde/tree.hpp"
#include "grbsde/types.hpp"

namespace grbsde {

struct OracleResult {
    Panel Y;      ///< paths x nodes (one row for deterministic oracles)
    VectorPanel Z;  ///< empty when not available
    std::string provenance;
};

/// Terminal values with closed-form exponential moments given B_t.
struct ColeHopfTerminal {
    enum class Kind {
        brownian,  ///< B^1_T
        affine,    ///< slope * B^1_T + offset
        step,      ///< height * 1{B^1_T > strike}
    };
    Kind kind = Kind::brownian;
    double slope = 1.0;
    double offset = 0.0;
    double height = 1.0;
    double strike = 0.0;

    static ColeHopfTerminal brownian() { return {}; }
    static ColeHopfTerminal affine(double slope, double offset) {
        return {Kind::affine, slope, offset, 1.0, 0.0};
    }
    static ColeHopfTerminal step(double height, double strike) {
        return {Kind::step, 1.0, 0.0, height, strike};
    }
    [[nodiscard]] double operator()(double b_T) const;
};

/// Y_t = ln E(e^{gamma xi} | F_t) / gamma for f = gamma/2 |z|^2, g = 0.
/// Throws ConfigError for gamma <= 0.
[[nodiscard]] OracleResult cole_hopf_exact(double gamma, const ColeHopfTerminal& xi, const TimeMesh& mesh,
                                           const PathEnsemble& ensemble);

/// x on the mesh for x_t = H^{-1}(a - eta_T) + int_t^T phi(x) d eta, eta
/// deterministic and nondecreasing: RK4 on dx/d eta = -phi(x), run backward
/// from the terminal value with `substeps` steps per mesh interval.
/// Throws RangeError when a is not below the mass of 1/phi or eta_T > a.
[[nodiscard]] Eigen::VectorXd deterministic_ode_solution(const Transform& tf, double a,
                                                         const Eigen::VectorXd& eta,
                                                         std::size_t substeps = 256);

struct TreeResult {
    double y0 = 0.0;
    double z0 = 0.0;
    double expected_k_plus = 0.0;   ///< E K+_T
    double expected_k_minus = 0.0;  ///< E K-_T
    std::vector<std::vector<double>> values;  ///< values[level][j]
    std::string provenance;
};

/// Exact backward recursion on the recombining tree. Drivers, terminal and
/// barriers see NodeState{t, level, npos, {state}, a_nodes[level]}.
/// `a_nodes` holds A at each level (size n + 1); empty means A = 0.
[[nodiscard]] TreeResult tree_dp_reflected(const ProblemSpec& spec, const BinomialTree& tree,
                                           const std::vector<double>& a_nodes = {});

struct SupGammaResult {
    std::vector<double> means;
    std::vector<double> standard_errors;
    std::size_t argmax = 0;
    double best = 0.0;
    /// best - 3 s.e.: a lower bound for sup_pi E(Gamma^pi Lambda_bar).
    double lower_bound = 0.0;
};

/// Candidate pi processes, each one paths x nodes panel per component.
using PiFamily = std::vector<VectorPanel>;

/// 0 plus +-e_k for every Brownian component.
[[nodiscard]] PiFamily constant_pi_family(std::size_t d, Eigen::Index rows, Eigen::Index cols);

/// pi = z / |z| (0 where z = 0).
[[nodiscard]] VectorPanel feedback_pi(const VectorPanel& Z);

/// max over the family of the sample mean of Gamma_{0,T}^pi Lambda_bar.
/// Throws ConfigError for an empty family.
[[nodiscard]] SupGammaResult estimate_sup_gamma(const Eigen::VectorXd& lambda_bar_T, const Panel& R,
                                                const PiFamily& family, const TimeMesh& mesh,
                                                const PathEnsemble& ensemble);

/// Pilot solve of x = Lambda_bar + int R |z| ds - int z dB, whose Y_0 is
/// sup_pi E(Gamma^pi Lambda_bar); its Z gives the feedback candidate.
struct PilotResult {
    double y0 = 0.0;
    VectorPanel pi;
};
[[nodiscard]] PilotResult pilot_feedback(const Eigen::VectorXd& lambda_bar_T, const Panel& R,
                                         const TimeMesh& mesh, const PathEnsemble& ensemble);

struct MeanEstimate {
    double value = 0.0;
    double standard_error = 0.0;
};

/// Sample mean of Gamma_{0,T}^pi (should be 1).
[[nodiscard]] MeanEstimate gamma_mean(const Panel& R, const VectorPanel& pi, const TimeMesh& mesh,
                                      const PathEnsemble& ensemble);

/// E(e^{q/(2(q-1)) int R^2 ds} Lambda_bar^q 1{Lambda_bar + int R^2 ds <= n_cap})^{1/q},
/// with a delta-method standard error. Throws ConfigError for q <= 1.
[[nodiscard]] MeanEstimate delta_bound(const Eigen::VectorXd& lambda_bar_T, const Panel& R, double q,
                                       double n_cap, const TimeMesh& mesh);

/// Smallest delta_bound over the q grid.
[[nodiscard]] MeanEstimate delta_bound_min(const Eigen::VectorXd& lambda_bar_T, const Panel& R,
                                           const std::vector<double>& q_grid, double n_cap,
                                           const TimeMesh& mesh);

}  // namespace grbsde
