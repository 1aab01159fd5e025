#pragma once

#include <optional>

#include "grbsde/mesh.hpp"
#include "grbsde/paths.hpp"
#include "grbsde/problem.hpp"
#include "grbsde/regression.hpp"

namespace grbsde {

/// Regression state at a node: [B^1 .. B^d, A, L - B^1, U - B^1]
/// (gap entries are 0 when the barrier is absent).
[[nodiscard]] inline std::size_t regression_state_size(std::size_t d) { return d + 3; }

/// Cubic polynomials in each B component; A and A^2 when A is pathwise; the
/// barrier gaps and their squares for barriers flagged as regression features.
[[nodiscard]] RegressionEstimator default_estimator(const ProblemSpec& spec, const PathEnsemble& ensemble);

/// Explicit backward scheme, no reflection:
///   Y*_i = E(Y_{i+1} | F_i),  Z_i = E((Y_{i+1} - Y*_i) dB_i | F_i) / dt,
///   Y_i = Y*_i + f(Y*_i, Z_i) dt + g(Y*_i) dA_i.
/// With `estimator` empty the default basis is used.
[[nodiscard]] SolutionPanel solve_gbsde(const ProblemSpec& spec, const TimeMesh& mesh,
                                        const PathEnsemble& ensemble,
                                        const std::optional<RegressionEstimator>& estimator = {},
                                        const SolverOptions& options = {});

/// Same candidate, then Y = max(candidate, L), dK+ = Y - candidate.
[[nodiscard]] SolutionPanel solve_grbsde_one_barrier(const ProblemSpec& spec, const TimeMesh& mesh,
                                                     const PathEnsemble& ensemble,
                                                     const std::optional<RegressionEstimator>& estimator = {},
                                                     const SolverOptions& options = {});

/// Y = clamp(candidate, L, U), dK+ = (L - candidate)^+, dK- = (candidate - U)^+.
[[nodiscard]] SolutionPanel solve_grbsde_two_barriers(const ProblemSpec& spec, const TimeMesh& mesh,
                                                      const PathEnsemble& ensemble,
                                                      const std::optional<RegressionEstimator>& estimator = {},
                                                      const SolverOptions& options = {});

/// Penalty instead of projection. The penalty term is taken implicitly:
/// below L, Y = (candidate + p dt L) / (1 + p dt) and dK+ = p dt (L - Y)
/// (mirrored at U). Throws ConfigError for penalty <= 0.
[[nodiscard]] SolutionPanel solve_penalized(const ProblemSpec& spec, const TimeMesh& mesh,
                                            const PathEnsemble& ensemble, double penalty,
                                            const std::optional<RegressionEstimator>& estimator = {},
                                            const SolverOptions& options = {});

/// Excess of one barrier's increments at one step, averaged over the paths
/// where that barrier acts (dK > 0).
struct DkStepExcess {
    std::size_t step = 0;
    bool upper = false;
    std::size_t active_paths = 0;
    double mean_excess = 0.0;
    double mean_se = 0.0;  ///< mean continuation s.e. over the same paths
};

struct DkBoundReport {
    double max_excess_lower = 0.0;  ///< dK+ over its bound, worst path
    double max_excess_upper = 0.0;  ///< dK- over its bound, worst path
    /// Steps whose mean excess exceeds 3 mean s.e. + tol. The regression error
    /// of one cell is shared by all its paths, so the pathwise count below is
    /// a multiple-comparison statistic and only reported.
    std::size_t violations = 0;
    std::size_t path_exceedances = 0;  ///< (step, path) pairs over 3 s.e. + tol
    std::size_t checked = 0;
    std::vector<DkStepExcess> steps;
};

/// dK- <= (f(U, chi) - rho)^+ dt + (g(U) - theta)^+ dA and
/// dK+ <= (-f(L, chi_bar) - rho_bar)^+ dt + (-g(L) - theta_bar)^+ dA, per step.
/// Throws ConfigError when a present barrier lacks its decomposition.
[[nodiscard]] DkBoundReport check_dk_bounds(const SolutionPanel& panel, const ProblemSpec& spec,
                                            const TimeMesh& mesh, const PathEnsemble& ensemble,
                                            double tol = 1e-12);

struct ComparisonReport {
    std::size_t violations = 0;
    std::size_t total = 0;
    double max_excess = 0.0;  ///< max of Y^a - Y^b
    [[nodiscard]] double fraction() const {
        return total == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(total);
    }
};

/// Counts (node, path) with Y^a > Y^b + 3 max(se_a, se_b) + tol.
[[nodiscard]] ComparisonReport compare_solutions(const SolutionPanel& a, const SolutionPanel& b,
                                                 double tol = 1e-12);

}  // namespace grbsde
