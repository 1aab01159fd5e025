#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>

#include "grbsde/types.hpp"

namespace grbsde {

/// Where a coefficient is evaluated. `path` is npos on trees, where only the
/// state (t, b, a) is available.
struct NodeState {
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    double t = 0.0;
    std::size_t step = 0;
    std::size_t path = npos;
    std::span<const double> b;
    double a = 0.0;
};

/// f(t, y, z), integrated against ds.
using Driver = std::function<double(const NodeState&, double y, std::span<const double> z)>;
/// g(t, y), integrated against dA.
using DaDriver = std::function<double(const NodeState&, double y)>;
using StateFunction = std::function<double(const NodeState&)>;
using VectorStateFunction = std::function<void(const NodeState&, std::span<double> out)>;

/// U = U_0 - V - int rho ds - int theta dA + int chi dB with V increasing
/// (mirrored with bars for L). Empty members count as zero.
struct BarrierDecomposition {
    StateFunction rho;
    StateFunction theta;
    VectorStateFunction chi;
};

struct Barrier {
    StateFunction value;
    std::optional<BarrierDecomposition> decomposition;
    /// Adds the gap (barrier - B^1) to the default regression basis. Off for
    /// barriers affine in B, whose gap is already spanned by the polynomials.
    bool regression_feature = true;
};

struct ProblemSpec {
    Driver f;
    DaDriver g;
    StateFunction terminal;
    std::optional<Barrier> lower;
    std::optional<Barrier> upper;
};

struct SolverDiagnostics {
    /// max over paths of |sum (Y - L) dK+| / (1 + max|Y|), and the U mirror.
    double skorokhod_lower = 0.0;
    double skorokhod_upper = 0.0;
    /// max over steps and paths of min(dK+, dK-).
    double singularity = 0.0;
    std::size_t z_cap_breaches = 0;
    double max_condition = 1.0;
    std::size_t rank_deficient_slices = 0;
};

/// Paths x nodes for Y, Z and the barriers; paths x steps for K increments,
/// assigned to the left endpoint of their step.
struct SolutionPanel {
    Panel Y;
    VectorPanel Z;
    Panel dK_plus;
    Panel dK_minus;
    /// Standard error of the regressed continuation value (zero at T).
    Panel continuation_se;
    Panel L;  ///< -inf when absent
    Panel U;  ///< +inf when absent
    Eigen::VectorXd skorokhod_lower;  ///< per path, sum (Y - L) dK+
    Eigen::VectorXd skorokhod_upper;  ///< per path, sum (U - Y) dK-
    SolverDiagnostics diagnostics;

    [[nodiscard]] double y0() const { return Y.col(0).mean(); }
};

struct SolverOptions {
    double z_cap = 1e3;
    bool corrector = false;
    std::size_t threads = 1;
    double reflection_tol = 1e-12;
};

}  // namespace grbsde
