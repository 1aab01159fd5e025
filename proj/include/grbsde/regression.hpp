#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

namespace grbsde {

/// Feature map evaluated on one path's state vector.
using BasisFunction = std::function<double(std::span<const double> state)>;

/// Piecewise polynomials whose cells are chosen per slice: each listed state
/// coordinate is cut at its empirical quantiles into `cells` cells of equal
/// path count, and each cell carries 1, u, ..., u^degree with u the
/// coordinate centred and scaled within the cell. Off when cells == 0.
struct LocalCells {
    std::vector<std::size_t> indices;
    int cells = 0;
    int degree = 2;
};

/// Least-squares proxy for E(. | F_t): projection onto span(basis(state)),
/// plus the local cell columns when enabled.
struct RegressionEstimator {
    std::vector<BasisFunction> basis;
    double ridge = 1e-8;
    LocalCells local;
};

/// 1, x_k, x_k^2, ..., x_k^degree for each state index k in `indices` (no
/// cross terms), constant listed once.
[[nodiscard]] RegressionEstimator polynomial_estimator(const std::vector<std::size_t>& indices,
                                                       int degree, double ridge = 1e-8);

/// Equal-count local polynomials in the listed coordinates (see LocalCells).
/// Cell indicators sum to one, so after the first coordinate each one drops
/// the constant of its first cell.
[[nodiscard]] RegressionEstimator local_estimator(const std::vector<std::size_t>& indices, int cells, int degree,
                                                  double ridge = 1e-8);

/// Fitted projection for one time slice. The design matrix is column-scaled
/// and solved by iterated Tikhonov on the normal equations: every solve is
/// well posed (the ridge keeps rank-deficient designs finite) and the
/// iteration converges to the minimum-norm least-squares fit, so targets in
/// the span are reproduced exactly.
class RegressionFit {
public:
    /// `states` is paths x state_dim.
    RegressionFit(const RegressionEstimator& estimator, const Eigen::MatrixXd& states);

    /// Fitted values for each column of `targets` (paths x m).
    [[nodiscard]] Eigen::MatrixXd project(const Eigen::MatrixXd& targets) const;
    [[nodiscard]] Eigen::VectorXd project(const Eigen::VectorXd& targets) const;

    /// Coefficients in the original (unscaled) basis.
    [[nodiscard]] Eigen::MatrixXd coefficients(const Eigen::MatrixXd& targets) const;

    /// Standard error of the fitted value per path, heteroscedasticity-robust
    /// (sandwich form with residuals weighted per path).
    [[nodiscard]] Eigen::VectorXd fitted_standard_error(const Eigen::VectorXd& targets,
                                                        const Eigen::VectorXd& fitted) const;

    /// lambda_max / lambda_min of the scaled Gram matrix (inf when singular).
    [[nodiscard]] double condition_number() const noexcept { return condition_; }
    [[nodiscard]] bool rank_deficient() const noexcept { return rank_deficient_; }
    [[nodiscard]] Eigen::Index n_basis() const noexcept { return design_.cols(); }

private:
    Eigen::MatrixXd design_;       // scaled, paths x p
    Eigen::VectorXd column_scale_;
    Eigen::LLT<Eigen::MatrixXd> regularized_;
    Eigen::MatrixXd gram_;
    double lambda_ = 0.0;
    double condition_ = 1.0;
    bool rank_deficient_ = false;
};

/// Fitted values of `targets` projected on basis(states).
[[nodiscard]] Eigen::VectorXd conditional_expectation(const RegressionEstimator& estimator,
                                                      const Eigen::MatrixXd& states,
                                                      const Eigen::VectorXd& targets);

}  // namespace grbsde
