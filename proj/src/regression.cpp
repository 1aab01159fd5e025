#include "grbsde/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "grbsde/errors.hpp"

namespace grbsde {

RegressionEstimator polynomial_estimator(const std::vector<std::size_t>& indices, int degree,
                                         double ridge) {
    RegressionEstimator est;
    est.ridge = ridge;
    est.basis.emplace_back([](std::span<const double>) { return 1.0; });
    for (const std::size_t k : indices) {
        for (int p = 1; p <= degree; ++p) {
            est.basis.emplace_back([k, p](std::span<const double> s) { return std::pow(s[k], p); });
        }
    }
    return est;
}

RegressionEstimator local_estimator(const std::vector<std::size_t>& indices, int cells, int degree,
                                    double ridge) {
    if (cells < 1) throw ConfigError("local basis needs at least one cell");
    if (degree < 0) throw ConfigError("local basis degree must be >= 0");
    if (indices.empty()) throw ConfigError("local basis needs a state coordinate");
    RegressionEstimator est;
    est.ridge = ridge;
    est.local = LocalCells{indices, cells, degree};
    return est;
}

namespace {

// Columns of the local cells for one slice, appended to `cols`.
void local_columns(const LocalCells& spec, const Eigen::MatrixXd& states, std::vector<Eigen::VectorXd>& cols) {
    const Eigen::Index n = states.rows();
    bool first = true;
    for (const std::size_t k : spec.indices) {
        if (static_cast<Eigen::Index>(k) >= states.cols()) throw ConfigError("local basis index outside the state");
        const Eigen::VectorXd x = states.col(static_cast<Eigen::Index>(k));
        std::vector<double> sorted(x.data(), x.data() + n);
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> cuts;
        for (int j = 1; j < spec.cells; ++j) {
            const double q = sorted[static_cast<std::size_t>((static_cast<Eigen::Index>(j) * n) / spec.cells)];
            if (cuts.empty() || q > cuts.back()) cuts.push_back(q);
        }
        std::vector<std::size_t> cell(static_cast<std::size_t>(n));
        const std::size_t n_cells = cuts.size() + 1;
        std::vector<double> centre(n_cells, 0.0), scale(n_cells, 0.0), count(n_cells, 0.0);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto c = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), x(r)) - cuts.begin());
            cell[static_cast<std::size_t>(r)] = c;
            centre[c] += x(r);
            count[c] += 1.0;
        }
        for (std::size_t c = 0; c < n_cells; ++c) centre[c] = count[c] > 0.0 ? centre[c] / count[c] : 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            const std::size_t c = cell[static_cast<std::size_t>(r)];
            scale[c] = std::max(scale[c], std::abs(x(r) - centre[c]));
        }
        for (std::size_t c = 0; c < n_cells; ++c) {
            for (int m = first || c > 0 ? 0 : 1; m <= spec.degree; ++m) {
                Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
                for (Eigen::Index r = 0; r < n; ++r) {
                    if (cell[static_cast<std::size_t>(r)] != c) continue;
                    const double u = scale[c] > 0.0 ? (x(r) - centre[c]) / scale[c] : 0.0;
                    col(r) = m == 0 ? 1.0 : std::pow(u, m);
                }
                cols.push_back(std::move(col));
            }
        }
        first = false;
    }
}

}  // namespace

RegressionFit::RegressionFit(const RegressionEstimator& estimator, const Eigen::MatrixXd& states) {
    if (estimator.basis.empty() && estimator.local.cells == 0) throw ConfigError("regression basis must be nonempty");
    if (!(estimator.ridge >= 0.0)) throw ConfigError("ridge must be nonnegative");
    const Eigen::Index n = states.rows();
    if (n < 1) throw ConfigError("regression needs at least one path");

    std::vector<Eigen::VectorXd> local;
    if (estimator.local.cells > 0) local_columns(estimator.local, states, local);
    const auto n_local = static_cast<Eigen::Index>(local.size());
    const Eigen::Index p = n_local + static_cast<Eigen::Index>(estimator.basis.size());

    design_.resize(n, p);
    for (Eigen::Index j = 0; j < n_local; ++j) design_.col(j) = local[static_cast<std::size_t>(j)];
    std::vector<double> row(static_cast<std::size_t>(states.cols()));
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < states.cols(); ++c) row[static_cast<std::size_t>(c)] = states(r, c);
        for (Eigen::Index j = n_local; j < p; ++j) {
            design_(r, j) = estimator.basis[static_cast<std::size_t>(j - n_local)](row);
        }
    }

    column_scale_.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double rms = std::sqrt(design_.col(j).squaredNorm() / static_cast<double>(n));
        column_scale_(j) = rms > 0.0 ? 1.0 / rms : 1.0;
    }
    design_ *= column_scale_.asDiagonal();

    gram_ = design_.transpose() * design_ / static_cast<double>(n);
    lambda_ = estimator.ridge > 0.0 ? estimator.ridge : std::numeric_limits<double>::epsilon();
    regularized_.compute(gram_ + lambda_ * Eigen::MatrixXd::Identity(p, p));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    rank_deficient_ = !(lo > 1e-12 * hi);
    condition_ = rank_deficient_ ? std::numeric_limits<double>::infinity() : hi / lo;
}

Eigen::MatrixXd RegressionFit::coefficients(const Eigen::MatrixXd& targets) const {
    if (targets.rows() != design_.rows()) throw ConfigError("regression targets misaligned with states");
    const Eigen::MatrixXd rhs = design_.transpose() * targets / static_cast<double>(design_.rows());
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(design_.cols(), targets.cols());
    for (int it = 0; it < 100; ++it) {
        Eigen::MatrixXd next = regularized_.solve(rhs + lambda_ * beta);
        const double step = (next - beta).cwiseAbs().maxCoeff();
        const double size = next.cwiseAbs().maxCoeff();
        beta = std::move(next);
        if (step <= 1e-15 * (1.0 + size)) break;
    }
    return column_scale_.asDiagonal() * beta;
}

Eigen::MatrixXd RegressionFit::project(const Eigen::MatrixXd& targets) const {
    const Eigen::MatrixXd beta = coefficients(targets);
    return design_ * (column_scale_.cwiseInverse().asDiagonal() * beta);
}

Eigen::VectorXd RegressionFit::project(const Eigen::VectorXd& targets) const {
    const Eigen::MatrixXd fitted = project(Eigen::MatrixXd(targets));
    return fitted.col(0);
}

Eigen::VectorXd RegressionFit::fitted_standard_error(const Eigen::VectorXd& targets,
                                                     const Eigen::VectorXd& fitted) const {
    const Eigen::Index n = design_.rows();
    const auto nd = static_cast<double>(n);
    const Eigen::Index dof = std::max<Eigen::Index>(n - design_.cols(), 1);
    const Eigen::VectorXd resid = targets - fitted;
    const double pooled = resid.squaredNorm() / static_cast<double>(dof);
    const Eigen::Index p = design_.cols();
    const Eigen::MatrixXd ginv = regularized_.solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::VectorXd leverage = (design_ * ginv).cwiseProduct(design_).rowwise().sum() / nd;
    // HC2 weights e^2 / (1 - h); a path that alone pins its fit (h ~ 1) carries
    // no residual, so it gets the pooled variance instead.
    Eigen::VectorXd w(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        w(r) = leverage(r) < 1.0 - 1e-6 ? resid(r) * resid(r) / (1.0 - leverage(r)) : pooled;
    }
    const Eigen::MatrixXd meat = design_.transpose() * w.asDiagonal() * design_ / nd;
    const Eigen::MatrixXd sandwich = ginv * meat * ginv;
    const Eigen::VectorXd var = (design_ * sandwich).cwiseProduct(design_).rowwise().sum() / nd;
    return var.cwiseMax(0.0).cwiseSqrt();
}

Eigen::VectorXd conditional_expectation(const RegressionEstimator& estimator,
                                        const Eigen::MatrixXd& states,
                                        const Eigen::VectorXd& targets) {
    return RegressionFit(estimator, states).project(targets);
}

}  // namespace grbsde
