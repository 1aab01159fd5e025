#pragma once

#include <cmath>
#include <cstddef>

namespace grbsde {

/// Recombining scaled random walk on [0, T]: level i holds i + 1 states
/// (2j - i) sqrt(dt), j = 0..i, each branch with probability 1/2.
class BinomialTree {
public:
    BinomialTree(double T, std::size_t n_steps);

    [[nodiscard]] double horizon() const noexcept { return T_; }
    [[nodiscard]] std::size_t n_steps() const noexcept { return n_; }
    [[nodiscard]] double dt() const noexcept { return dt_; }
    [[nodiscard]] double time(std::size_t level) const noexcept {
        return T_ * static_cast<double>(level) / static_cast<double>(n_);
    }
    [[nodiscard]] double state(std::size_t level, std::size_t j) const noexcept {
        return (2.0 * static_cast<double>(j) - static_cast<double>(level)) * std::sqrt(dt_);
    }
    /// Probability of reaching node j at `level` from the root: C(level, j) / 2^level.
    [[nodiscard]] double reach_probability(std::size_t level, std::size_t j) const;
    [[nodiscard]] std::size_t node_count() const noexcept { return (n_ + 1) * (n_ + 2) / 2; }

    static constexpr double branch_probability = 0.5;

private:
    double T_;
    std::size_t n_;
    double dt_;
};

/// Throws ConfigError for d != 1 (trees are one-dimensional only).
[[nodiscard]] BinomialTree binomial_tree(double T, std::size_t n_steps, std::size_t d = 1);

}  // namespace grbsde
