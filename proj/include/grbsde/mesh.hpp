#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace grbsde {

/// Partition 0 = t_0 < t_1 < ... < t_n = T.
class TimeMesh {
public:
    /// Throws ConfigError unless times start at 0 and increase strictly.
    explicit TimeMesh(std::vector<double> times);

    [[nodiscard]] std::size_t n_steps() const noexcept { return times_.size() - 1; }
    [[nodiscard]] std::size_t n_nodes() const noexcept { return times_.size(); }
    [[nodiscard]] double horizon() const noexcept { return times_.back(); }
    [[nodiscard]] double time(std::size_t i) const { return times_[i]; }
    [[nodiscard]] double dt(std::size_t i) const { return times_[i + 1] - times_[i]; }
    [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
    [[nodiscard]] Eigen::VectorXd steps() const;

    friend bool operator==(const TimeMesh&, const TimeMesh&) = default;

private:
    std::vector<double> times_;
};

/// Uniform mesh with n_steps intervals of length T / n_steps.
[[nodiscard]] TimeMesh make_mesh(double T, std::size_t n_steps);

}  // namespace grbsde
