#include "grbsde/mesh.hpp"

#include <cmath>
#include <string>

#include "grbsde/errors.hpp"

namespace grbsde {

TimeMesh::TimeMesh(std::vector<double> times) : times_(std::move(times)) {
    if (times_.size() < 2) throw ConfigError("mesh needs at least two nodes");
    if (times_.front() != 0.0) throw ConfigError("mesh must start at t = 0");
    for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
        if (!(times_[i + 1] > times_[i]) || !std::isfinite(times_[i + 1])) {
            throw ConfigError("mesh times must increase strictly (node " + std::to_string(i + 1) + ")");
        }
    }
}

Eigen::VectorXd TimeMesh::steps() const {
    Eigen::VectorXd dts(static_cast<Eigen::Index>(n_steps()));
    for (std::size_t i = 0; i < n_steps(); ++i) dts(static_cast<Eigen::Index>(i)) = dt(i);
    return dts;
}

TimeMesh make_mesh(double T, std::size_t n_steps) {
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("mesh horizon T must be positive");
    if (n_steps < 1) throw ConfigError("mesh needs n_steps >= 1");
    std::vector<double> times(n_steps + 1);
    for (std::size_t i = 0; i < n_steps; ++i) {
        times[i] = T * static_cast<double>(i) / static_cast<double>(n_steps);
    }
    times[n_steps] = T;
    return TimeMesh(std::move(times));
}

}  // namespace grbsde
