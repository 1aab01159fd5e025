#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace grbsde {

/// Scalar process sampled on a mesh: one row per path, one column per node
/// (or per step for increment panels). Columns are time slices.
using Panel = Eigen::MatrixXd;

/// d-dimensional process: one Panel per component.
using VectorPanel = std::vector<Panel>;

inline VectorPanel zero_vector_panel(std::size_t dim, Eigen::Index rows, Eigen::Index cols) {
    return VectorPanel(dim, Panel::Zero(rows, cols));
}

}  // namespace grbsde
