#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace dcsr {

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method with
/// potentials, O(n^3)). Returns the column assigned to each row.
std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost);

/// Exact optimal transport between uniform marginals 1/N (rows) and 1/M (columns).
/// Solved as an integer min-cost flow with supplies M per row and demands N per
/// column, so the plan is exact. Returns sum_ij pi_ij cost_ij.
double uniform_transport_cost(const Eigen::MatrixXd& cost);

}  // namespace dcsr
