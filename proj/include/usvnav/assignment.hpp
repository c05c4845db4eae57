// Minimum-cost one-to-one assignment (Hungarian method, O(n^3)).
#pragma once

#include <Eigen/Core>

#include <vector>

namespace usvnav::perception {

struct Assignment {
  /// col_of_row[i] is the column assigned to row i.
  std::vector<int> col_of_row;
  double total_cost = 0.0;
};

/// Solves the square assignment problem. Throws std::invalid_argument for a
/// non-square or non-finite cost matrix.
Assignment solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace usvnav::perception
