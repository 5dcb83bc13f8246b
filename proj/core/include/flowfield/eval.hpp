#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "flowfield/simulator.hpp"

namespace flowfield {

// Adjusted Rand index between two labelings of the same items (any integer
// labels; invariant to relabeling). Degenerate pairs where the expected and
// maximum index coincide score 1.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// For each label in `assigned`, the most frequent co-occurring label in
// `truth` (ties break to the smaller truth label).
std::map<int, int> majority_label(const std::vector<int>& assigned,
                                  const std::vector<int>& truth);

// Root mean squared error between fitted means and a field evaluated at the
// grid points, over all points and components.
double field_rmse(const Eigen::MatrixXd& grid_points,
                  const Eigen::MatrixXd& fitted_means, const VectorField& field);

}  // namespace flowfield
