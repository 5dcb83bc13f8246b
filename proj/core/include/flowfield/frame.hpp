#pragma once

#include <Eigen/Dense>

#include "flowfield/kernel.hpp"

namespace flowfield {

// One time step of the stream: velocity readings at scattered locations.
// locations.count() == velocities.rows(); columns are the d response
// components of one reading.
struct Frame {
  long long t = 0;
  Locations locations;         // n x p
  Eigen::MatrixXd velocities;  // n x d

  Eigen::Index size() const { return locations.count(); }

  // Throws DataError on shape mismatch, empty frames, or non-finite values.
  // Pass expected dims to also pin p and d (-1 skips that check).
  void validate(int expect_p = -1, int expect_d = -1) const;
};

// Row-major stacking: an n x d block becomes a length n*d vector with the d
// components of each row contiguous. Matches obs_covariance's ordering.
Eigen::VectorXd stack_rows(const Eigen::MatrixXd& m);
Eigen::MatrixXd unstack_rows(const Eigen::VectorXd& v, Eigen::Index rows,
                             Eigen::Index cols);

}  // namespace flowfield
