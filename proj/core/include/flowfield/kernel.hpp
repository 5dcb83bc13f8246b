#pragma once

#include <Eigen/Dense>
#include <utility>

namespace flowfield {

// Squared-exponential spatial covariance
//   k(x1, x2) = sigma0_sq * exp(-|x1 - x2|^2 / (2 * lengthscale^2)).
// Distances are Euclidean in the location space.
struct RbfKernel {
  double sigma0_sq = 1.0;
  double lengthscale = 1.0;

  RbfKernel() = default;
  RbfKernel(double sigma0_sq_in, double lengthscale_in);
};

// d x d correlation matrix with unit diagonal and a single shared
// off-diagonal value rho. Positive definite exactly when
// -1/(d-1) < rho < 1 (any rho for d == 1).
class Equicorr {
 public:
  Equicorr(double rho, int d);

  double rho() const { return rho_; }
  int dim() const { return d_; }
  Eigen::MatrixXd dense() const;

  // Open lower bound of the positive-definite range; -inf when d == 1.
  static double lower_bound(int d);

 private:
  double rho_;
  int d_;
};

// Ordered set of points, one per row; all rows share the same spatial
// dimension. Order is meaningful: covariance rows/columns follow it.
struct Locations {
  Eigen::MatrixXd points;  // N x p

  Locations() = default;
  explicit Locations(Eigen::MatrixXd pts) : points(std::move(pts)) {}

  Eigen::Index count() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
  bool empty() const { return points.rows() == 0; }

  // This set followed by `tail`, preserving order.
  Locations appended(const Locations& tail) const;
  // Rows [first, count()).
  Locations from_row(Eigen::Index first) const;

  bool same_points(const Locations& other) const;
};

double rbf_eval(const RbfKernel& k, const Eigen::VectorXd& x1,
                const Eigen::VectorXd& x2);

// Cross-covariance matrix [k(z1_i, z2_j)], z1.count() x z2.count().
Eigen::MatrixXd kernel_matrix(const RbfKernel& k, const Locations& z1,
                              const Locations& z2);

// kron(K, Omega) + sigma_sq * I. Vectorization convention: the d response
// components of one location are contiguous, locations in K's order.
Eigen::MatrixXd obs_covariance(const Eigen::MatrixXd& K, const Equicorr& omega,
                               double sigma_sq);

}  // namespace flowfield
