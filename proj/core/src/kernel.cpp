#include "flowfield/kernel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

namespace flowfield {

RbfKernel::RbfKernel(double sigma0_sq_in, double lengthscale_in)
    : sigma0_sq(sigma0_sq_in), lengthscale(lengthscale_in) {
  if (!(sigma0_sq > 0.0) || !std::isfinite(sigma0_sq))
    throw std::invalid_argument("RbfKernel: sigma0_sq must be positive");
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
    throw std::invalid_argument("RbfKernel: lengthscale must be positive");
}

Equicorr::Equicorr(double rho, int d) : rho_(rho), d_(d) {
  if (d < 1) throw std::invalid_argument("Equicorr: d must be >= 1");
  if (!std::isfinite(rho)) throw std::invalid_argument("Equicorr: rho must be finite");
  if (!(rho < 1.0) || !(rho > lower_bound(d)))
    throw std::invalid_argument("Equicorr: rho=" + std::to_string(rho) +
                                " outside the positive-definite range for d=" +
                                std::to_string(d));
}

Eigen::MatrixXd Equicorr::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(d_, d_, rho_);
  m.diagonal().setOnes();
  return m;
}

double Equicorr::lower_bound(int d) {
  if (d <= 1) return -std::numeric_limits<double>::infinity();
  return -1.0 / (d - 1);
}

Locations Locations::appended(const Locations& tail) const {
  if (empty()) return tail;
  if (tail.empty()) return *this;
  if (dim() != tail.dim())
    throw std::invalid_argument("Locations::appended: dimension mismatch");
  Locations out;
  out.points.resize(count() + tail.count(), dim());
  out.points.topRows(count()) = points;
  out.points.bottomRows(tail.count()) = tail.points;
  return out;
}

Locations Locations::from_row(Eigen::Index first) const {
  Locations out;
  out.points = points.bottomRows(count() - first);
  return out;
}

bool Locations::same_points(const Locations& other) const {
  return count() == other.count() && dim() == other.dim() &&
         points == other.points;
}

double rbf_eval(const RbfKernel& k, const Eigen::VectorXd& x1,
                const Eigen::VectorXd& x2) {
  if (x1.size() != x2.size())
    throw std::invalid_argument("rbf_eval: input dimension mismatch");
  const double sq = (x1 - x2).squaredNorm();
  return k.sigma0_sq * std::exp(-sq / (2.0 * k.lengthscale * k.lengthscale));
}

Eigen::MatrixXd kernel_matrix(const RbfKernel& k, const Locations& z1,
                              const Locations& z2) {
  if (z1.empty() || z2.empty())
    throw std::invalid_argument("kernel_matrix: empty location set");
  if (z1.dim() != z2.dim())
    throw std::invalid_argument("kernel_matrix: location dimension mismatch");
  const Eigen::Index n1 = z1.count(), n2 = z2.count();
  // |a-b|^2 = |a|^2 + |b|^2 - 2 a.b, evaluated as one GEMM.
  Eigen::VectorXd s1 = z1.points.rowwise().squaredNorm();
  Eigen::VectorXd s2 = z2.points.rowwise().squaredNorm();
  Eigen::MatrixXd sq = s1.replicate(1, n2) + s2.transpose().replicate(n1, 1) -
                       2.0 * (z1.points * z2.points.transpose());
  sq = sq.cwiseMax(0.0);  // rounding can push tiny distances negative
  const double inv = -1.0 / (2.0 * k.lengthscale * k.lengthscale);
  return k.sigma0_sq * (inv * sq.array()).exp().matrix();
}

Eigen::MatrixXd obs_covariance(const Eigen::MatrixXd& K, const Equicorr& omega,
                               double sigma_sq) {
  if (K.rows() != K.cols())
    throw std::invalid_argument("obs_covariance: K must be square");
  if (sigma_sq < 0.0 || !std::isfinite(sigma_sq))
    throw std::invalid_argument("obs_covariance: sigma_sq must be >= 0");
  Eigen::MatrixXd c = Eigen::kroneckerProduct(K, omega.dense());
  c.diagonal().array() += sigma_sq;
  return c;
}

}  // namespace flowfield
