#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "flowfield/frame.hpp"
#include "flowfield/kernel.hpp"

namespace flowfield {

// Hyperparameters shared by every cluster's field model.
struct MrgpParams {
  RbfKernel kernel;
  double sigma_sq = 1.0;  // observation noise variance, may be 0
  int d = 2;              // response components per location
  // Per-cluster point budget; absorbing past it evicts whole oldest frames
  // (never below one frame). Empty = unbounded.
  std::optional<Eigen::Index> point_cap;
  // Permit the repeated-locations closed form (d == 1 only).
  bool allow_spectral = true;

  // Diagonal stabilizer added to predictive covariances before factorization.
  double jitter() const { return 1e-9 * kernel.sigma0_sq; }

  void validate() const;  // throws std::invalid_argument
};

// Posterior of the latent field at query locations: mean is m x d, cov is
// the md x md joint covariance in stack_rows order.
struct FieldEstimate {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd cov;
};

struct RhoEstimate {
  double rho = 0.0;
  // False when d == 1: one response component has no cross-correlation.
  bool applicable = true;
};

// log N(x | mean, cov) via Cholesky; throws NumericalError if cov is not
// positive definite or any input is non-finite.
double gaussian_loglik(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov);

// Inverse of C = ones*ones^T kron K + sigma_sq I (N_rep repeats of one
// N-point block, block-major order) held in factored form:
//   C^-1 = U diag(d) U^T + I / sigma_sq,  u_i = ones kron v_i / sqrt(N_rep),
//   d_i = -N_rep lambda_i / (sigma_sq (N_rep lambda_i + sigma_sq)),
// where (lambda_i, v_i) eigendecompose K. Apply is O(N^2 + N N_rep).
class SpectralInverse {
 public:
  SpectralInverse(Eigen::VectorXd eigenvalues, Eigen::MatrixXd eigenvectors,
                  Eigen::Index repeat_count, double sigma_sq);

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd d_diag() const;
  Eigen::MatrixXd u_matrix() const;  // N*N_rep x N, materialized (tests)
  // Eigenvalues of C itself: {N_rep lambda_i + sigma_sq} plus sigma_sq with
  // multiplicity N (N_rep - 1), ascending.
  Eigen::VectorXd cov_eigenvalues() const;
  Eigen::MatrixXd dense() const;  // materializes C^-1 (small sizes/tests)
  Eigen::Index block_size() const { return n_; }
  Eigen::Index repeat_count() const { return n_rep_; }

 private:
  Eigen::VectorXd eigvals_;  // of K, ascending
  Eigen::MatrixXd eigvecs_;
  Eigen::Index n_, n_rep_;
  double sigma_sq_;
};

// One discovered field pattern: the observations assigned to it plus the
// cached inverse observation covariance that keeps queries cheap. Value
// type; the engine owns and mutates its copies.
class ClusterModel {
 public:
  ClusterModel(MrgpParams params, double rho, long long created_at);

  const MrgpParams& params() const { return params_; }
  double rho() const { return rho_; }
  long long created_at() const { return created_at_; }
  int frame_count() const { return static_cast<int>(frame_sizes_.size()); }
  Eigen::Index point_count() const { return locs_.count(); }
  bool empty() const { return frame_sizes_.empty(); }
  const Locations& locations() const { return locs_; }
  const Eigen::VectorXd& obs() const { return obs_; }

  // Only before the first frame is absorbed; later the cached inverse would
  // no longer match. Throws std::logic_error otherwise.
  void set_rho(double rho);

  // True while the repeated-locations closed form is in use.
  bool spectral_active() const { return spectral_; }

  // The cached (point_count*d)^2 inverse covariance; materialized on demand
  // in spectral mode. Empty matrix when no frames are absorbed.
  Eigen::MatrixXd lambda() const;

  // Latent-field posterior at `query`; with_noise adds sigma_sq I (the
  // predictive observation covariance). No jitter is added here.
  FieldEstimate posterior_field(const Locations& query, bool with_noise) const;

  // log-density of the frame's stacked velocities under the predictive
  // distribution at its locations (jitter applied before factorization).
  double predictive_loglik(const Frame& frame) const;

  // Sum of log-eigenvalues of the current observation covariance (spectral
  // mode only; used to cross-check the factored form).
  double spectral_logdet() const;

  // In-place absorption; schur_extend is the copying form. A rho override
  // re-freezes rho for the new blocks (existing blocks keep the covariances
  // they were built with).
  void absorb_frame(const Frame& frame,
                    std::optional<double> rho_override = std::nullopt);

 private:
  void absorb_base(const Frame& frame);
  void absorb_schur(const Frame& frame, double block_rho);
  void rebuild_dense();    // recompute lambda_ from scratch at current rho_
  void demote_spectral();  // materialize spectral state into lambda_
  void enforce_cap();
  void refresh_weights();

  MrgpParams params_;
  double rho_;
  long long created_at_;
  Locations locs_;
  Eigen::VectorXd obs_;  // stacked velocities, absorption order
  std::vector<Eigen::Index> frame_sizes_;

  // Dense path: lambda_ == (K(Z,Z) kron Omega + sigma_sq I)^-1.
  Eigen::MatrixXd lambda_;
  Eigen::VectorXd weights_;  // lambda_ * obs_

  // Spectral path (d == 1, every frame at the same locations).
  bool spectral_ = false;
  Eigen::VectorXd spec_eigvals_;
  Eigen::MatrixXd spec_eigvecs_;
  Eigen::VectorXd spec_sum_;      // sum of absorbed frame vectors
  Eigen::VectorXd spec_weights_;  // V diag(d) V^T s + s / sigma_sq
};

// Unclamped moment-match ratio <A,B> / <A,A>: the exact minimizer of
// rho -> |rho A - B|_F^2. Throws std::invalid_argument when <A,A> = 0.
double rho_projection(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Moment-matched estimate of the response cross-correlation from one frame:
// rho_projection of A = K kron (ones*ones^T - I) against
// B = (x - xbar)(x - xbar)^T / (nd) - sigma_sq I - K kron I, clamped into
// the positive-definite range with a 1e-6 margin. xbar is the length-(n*d)
// reference mean subtracted from the stacked velocities (a zero vector when
// no posterior mean is available).
RhoEstimate estimate_rho(const MrgpParams& params, const Frame& frame,
                         const Eigen::VectorXd& xbar);
RhoEstimate estimate_rho(const ClusterModel& c, const Frame& frame,
                         const Eigen::VectorXd& xbar);

// New model with `frame` absorbed. The cached inverse is extended by block
// inversion: with A12 = K(Z_old, Z_new) kron Omega and A22 the new block's
// observation covariance,
//   P = Lambda_old A12, S = A22 - A12^T P, Lambda22 = S^-1,
//   Lambda12 = -P Lambda22, Lambda11 = Lambda_old + P Lambda22 P^T.
// If S fails to factor, falls back to one dense inversion of the full
// covariance and logs a warning.
ClusterModel schur_extend(const ClusterModel& c, const Frame& frame);
ClusterModel schur_extend(const ClusterModel& c, const Frame& frame,
                          double rho_override);

}  // namespace flowfield
