#include "flowfield/mrgp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "flowfield/errors.hpp"
#include "flowfield/log.hpp"

namespace flowfield {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

// d_i = -N_rep lambda_i / (sigma_sq (N_rep lambda_i + sigma_sq))
Eigen::VectorXd spectral_d_diag(const Eigen::VectorXd& eigvals,
                                Eigen::Index n_rep, double sigma_sq) {
  Eigen::ArrayXd lam = eigvals.array();
  return (-(static_cast<double>(n_rep) * lam) /
          (sigma_sq * (static_cast<double>(n_rep) * lam + sigma_sq)))
      .matrix();
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

// Inverse of a symmetric positive-definite matrix via Cholesky, with one
// jittered retry. Returns false if both attempts fail.
bool spd_inverse(const Eigen::MatrixXd& m, double jitter, Eigen::MatrixXd* out) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    Eigen::MatrixXd mj = m;
    mj.diagonal().array() += jitter;
    llt.compute(mj);
    if (llt.info() != Eigen::Success) return false;
    log::warn("spd_inverse: added diagonal jitter to recover definiteness");
  }
  *out = symmetrized(
      llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols())));
  return true;
}

}  // namespace

void MrgpParams::validate() const {
  RbfKernel check(kernel.sigma0_sq, kernel.lengthscale);  // range checks
  if (d < 1) throw std::invalid_argument("MrgpParams: d must be >= 1");
  if (sigma_sq < 0.0 || !std::isfinite(sigma_sq))
    throw std::invalid_argument("MrgpParams: sigma_sq must be >= 0");
  if (point_cap && *point_cap < 1)
    throw std::invalid_argument("MrgpParams: point_cap must be >= 1");
}

double gaussian_loglik(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov) {
  const Eigen::Index k = x.size();
  if (mean.size() != k || cov.rows() != k || cov.cols() != k)
    throw std::invalid_argument("gaussian_loglik: size mismatch");
  if (!x.allFinite() || !mean.allFinite() || !cov.allFinite())
    throw NumericalError("gaussian_loglik: non-finite input");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("gaussian_loglik: covariance not positive definite");
  const auto& L = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double lii = L(i, i);
    if (!(lii > 0.0))
      throw NumericalError("gaussian_loglik: covariance not positive definite");
    logdet += 2.0 * std::log(lii);
  }
  const double quad = L.solve(x - mean).squaredNorm();
  return -0.5 * (static_cast<double>(k) * kLog2Pi + logdet + quad);
}

SpectralInverse::SpectralInverse(Eigen::VectorXd eigenvalues,
                                 Eigen::MatrixXd eigenvectors,
                                 Eigen::Index repeat_count, double sigma_sq)
    : eigvals_(std::move(eigenvalues)),
      eigvecs_(std::move(eigenvectors)),
      n_(eigvals_.size()),
      n_rep_(repeat_count),
      sigma_sq_(sigma_sq) {
  if (eigvecs_.rows() != n_ || eigvecs_.cols() != n_)
    throw std::invalid_argument("SpectralInverse: eigenvector shape mismatch");
  if (n_rep_ < 1)
    throw std::invalid_argument("SpectralInverse: repeat_count must be >= 1");
  if (!(sigma_sq_ > 0.0))
    throw std::invalid_argument("SpectralInverse: sigma_sq must be > 0");
}

Eigen::VectorXd SpectralInverse::apply(const Eigen::VectorXd& x) const {
  if (x.size() != n_ * n_rep_)
    throw std::invalid_argument("SpectralInverse::apply: size mismatch");
  Eigen::VectorXd block_sum = Eigen::VectorXd::Zero(n_);
  for (Eigen::Index b = 0; b < n_rep_; ++b) block_sum += x.segment(b * n_, n_);
  const Eigen::VectorXd dd = spectral_d_diag(eigvals_, n_rep_, sigma_sq_);
  const Eigen::VectorXd proj = eigvecs_.transpose() * block_sum;
  // U diag(d) U^T x has identical blocks (1/n_rep) V diag(d) V^T block_sum.
  const Eigen::VectorXd shared =
      eigvecs_ * (dd.array() * proj.array()).matrix() / static_cast<double>(n_rep_);
  Eigen::VectorXd out(n_ * n_rep_);
  for (Eigen::Index b = 0; b < n_rep_; ++b)
    out.segment(b * n_, n_) = shared + x.segment(b * n_, n_) / sigma_sq_;
  return out;
}

Eigen::VectorXd SpectralInverse::d_diag() const {
  return spectral_d_diag(eigvals_, n_rep_, sigma_sq_);
}

Eigen::MatrixXd SpectralInverse::u_matrix() const {
  Eigen::MatrixXd u(n_ * n_rep_, n_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_rep_));
  for (Eigen::Index b = 0; b < n_rep_; ++b)
    u.middleRows(b * n_, n_) = scale * eigvecs_;
  return u;
}

Eigen::VectorXd SpectralInverse::cov_eigenvalues() const {
  Eigen::VectorXd out(n_ * n_rep_);
  out.head(n_ * (n_rep_ - 1)).setConstant(sigma_sq_);
  out.tail(n_) =
      (static_cast<double>(n_rep_) * eigvals_.array() + sigma_sq_).matrix();
  std::sort(out.data(), out.data() + out.size());
  return out;
}

Eigen::MatrixXd SpectralInverse::dense() const {
  const Eigen::VectorXd dd = spectral_d_diag(eigvals_, n_rep_, sigma_sq_);
  const Eigen::MatrixXd shared =
      eigvecs_ * dd.asDiagonal() * eigvecs_.transpose() /
      static_cast<double>(n_rep_);
  Eigen::MatrixXd out = Eigen::kroneckerProduct(
      Eigen::MatrixXd::Ones(n_rep_, n_rep_), shared);
  out.diagonal().array() += 1.0 / sigma_sq_;
  return symmetrized(out);
}

ClusterModel::ClusterModel(MrgpParams params, double rho, long long created_at)
    : params_(std::move(params)), rho_(rho), created_at_(created_at) {
  params_.validate();
  Equicorr check(rho_, params_.d);  // range check
}

void ClusterModel::set_rho(double rho) {
  if (!empty())
    throw std::logic_error("ClusterModel::set_rho: frames already absorbed");
  Equicorr check(rho, params_.d);
  rho_ = rho;
}

Eigen::MatrixXd ClusterModel::lambda() const {
  if (empty()) return Eigen::MatrixXd();
  if (spectral_)
    return SpectralInverse(spec_eigvals_, spec_eigvecs_,
                           static_cast<Eigen::Index>(frame_sizes_.size()),
                           params_.sigma_sq)
        .dense();
  return lambda_;
}

double ClusterModel::spectral_logdet() const {
  if (!spectral_)
    throw std::logic_error("spectral_logdet: cluster is not in spectral mode");
  return SpectralInverse(spec_eigvals_, spec_eigvecs_,
                         static_cast<Eigen::Index>(frame_sizes_.size()),
                         params_.sigma_sq)
      .cov_eigenvalues()
      .array()
      .log()
      .sum();
}

FieldEstimate ClusterModel::posterior_field(const Locations& query,
                                            bool with_noise) const {
  const int d = params_.d;
  const Eigen::Index m = query.count();
  const Equicorr omega(rho_, d);
  Eigen::MatrixXd kzz = kernel_matrix(params_.kernel, query, query);

  FieldEstimate est;
  if (empty()) {
    est.mean = Eigen::MatrixXd::Zero(m, d);
    est.cov = Eigen::kroneckerProduct(kzz, omega.dense());
  } else if (spectral_) {
    // d == 1: A = K(query, Z); mu = A w; Sigma = Kzz - N_rep (AV) D (AV)^T
    // - (N_rep / sigma_sq) A A^T.
    const Eigen::Index n_rep = static_cast<Eigen::Index>(frame_sizes_.size());
    Locations base;
    base.points = locs_.points.topRows(spec_eigvals_.size());
    const Eigen::MatrixXd a = kernel_matrix(params_.kernel, query, base);
    est.mean = a * spec_weights_;
    const Eigen::MatrixXd g = a * spec_eigvecs_;
    const Eigen::VectorXd dd =
        spectral_d_diag(spec_eigvals_, n_rep, params_.sigma_sq);
    est.cov = kzz -
              static_cast<double>(n_rep) * g * dd.asDiagonal() * g.transpose() -
              (static_cast<double>(n_rep) / params_.sigma_sq) * a * a.transpose();
  } else {
    const Eigen::MatrixXd b = Eigen::kroneckerProduct(
        kernel_matrix(params_.kernel, query, locs_), omega.dense());
    est.mean = unstack_rows(b * weights_, m, d);
    est.cov = Eigen::kroneckerProduct(kzz, omega.dense()) -
              b * (lambda_.selfadjointView<Eigen::Lower>() * b.transpose());
  }
  est.cov = symmetrized(est.cov);
  if (with_noise) est.cov.diagonal().array() += params_.sigma_sq;
  return est;
}

double ClusterModel::predictive_loglik(const Frame& frame) const {
  frame.validate(-1, params_.d);
  FieldEstimate est = posterior_field(frame.locations, /*with_noise=*/true);
  est.cov.diagonal().array() += params_.jitter();
  return gaussian_loglik(stack_rows(frame.velocities), stack_rows(est.mean),
                         est.cov);
}

void ClusterModel::absorb_frame(const Frame& frame,
                                std::optional<double> rho_override) {
  frame.validate(-1, params_.d);
  if (!locs_.empty() && frame.locations.dim() != locs_.dim())
    throw DataError("cluster: frame location dimension mismatch");
  if (rho_override) {
    Equicorr check(*rho_override, params_.d);
    rho_ = *rho_override;
  }

  if (empty()) {
    absorb_base(frame);
  } else if (spectral_) {
    Locations base;
    base.points = locs_.points.topRows(spec_eigvals_.size());
    if (frame.locations.same_points(base)) {
      locs_ = locs_.appended(frame.locations);
      const Eigen::VectorXd x = stack_rows(frame.velocities);
      Eigen::VectorXd grown(obs_.size() + x.size());
      grown << obs_, x;
      obs_ = std::move(grown);
      frame_sizes_.push_back(frame.size());
      spec_sum_ += x;
      refresh_weights();
    } else {
      demote_spectral();
      absorb_schur(frame, rho_);
    }
  } else {
    absorb_schur(frame, rho_);
  }
  enforce_cap();
}

void ClusterModel::absorb_base(const Frame& frame) {
  locs_ = frame.locations;
  obs_ = stack_rows(frame.velocities);
  frame_sizes_.assign(1, frame.size());

  if (params_.d == 1 && params_.allow_spectral && params_.sigma_sq > 0.0) {
    const Eigen::MatrixXd k = kernel_matrix(params_.kernel, locs_, locs_);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    if (es.info() == Eigen::Success) {
      spectral_ = true;
      spec_eigvals_ = es.eigenvalues();
      spec_eigvecs_ = es.eigenvectors();
      spec_sum_ = obs_;
      refresh_weights();
      return;
    }
    log::warn("cluster: eigendecomposition failed, using dense inverse");
  }
  rebuild_dense();
}

void ClusterModel::absorb_schur(const Frame& frame, double block_rho) {
  const int d = params_.d;
  const Equicorr omega(block_rho, d);
  const Eigen::Index n_new = frame.size() * d;
  const Eigen::MatrixXd a12 = Eigen::kroneckerProduct(
      kernel_matrix(params_.kernel, locs_, frame.locations), omega.dense());
  const Eigen::MatrixXd a22 = obs_covariance(
      kernel_matrix(params_.kernel, frame.locations, frame.locations), omega,
      params_.sigma_sq);

  const Eigen::MatrixXd p = lambda_.selfadjointView<Eigen::Lower>() * a12;
  const Eigen::MatrixXd s = symmetrized(a22 - a12.transpose() * p);

  Eigen::MatrixXd lam22;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  const bool schur_ok = llt.info() == Eigen::Success;
  if (schur_ok)
    lam22 = symmetrized(llt.solve(Eigen::MatrixXd::Identity(n_new, n_new)));

  const Eigen::Index n_old = obs_.size();
  locs_ = locs_.appended(frame.locations);
  const Eigen::VectorXd x = stack_rows(frame.velocities);
  Eigen::VectorXd grown(n_old + n_new);
  grown << obs_, x;
  obs_ = std::move(grown);
  frame_sizes_.push_back(frame.size());

  if (!schur_ok) {
    // The Schur complement lost definiteness (near-duplicate locations or
    // tiny noise). Rebuild from the full covariance; existing blocks are
    // recovered from the cached inverse so earlier rho values survive.
    log::warn("cluster t=" + std::to_string(created_at_) +
              ": Schur step failed, re-inverting the full covariance");
    Eigen::MatrixXd c11;
    if (!spd_inverse(lambda_, params_.jitter(), &c11))
      throw NumericalError("cluster: cached inverse is not positive definite");
    Eigen::MatrixXd c(n_old + n_new, n_old + n_new);
    c.topLeftCorner(n_old, n_old) = c11;
    c.topRightCorner(n_old, n_new) = a12;
    c.bottomLeftCorner(n_new, n_old) = a12.transpose();
    c.bottomRightCorner(n_new, n_new) = a22;
    if (!spd_inverse(c, params_.jitter(), &lambda_))
      throw NumericalError("cluster: extended covariance is not positive definite");
    refresh_weights();
    return;
  }

  const Eigen::MatrixXd pl = p * lam22;
  Eigen::MatrixXd lam(n_old + n_new, n_old + n_new);
  lam.topLeftCorner(n_old, n_old) = lambda_ + pl * p.transpose();
  lam.topRightCorner(n_old, n_new) = -pl;
  lam.bottomLeftCorner(n_new, n_old) = -pl.transpose();
  lam.bottomRightCorner(n_new, n_new) = lam22;
  lambda_ = symmetrized(lam);
  refresh_weights();
}

void ClusterModel::rebuild_dense() {
  const Eigen::MatrixXd c = obs_covariance(
      kernel_matrix(params_.kernel, locs_, locs_), Equicorr(rho_, params_.d),
      params_.sigma_sq);
  if (!spd_inverse(c, params_.jitter(), &lambda_))
    throw NumericalError("cluster: observation covariance is not positive definite");
  spectral_ = false;
  refresh_weights();
}

void ClusterModel::demote_spectral() {
  lambda_ = SpectralInverse(spec_eigvals_, spec_eigvecs_,
                            static_cast<Eigen::Index>(frame_sizes_.size()),
                            params_.sigma_sq)
                .dense();
  spectral_ = false;
  spec_eigvals_.resize(0);
  spec_eigvecs_.resize(0, 0);
  spec_sum_.resize(0);
  spec_weights_.resize(0);
  refresh_weights();
}

void ClusterModel::enforce_cap() {
  if (!params_.point_cap) return;
  bool dropped = false;
  while (point_count() > *params_.point_cap && frame_sizes_.size() > 1) {
    const Eigen::Index n0 = frame_sizes_.front();
    if (spectral_) spec_sum_ -= obs_.head(n0);
    locs_ = locs_.from_row(n0);
    obs_ = obs_.tail(obs_.size() - n0 * params_.d).eval();
    frame_sizes_.erase(frame_sizes_.begin());
    dropped = true;
  }
  if (!dropped) return;
  log::debug("cluster t=" + std::to_string(created_at_) +
             ": evicted oldest frames to stay within the point cap");
  if (spectral_) {
    refresh_weights();
  } else {
    // Dense rebuild at the current rho; with per-frame re-estimation this
    // collapses the surviving blocks onto the latest value.
    rebuild_dense();
  }
}

void ClusterModel::refresh_weights() {
  if (spectral_) {
    const Eigen::Index n_rep = static_cast<Eigen::Index>(frame_sizes_.size());
    const Eigen::VectorXd dd =
        spectral_d_diag(spec_eigvals_, n_rep, params_.sigma_sq);
    const Eigen::VectorXd proj = spec_eigvecs_.transpose() * spec_sum_;
    spec_weights_ = spec_eigvecs_ * (dd.array() * proj.array()).matrix() +
                    spec_sum_ / params_.sigma_sq;
  } else if (lambda_.size() > 0) {
    weights_ = lambda_.selfadjointView<Eigen::Lower>() * obs_;
  }
}

double rho_projection(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("rho_projection: shape mismatch");
  const double den = a.array().square().sum();
  if (!(den > 0.0))
    throw std::invalid_argument("rho_projection: A has no mass");
  return (a.array() * b.array()).sum() / den;
}

RhoEstimate estimate_rho(const MrgpParams& params, const Frame& frame,
                         const Eigen::VectorXd& xbar) {
  const int d = params.d;
  if (d == 1) return {0.0, false};
  frame.validate(-1, d);
  const Eigen::Index nd = frame.size() * d;
  if (xbar.size() != nd)
    throw std::invalid_argument("estimate_rho: xbar size mismatch");

  const Eigen::VectorXd e = stack_rows(frame.velocities) - xbar;
  const Eigen::MatrixXd k =
      kernel_matrix(params.kernel, frame.locations, frame.locations);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(d, d);
  mask.diagonal().setZero();

  // A carries the rho-linear part of the covariance model, B the residual
  // second moment the model must explain.
  const Eigen::MatrixXd a = Eigen::kroneckerProduct(k, mask);
  Eigen::MatrixXd b = e * e.transpose() / static_cast<double>(nd);
  b -= Eigen::kroneckerProduct(k, Eigen::MatrixXd::Identity(d, d));
  b.diagonal().array() -= params.sigma_sq;

  const double raw = rho_projection(a, b);
  constexpr double kMargin = 1e-6;
  const double lo = Equicorr::lower_bound(d) + kMargin;
  const double hi = 1.0 - kMargin;
  return {std::min(hi, std::max(lo, raw)), true};
}

RhoEstimate estimate_rho(const ClusterModel& c, const Frame& frame,
                         const Eigen::VectorXd& xbar) {
  return estimate_rho(c.params(), frame, xbar);
}

ClusterModel schur_extend(const ClusterModel& c, const Frame& frame) {
  ClusterModel out = c;
  out.absorb_frame(frame, std::nullopt);
  return out;
}

ClusterModel schur_extend(const ClusterModel& c, const Frame& frame,
                          double rho_override) {
  ClusterModel out = c;
  out.absorb_frame(frame, rho_override);
  return out;
}

}  // namespace flowfield
