#include "flowfield/ihmm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "flowfield/errors.hpp"

namespace flowfield {

HmmCounts::HmmCounts(double alpha, double gamma) : alpha_(alpha), gamma_(gamma) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("HmmCounts: alpha must be positive");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("HmmCounts: gamma must be positive");
  n_ = CountMatrix::Zero(1, 1);
  m_ = CountVector::Zero(1);
  m_(0) = 1;
  visits_ = CountVector::Zero(1);
  visits_(0) = 1;
}

void HmmCounts::update(int s_next, int o_next) {
  const int k = k_tilde();
  if (s_next < 0 || s_next > k)
    throw std::invalid_argument("HmmCounts::update: state " +
                                std::to_string(s_next) + " out of range");
  if (o_next != 0 && o_next != 1)
    throw std::invalid_argument("HmmCounts::update: oracle bit must be 0 or 1");
  if (s_next == k) {
    n_.conservativeResize(k + 1, k + 1);
    n_.row(k).setZero();
    n_.col(k).setZero();
    m_.conservativeResize(k + 1);
    m_(k) = 0;
    visits_.conservativeResize(k + 1);
    visits_(k) = 0;
  }
  if (o_next == 0)
    n_(current_, s_next) += 1;
  else
    m_(s_next) += 1;
  visits_(s_next) += 1;
  current_ = s_next;
  steps_ += 1;
}

Eigen::VectorXd transition_prior(const HmmCounts& c) {
  const int k = c.k_tilde();
  const int i = c.current_state();
  const double alpha = c.alpha(), gamma = c.gamma();
  const double row_sum = static_cast<double>(c.n().row(i).sum());
  const double m_sum = static_cast<double>(c.m().sum());
  const double denom = row_sum + alpha;
  const double q_denom = m_sum + gamma;

  Eigen::VectorXd prior(k + 1);
  for (int j = 0; j < k; ++j)
    prior(j) = (static_cast<double>(c.n()(i, j)) +
                alpha * static_cast<double>(c.m()(j)) / q_denom) /
               denom;
  prior(k) = alpha * gamma / (denom * q_denom);
  return prior;
}

StateDecision state_posterior(const Eigen::VectorXd& prior,
                              const Eigen::VectorXd& logliks) {
  const Eigen::Index k = prior.size();
  if (logliks.size() != k || k == 0)
    throw std::invalid_argument("state_posterior: length mismatch");
  if (prior.minCoeff() < 0.0 || !prior.allFinite())
    throw std::invalid_argument("state_posterior: prior must be nonnegative");
  for (Eigen::Index j = 0; j < k; ++j)
    if (std::isnan(logliks(j)) || logliks(j) == std::numeric_limits<double>::infinity())
      throw NumericalError("state_posterior: invalid log-likelihood");

  double max_ll = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < k; ++j)
    if (prior(j) > 0.0 && logliks(j) > max_ll) max_ll = logliks(j);
  if (!std::isfinite(max_ll))
    throw NumericalError("state_posterior: no candidate has positive mass");

  Eigen::VectorXd w(k);
  for (Eigen::Index j = 0; j < k; ++j)
    w(j) = prior(j) > 0.0 ? prior(j) * std::exp(logliks(j) - max_ll) : 0.0;
  const double total = w.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw NumericalError("state_posterior: posterior mass underflowed");

  StateDecision out;
  out.posterior = w / total;
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < k; ++j)
    if (out.posterior(j) > out.posterior(best)) best = j;  // first max wins
  out.state = static_cast<int>(best);
  out.is_new = best == k - 1;
  return out;
}

double oracle_posterior(const HmmCounts& c, int j) {
  const int k = c.k_tilde();
  if (j < 0 || j > k)
    throw std::invalid_argument("oracle_posterior: state out of range");
  if (j == k) return 1.0;  // a new state is only reachable through the oracle

  const int i = c.current_state();
  const double alpha = c.alpha(), gamma = c.gamma();
  const double row_sum = static_cast<double>(c.n().row(i).sum());
  const double m_sum = static_cast<double>(c.m().sum());
  const double oracle_gate = alpha / (row_sum + alpha);

  const double mass1 =
      static_cast<double>(c.m()(j)) / (m_sum + gamma) * oracle_gate;
  // 0/0 when the current row is empty: the direct path has no mass.
  const double mass0 =
      row_sum > 0.0 ? static_cast<double>(c.n()(i, j)) / row_sum *
                          (1.0 - oracle_gate)
                    : 0.0;
  const double total = mass0 + mass1;
  if (total <= 0.0) return 1.0;
  return mass1 / total;
}

TransitionEstimate empirical_transition(const HmmCounts& c, int steps) {
  if (steps < 1)
    throw std::invalid_argument("empirical_transition: steps must be >= 1");
  const int k = c.k_tilde();
  TransitionEstimate out;
  Eigen::MatrixXd p(k, k);
  for (int i = 0; i < k; ++i) {
    const long long row_sum = c.n().row(i).sum();
    if (row_sum == 0) {
      p.row(i).setConstant(1.0 / k);
      out.uniform_rows.push_back(i);
    } else {
      for (int j = 0; j < k; ++j)
        p(i, j) = static_cast<double>(c.n()(i, j)) / static_cast<double>(row_sum);
    }
  }
  // Binary exponentiation keeps the power cheap for large step counts.
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd base = p;
  int e = steps;
  while (e > 0) {
    if (e & 1) result = result * base;
    e >>= 1;
    if (e > 0) base = base * base;
  }
  out.matrix = std::move(result);
  return out;
}

}  // namespace flowfield
