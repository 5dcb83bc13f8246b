#pragma once

#include <vector>

#include <Eigen/Dense>

namespace flowfield {

using CountMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;
using CountVector = Eigen::Matrix<long long, Eigen::Dynamic, 1>;

// Count statistics of the unbounded-state chain. States are 0-based; the
// candidate index k_tilde() always denotes "open a new state". Starts from
// the canonical initialization: one state, reached through the oracle
// (n = [0], m = [1], visits = [1], current_state = 0).
//
// n(i,j) counts direct transitions i -> j (oracle bit 0); m(j) counts
// arrivals at j through the oracle (bit 1), including initialization.
// Value type: the engine is the single writer, reads are pure.
class HmmCounts {
 public:
  HmmCounts(double alpha, double gamma);

  int k_tilde() const { return static_cast<int>(m_.size()); }
  int current_state() const { return current_; }
  long long step_count() const { return steps_; }  // == visits().sum()
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  const CountMatrix& n() const { return n_; }
  const CountVector& m() const { return m_; }
  const CountVector& visits() const { return visits_; }

  // Moves to s_next with oracle bit o_next. s_next == k_tilde() opens a new
  // state (grows n, m, visits by one zero slot first). Throws
  // std::invalid_argument for s_next out of range or o_next not in {0,1}.
  void update(int s_next, int o_next);

 private:
  double alpha_, gamma_;
  CountMatrix n_;
  CountVector m_, visits_;
  int current_ = 0;
  long long steps_ = 1;
};

// One step's discrete decision.
struct StateDecision {
  int state = 0;               // chosen index; == old k_tilde when new
  int oracle = 1;              // chosen oracle bit
  Eigen::VectorXd posterior;   // length k_tilde+1, last entry = new state
  bool is_new = false;
};

// Prior over the K̃+1 candidates for the next state given the current one:
//   j < K̃ :  (n_ij + alpha * m_j / (M + gamma)) / (n_i. + alpha)
//   new   :  alpha * gamma / ((n_i. + alpha) (M + gamma))
// with n_i. the current row sum and M the total oracle count.
Eigen::VectorXd transition_prior(const HmmCounts& c);

// Combines the prior with per-candidate predictive log-likelihoods:
// posterior_j ∝ prior_j * exp(loglik_j - max loglik). Throws NumericalError
// when every product underflows to zero. Ties break to the lowest index.
StateDecision state_posterior(const Eigen::VectorXd& prior,
                              const Eigen::VectorXd& logliks);

// P(oracle = 1 | next state j). Exactly 1 for the new-state candidate and
// whenever the direct path has no mass (n_ij = 0 or n_i. = 0).
double oracle_posterior(const HmmCounts& c, int j);

struct TransitionEstimate {
  Eigen::MatrixXd matrix;          // the k-step row-stochastic estimate
  std::vector<int> uniform_rows;   // rows of n with no transitions observed
};

// Row-normalized n raised to the `steps`-th power. Zero rows become uniform
// (required for the power to stay stochastic) and are flagged.
TransitionEstimate empirical_transition(const HmmCounts& c, int steps);

}  // namespace flowfield
