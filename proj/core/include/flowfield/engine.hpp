#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "flowfield/frame.hpp"
#include "flowfield/ihmm.hpp"
#include "flowfield/kernel.hpp"
#include "flowfield/mrgp.hpp"

namespace flowfield {

// How the response cross-correlation of an existing cluster evolves.
//   kFrozen: estimated once from the cluster's first frame, then fixed; the
//            cached inverse stays an exact inverse of one covariance.
//   kRefit:  re-estimated from every absorbed frame (residuals against the
//            current posterior mean); new covariance blocks use the newest
//            value, existing blocks keep the ones they were built with.
enum class RhoMode { kFrozen, kRefit };

struct EngineConfig {
  double alpha = 1.0;   // transition concentration
  double gamma = 1.0;   // oracle concentration
  double sigma_sq = 1.0;
  RbfKernel kernel;
  double rho_init = 0.0;  // used for the new-cluster candidate's likelihood
  RhoMode rho_mode = RhoMode::kFrozen;
  std::optional<Eigen::Index> cluster_point_cap;
  int d = 2;        // velocity components
  int p = 2;        // spatial dimension
  int threads = 0;  // likelihood fan-out width; 0 = hardware, 1 = sequential

  void validate() const;  // throws std::invalid_argument
  MrgpParams mrgp_params() const;
};

struct EngineState {
  HmmCounts counts;
  std::vector<ClusterModel> clusters;  // clusters.size() == counts.k_tilde()
  long long step = 0;                  // frames processed
  std::vector<int> s_hist;             // chosen states, 0-based
  std::vector<int> o_hist;
  std::vector<double> step_logliks;    // chosen candidate's loglik per frame
  double loglik_sum = 0.0;             // == sum of step_logliks
};

struct FitResult {
  std::vector<int> s_hat;  // 0-based
  std::vector<int> o_hat;
  std::vector<double> step_logliks;
  int k_found = 0;
  double total_loglik = 0.0;
  std::vector<ClusterModel> clusters;
  TransitionEstimate transition;  // 1-step estimate
  HmmCounts counts;               // for k-step exports
};

// One-pass sequential MAP over a frame stream. Construction consumes the
// first frame: state 0 is opened through the oracle and its cluster absorbs
// the frame; loglik_sum starts at the frame's density under the empty-model
// prior. Each step() then scores every cluster plus a fresh-cluster
// candidate, picks the MAP state, picks the MAP oracle bit, updates counts,
// and absorbs the frame into the chosen cluster.
class Engine {
 public:
  Engine(EngineConfig cfg, const Frame& first);

  StateDecision step(const Frame& frame);

  const EngineConfig& config() const { return cfg_; }
  const EngineState& state() const { return st_; }

  FitResult result() const;

 private:
  Eigen::VectorXd candidate_logliks(const Frame& frame) const;
  ClusterModel make_cluster(const Frame& frame, long long created_at) const;
  void absorb_existing(int j, const Frame& frame);

  EngineConfig cfg_;
  EngineState st_;
};

// init + step over the whole stream. Deterministic for fixed input.
FitResult run(const EngineConfig& cfg, const std::vector<Frame>& frames);

}  // namespace flowfield
