#include "flowfield/engine.hpp"

#include <exception>
#include <limits>
#include <stdexcept>
#include <thread>

#include "flowfield/errors.hpp"
#include "flowfield/log.hpp"

namespace flowfield {

void EngineConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("EngineConfig: alpha must be > 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("EngineConfig: gamma must be > 0");
  if (d < 1 || p < 1) throw std::invalid_argument("EngineConfig: d and p must be >= 1");
  if (threads < 0) throw std::invalid_argument("EngineConfig: threads must be >= 0");
  mrgp_params().validate();
  Equicorr check(rho_init, d);  // range check
}

MrgpParams EngineConfig::mrgp_params() const {
  MrgpParams p;
  p.kernel = kernel;
  p.sigma_sq = sigma_sq;
  p.d = d;
  p.point_cap = cluster_point_cap;
  return p;
}

Engine::Engine(EngineConfig cfg, const Frame& first)
    : cfg_(std::move(cfg)), st_{HmmCounts(1.0, 1.0)} {
  cfg_.validate();
  st_.counts = HmmCounts(cfg_.alpha, cfg_.gamma);
  first.validate(cfg_.p, cfg_.d);

  // The first frame's density under the empty-model prior seeds the
  // filtering log-likelihood.
  const ClusterModel prior_model(cfg_.mrgp_params(), cfg_.rho_init, first.t);
  const double ll = prior_model.predictive_loglik(first);

  st_.clusters.push_back(make_cluster(first, first.t));
  st_.step = 1;
  st_.s_hist.push_back(0);
  st_.o_hist.push_back(1);
  st_.step_logliks.push_back(ll);
  st_.loglik_sum = ll;
}

ClusterModel Engine::make_cluster(const Frame& frame,
                                  long long created_at) const {
  ClusterModel c(cfg_.mrgp_params(), cfg_.rho_init, created_at);
  const RhoEstimate re =
      estimate_rho(cfg_.mrgp_params(), frame,
                   Eigen::VectorXd::Zero(frame.size() * cfg_.d));
  if (re.applicable) c.set_rho(re.rho);
  c.absorb_frame(frame);
  return c;
}

void Engine::absorb_existing(int j, const Frame& frame) {
  ClusterModel& c = st_.clusters[static_cast<size_t>(j)];
  if (cfg_.rho_mode == RhoMode::kRefit && cfg_.d > 1) {
    const Eigen::VectorXd xbar =
        stack_rows(c.posterior_field(frame.locations, false).mean);
    const RhoEstimate re = estimate_rho(cfg_.mrgp_params(), frame, xbar);
    c.absorb_frame(frame, re.applicable ? std::optional<double>(re.rho)
                                        : std::nullopt);
  } else {
    c.absorb_frame(frame);
  }
}

namespace {

// A candidate whose predictive covariance cannot be factored is scored as
// impossible rather than aborting the stream; the event is logged.
double guarded_loglik(const ClusterModel& c, const Frame& frame) {
  try {
    return c.predictive_loglik(frame);
  } catch (const NumericalError& e) {
    log::warn("frame t=" + std::to_string(frame.t) +
              ": candidate dropped (" + e.what() + ")");
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace

Eigen::VectorXd Engine::candidate_logliks(const Frame& frame) const {
  const int k = st_.counts.k_tilde();
  Eigen::VectorXd logliks(k + 1);

  int width = cfg_.threads == 0
                  ? static_cast<int>(std::thread::hardware_concurrency())
                  : cfg_.threads;
  if (width < 1) width = 1;
  if (width > k) width = k;

  if (width <= 1 || k < 2) {
    for (int j = 0; j < k; ++j)
      logliks(j) = guarded_loglik(st_.clusters[static_cast<size_t>(j)], frame);
  } else {
    // Read-only fan-out over immutable clusters; slot-indexed writes keep
    // the reduction deterministic for any width.
    std::vector<std::exception_ptr> errors(static_cast<size_t>(k));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(width));
    for (int w = 0; w < width; ++w) {
      pool.emplace_back([&, w]() {
        for (int j = w; j < k; j += width) {
          try {
            logliks(j) =
                guarded_loglik(st_.clusters[static_cast<size_t>(j)], frame);
          } catch (...) {
            errors[static_cast<size_t>(j)] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (int j = 0; j < k; ++j)
      if (errors[static_cast<size_t>(j)])
        std::rethrow_exception(errors[static_cast<size_t>(j)]);
  }

  const ClusterModel prior_model(cfg_.mrgp_params(), cfg_.rho_init, frame.t);
  logliks(k) = guarded_loglik(prior_model, frame);
  return logliks;
}

StateDecision Engine::step(const Frame& frame) {
  frame.validate(cfg_.p, cfg_.d);

  const Eigen::VectorXd prior = transition_prior(st_.counts);
  const Eigen::VectorXd logliks = candidate_logliks(frame);

  StateDecision decision = state_posterior(prior, logliks);
  const double p_oracle = oracle_posterior(st_.counts, decision.state);
  decision.oracle = p_oracle > 0.5 ? 1 : 0;  // MAP bit; ties favor 0

  st_.counts.update(decision.state, decision.oracle);
  if (decision.is_new) {
    st_.clusters.push_back(make_cluster(frame, frame.t));
    log::debug("step " + std::to_string(st_.step + 1) + ": opened state " +
               std::to_string(decision.state));
  } else {
    absorb_existing(decision.state, frame);
  }

  const double chosen_ll = logliks(decision.state);
  st_.step += 1;
  st_.s_hist.push_back(decision.state);
  st_.o_hist.push_back(decision.oracle);
  st_.step_logliks.push_back(chosen_ll);
  st_.loglik_sum += chosen_ll;
  return decision;
}

FitResult Engine::result() const {
  FitResult r{.s_hat = st_.s_hist,
              .o_hat = st_.o_hist,
              .step_logliks = st_.step_logliks,
              .k_found = st_.counts.k_tilde(),
              .total_loglik = st_.loglik_sum,
              .clusters = st_.clusters,
              .transition = empirical_transition(st_.counts, 1),
              .counts = st_.counts};
  return r;
}

FitResult run(const EngineConfig& cfg, const std::vector<Frame>& frames) {
  if (frames.empty()) throw DataError("run: empty frame stream");
  Engine engine(cfg, frames.front());
  for (size_t i = 1; i < frames.size(); ++i) engine.step(frames[i]);
  return engine.result();
}

}  // namespace flowfield
