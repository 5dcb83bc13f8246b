#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "flowfield/errors.hpp"
#include "flowfield/ihmm.hpp"
#include "oracles.hpp"

using namespace flowfield;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Random count state reached by a legal trajectory; also returns the
// trajectory so counts can be recounted definitionally.
struct Walk {
  HmmCounts counts;
  std::vector<int> s, o;
};

Walk random_walk(std::mt19937_64& rng, double alpha, double gamma,
                 int n_updates) {
  Walk w{HmmCounts(alpha, gamma), {0}, {1}};
  std::bernoulli_distribution new_state(0.25), oracle_bit(0.5);
  for (int u = 0; u < n_updates; ++u) {
    const int k = w.counts.k_tilde();
    int s;
    int o;
    if (new_state(rng)) {
      s = k;
      o = oracle_bit(rng) ? 1 : 0;
    } else {
      std::uniform_int_distribution<int> pick(0, k - 1);
      s = pick(rng);
      o = oracle_bit(rng) ? 1 : 0;
    }
    w.counts.update(s, o);
    w.s.push_back(s);
    w.o.push_back(o);
  }
  return w;
}

}  // namespace

TEST_CASE("HmmCounts starts from the canonical single-state configuration") {
  HmmCounts c(1.0, 1.0);
  CHECK(c.k_tilde() == 1);
  CHECK(c.current_state() == 0);
  CHECK(c.step_count() == 1);
  CHECK(c.n()(0, 0) == 0);
  CHECK(c.m()(0) == 1);
  CHECK(c.visits()(0) == 1);
}

TEST_CASE("HmmCounts validates construction and updates") {
  CHECK_THROWS_AS(HmmCounts(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(HmmCounts(1.0, -2.0), std::invalid_argument);
  HmmCounts c(1.0, 1.0);
  CHECK_THROWS_AS(c.update(2, 1), std::invalid_argument);  // skips k_tilde
  CHECK_THROWS_AS(c.update(-1, 1), std::invalid_argument);
  CHECK_THROWS_AS(c.update(0, 2), std::invalid_argument);
}

TEST_CASE("update bookkeeping") {
  HmmCounts c(1.0, 1.0);
  c.update(1, 1);  // open state 1 through the oracle
  CHECK(c.k_tilde() == 2);
  CHECK(c.m()(0) == 1);
  CHECK(c.m()(1) == 1);
  CHECK(c.n().cwiseAbs().sum() == 0);
  CHECK(c.current_state() == 1);

  c.update(0, 0);  // direct 1 -> 0
  CHECK(c.n()(1, 0) == 1);
  CHECK(c.m()(0) == 1);
  CHECK(c.current_state() == 0);
  CHECK(c.step_count() == 3);
  CHECK(c.visits().sum() == c.step_count());
}

TEST_CASE("a replayed trajectory matches its definitional recount") {
  HmmCounts c(1.0, 1.0);
  // 1-based trajectory (1,1,2,1) with oracle bits (1,0,1,0).
  std::vector<int> s{0, 0, 1, 0}, o{1, 0, 1, 0};
  for (std::size_t u = 1; u < s.size(); ++u) c.update(s[u], o[u]);
  oracle::Recount want = oracle::recount(s, o);
  CHECK(c.n() == want.n);
  CHECK(c.m() == want.m);
  CHECK(c.visits() == want.visits);
  CHECK(c.n()(0, 0) == 1);
  CHECK(c.n()(1, 0) == 1);
  CHECK(c.m()(0) == 1);
  CHECK(c.m()(1) == 1);
}

TEST_CASE("random trajectories always match the recount oracle") {
  std::mt19937_64 rng(601);
  std::uniform_real_distribution<double> conc(0.1, 5.0);
  std::uniform_int_distribution<int> len(1, 60);
  for (int rep = 0; rep < 300; ++rep) {
    Walk w = random_walk(rng, conc(rng), conc(rng), len(rng));
    oracle::Recount want = oracle::recount(w.s, w.o);
    REQUIRE(w.counts.k_tilde() == want.m.size());
    CHECK(w.counts.n() == want.n);
    CHECK(w.counts.m() == want.m);
    CHECK(w.counts.visits() == want.visits);
    CHECK(w.counts.step_count() ==
          static_cast<long long>(w.s.size()));
    // Structural invariants.
    CHECK(w.counts.visits().sum() == w.counts.step_count());
    long long direct = 0, arrivals = 0;
    for (std::size_t u = 1; u < w.o.size(); ++u)
      (w.o[u] == 0 ? direct : arrivals) += 1;
    CHECK(w.counts.n().sum() == direct);
    CHECK(w.counts.m().sum() == arrivals + 1);
  }
}

TEST_CASE("transition_prior from the initial state is an even split") {
  HmmCounts c(1.0, 1.0);
  Eigen::VectorXd prior = transition_prior(c);
  REQUIRE(prior.size() == 2);
  CHECK(prior(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(prior(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("transition_prior worked example") {
  // Current row n = (10, 0), m = (5, 5), alpha = gamma = 1.
  HmmCounts c(1.0, 1.0);
  for (int i = 0; i < 10; ++i) c.update(0, 0);   // n(0,0) = 10
  for (int i = 0; i < 4; ++i) c.update(0, 1);    // m(0) = 5
  for (int i = 0; i < 5; ++i) c.update(1, 1);    // open state 1, m(1) = 5
  c.update(0, 0);                                // back to row 0 via n(1,0)
  REQUIRE(c.current_state() == 0);
  REQUIRE(c.n()(0, 0) == 10);
  REQUIRE(c.n()(0, 1) == 0);
  REQUIRE(c.m()(0) == 5);
  REQUIRE(c.m()(1) == 5);

  Eigen::VectorXd prior = transition_prior(c);
  REQUIRE(prior.size() == 3);
  CHECK(prior(0) == doctest::Approx(10.0 / 11.0 + 5.0 / 121.0).epsilon(1e-14));
  CHECK(prior(1) == doctest::Approx(5.0 / 121.0).epsilon(1e-14));
  CHECK(prior(2) == doctest::Approx(1.0 / 121.0).epsilon(1e-14));
}

TEST_CASE("a vanishing top-level concentration closes off new states") {
  HmmCounts c(1.0, 1e-12);
  Eigen::VectorXd prior = transition_prior(c);
  CHECK(prior(prior.size() - 1) < 1e-10);
  CHECK(prior.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("transition_prior is a distribution on random count states") {
  std::mt19937_64 rng(607);
  std::uniform_real_distribution<double> conc(0.1, 5.0);
  std::uniform_int_distribution<int> len(0, 50);
  for (int rep = 0; rep < 300; ++rep) {
    Walk w = random_walk(rng, conc(rng), conc(rng), len(rng));
    Eigen::VectorXd prior = transition_prior(w.counts);
    REQUIRE(prior.size() == w.counts.k_tilde() + 1);
    CHECK(prior.minCoeff() >= 0.0);
    CHECK(std::abs(prior.sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("state_posterior blends prior and likelihood") {
  Eigen::VectorXd prior(3), ll(3);
  prior << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  ll << 0.0, -1.0, -2.0;
  StateDecision d = state_posterior(prior, ll);
  const double z = 1.0 + std::exp(-1.0) + std::exp(-2.0);
  CHECK(d.posterior(0) == doctest::Approx(1.0 / z).epsilon(1e-14));
  CHECK(d.posterior(1) == doctest::Approx(std::exp(-1.0) / z).epsilon(1e-14));
  CHECK(d.posterior(2) == doctest::Approx(std::exp(-2.0) / z).epsilon(1e-14));
  CHECK(d.state == 0);
  CHECK_FALSE(d.is_new);
}

TEST_CASE("state_posterior ignores candidates with zero prior") {
  Eigen::VectorXd prior(2), ll(2);
  prior << 1.0, 0.0;
  ll << -5.0, 100.0;
  StateDecision d = state_posterior(prior, ll);
  CHECK(d.posterior(0) == 1.0);
  CHECK(d.posterior(1) == 0.0);
  CHECK(d.state == 0);
}

TEST_CASE("state_posterior is invariant to a common log-likelihood shift") {
  Eigen::VectorXd prior(3), ll(3), shifted(3);
  prior << 0.2, 0.5, 0.3;
  ll << -1200.0, -1195.0, -1201.5;
  shifted = ll.array() + 12345.6;
  StateDecision a = state_posterior(prior, ll);
  StateDecision b = state_posterior(prior, shifted);
  CHECK((a.posterior - b.posterior).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.state == b.state);
}

TEST_CASE("state_posterior survives very negative log-likelihoods") {
  Eigen::VectorXd prior(2), ll(2);
  prior << 0.5, 0.5;
  ll << -1000.0, -1000.0 + std::log(3.0);
  StateDecision d = state_posterior(prior, ll);
  CHECK(d.posterior(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(d.posterior(1) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(d.state == 1);
  CHECK(d.is_new);
}

TEST_CASE("state_posterior handles minus-infinity entries") {
  Eigen::VectorXd prior(2), ll(2);
  prior << 0.7, 0.3;
  ll << 0.0, -kInf;
  StateDecision d = state_posterior(prior, ll);
  CHECK(d.posterior(0) == 1.0);
  CHECK(d.posterior(1) == 0.0);

  ll << -kInf, -kInf;
  CHECK_THROWS_AS(state_posterior(prior, ll), NumericalError);
}

TEST_CASE("state_posterior rejects malformed input") {
  Eigen::VectorXd prior(2), ll(2);
  prior << 0.5, 0.5;
  ll << 0.0, std::nan("");
  CHECK_THROWS_AS(state_posterior(prior, ll), NumericalError);
  ll << 0.0, kInf;
  CHECK_THROWS_AS(state_posterior(prior, ll), NumericalError);
  Eigen::VectorXd ll3(3);
  ll3.setZero();
  CHECK_THROWS_AS(state_posterior(prior, ll3), std::invalid_argument);
}

TEST_CASE("state_posterior ties break to the lowest index") {
  Eigen::VectorXd prior(3), ll(3);
  prior << 0.4, 0.4, 0.2;
  ll << -2.0, -2.0, -2.0;
  StateDecision d = state_posterior(prior, ll);
  CHECK(d.state == 0);
}

TEST_CASE("oracle_posterior worked example") {
  // Row n = (3, 1), m = (2, 2), alpha = gamma = 1: for candidate 0 the
  // oracle route carries 0.08 of 0.68 total mass.
  HmmCounts c(1.0, 1.0);
  for (int i = 0; i < 3; ++i) c.update(0, 0);  // n(0,0) = 3
  c.update(1, 1);                              // open state 1 via the oracle
  c.update(0, 1);                              // m(0) = 2
  c.update(1, 0);                              // n(0,1) = 1
  c.update(1, 1);                              // m(1) = 2
  c.update(0, 0);                              // n(1,0) = 1, row back to 0
  REQUIRE(c.current_state() == 0);
  REQUIRE(c.n()(0, 0) == 3);
  REQUIRE(c.n()(0, 1) == 1);
  REQUIRE(c.m()(0) == 2);
  REQUIRE(c.m()(1) == 2);

  CHECK(oracle_posterior(c, 0) ==
        doctest::Approx(0.08 / 0.68).epsilon(1e-12));
  // New-state candidate: the oracle is the only route.
  CHECK(oracle_posterior(c, 2) == 1.0);
}

TEST_CASE("oracle_posterior is 1 when no direct route exists") {
  HmmCounts c(1.0, 1.0);
  // Fresh initial state: its row is all zero.
  CHECK(oracle_posterior(c, 0) == 1.0);

  c.update(1, 1);
  // Candidate 0 from state 1: n(1,0) = 0 but m(0) > 0.
  CHECK(oracle_posterior(c, 0) == 1.0);
}

TEST_CASE("oracle_posterior stays inside the unit interval") {
  std::mt19937_64 rng(613);
  std::uniform_real_distribution<double> conc(0.1, 5.0);
  std::uniform_int_distribution<int> len(0, 50);
  for (int rep = 0; rep < 400; ++rep) {
    Walk w = random_walk(rng, conc(rng), conc(rng), len(rng));
    for (int j = 0; j <= w.counts.k_tilde(); ++j) {
      const double p1 = oracle_posterior(w.counts, j);
      CHECK(p1 >= 0.0);
      CHECK(p1 <= 1.0);
    }
    CHECK(oracle_posterior(w.counts, w.counts.k_tilde()) == 1.0);
  }
}

TEST_CASE("oracle_posterior rejects out-of-range candidates") {
  HmmCounts c(1.0, 1.0);
  CHECK_THROWS_AS(oracle_posterior(c, -1), std::invalid_argument);
  CHECK_THROWS_AS(oracle_posterior(c, 2), std::invalid_argument);
}

TEST_CASE("empirical_transition normalizes rows and powers the matrix") {
  HmmCounts c(1.0, 1.0);
  // Build n = [[2, 2], [0, 4]].
  c.update(0, 0);
  c.update(0, 0);
  c.update(1, 1);
  c.update(1, 0);
  c.update(1, 0);
  c.update(1, 0);
  c.update(1, 0);
  // Two direct 0 -> 1 hops, re-entering 0 through the oracle in between.
  c.update(0, 1);
  c.update(1, 0);
  c.update(0, 1);
  c.update(1, 0);
  REQUIRE(c.n()(0, 0) == 2);
  REQUIRE(c.n()(0, 1) == 2);
  REQUIRE(c.n()(1, 0) == 0);
  REQUIRE(c.n()(1, 1) == 4);

  TransitionEstimate one = empirical_transition(c, 1);
  Eigen::MatrixXd want(2, 2);
  want << 0.5, 0.5, 0.0, 1.0;
  CHECK((one.matrix - want).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(one.uniform_rows.empty());

  TransitionEstimate two = empirical_transition(c, 2);
  CHECK((two.matrix - oracle::matpow_naive(want, 2)).cwiseAbs().maxCoeff() <
        1e-15);

  // An absorbing chain is a fixed point of the power.
  TransitionEstimate twenty = empirical_transition(c, 20);
  CHECK((twenty.matrix - oracle::matpow_naive(want, 20)).cwiseAbs().maxCoeff() <
        1e-12);

  CHECK_THROWS_AS(empirical_transition(c, 0), std::invalid_argument);
}

TEST_CASE("empirical_transition flags zero rows and keeps rows stochastic") {
  HmmCounts fresh(1.0, 1.0);
  TransitionEstimate est = empirical_transition(fresh, 1);
  REQUIRE(est.matrix.rows() == 1);
  CHECK(est.matrix(0, 0) == doctest::Approx(1.0));
  REQUIRE(est.uniform_rows.size() == 1);
  CHECK(est.uniform_rows[0] == 0);

  std::mt19937_64 rng(617);
  std::uniform_real_distribution<double> conc(0.2, 3.0);
  std::uniform_int_distribution<int> len(0, 40);
  for (int rep = 0; rep < 100; ++rep) {
    Walk w = random_walk(rng, conc(rng), conc(rng), len(rng));
    for (int steps : {1, 2, 5, 20}) {
      TransitionEstimate e = empirical_transition(w.counts, steps);
      Eigen::VectorXd sums = e.matrix.rowwise().sum();
      CHECK((sums.array() - 1.0).abs().maxCoeff() <= 1e-9);
      CHECK(e.matrix.minCoeff() >= 0.0);
      // Power agrees with plain repeated multiplication.
      TransitionEstimate base = empirical_transition(w.counts, 1);
      CHECK((e.matrix - oracle::matpow_naive(base.matrix, steps))
                .cwiseAbs()
                .maxCoeff() < 1e-12);
    }
  }
}
