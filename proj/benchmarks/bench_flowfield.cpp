// Microbenchmarks for the covariance kernels, the incremental cluster
// updates, and a full engine step. Sizes bracket the reference stream
// (~100 points per frame, clusters in the low thousands of points).

#include <optional>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "flowfield/engine.hpp"
#include "flowfield/mrgp.hpp"
#include "flowfield/simulator.hpp"

using namespace flowfield;

namespace {

Eigen::MatrixXd random_points(std::mt19937_64& rng, int n, int p) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Eigen::MatrixXd z(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) z(i, j) = u(rng);
  return z;
}

Eigen::MatrixXd random_velocities(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd v(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) v(i, j) = g(rng);
  return v;
}

MrgpParams bench_params() {
  return MrgpParams{RbfKernel{1.0, 1.0}, 0.25, 2, std::nullopt, true};
}

// Cluster preloaded with `points` observations in 100-point frames.
ClusterModel preloaded_cluster(int points, std::mt19937_64& rng) {
  ClusterModel c(bench_params(), 0.3, 0);
  long long t = 1;
  while (c.point_count() < points) {
    const int n = static_cast<int>(
        std::min<Eigen::Index>(100, points - c.point_count()));
    c.absorb_frame(Frame{t++, Locations{random_points(rng, n, 2)},
                         random_velocities(rng, n, 2)});
  }
  return c;
}

void BM_KernelMatrix(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const int n = static_cast<int>(state.range(0));
  RbfKernel k{1.0, 1.0};
  Locations z1{random_points(rng, n, 2)}, z2{random_points(rng, 100, 2)};
  for (auto _ : state)
    benchmark::DoNotOptimize(kernel_matrix(k, z1, z2));
}
BENCHMARK(BM_KernelMatrix)->Arg(100)->Arg(400)->Arg(1600);

void BM_ObsCovariance(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int n = static_cast<int>(state.range(0));
  RbfKernel kern{1.0, 1.0};
  Locations z{random_points(rng, n, 2)};
  Eigen::MatrixXd k = kernel_matrix(kern, z, z);
  Equicorr omega(0.3, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(obs_covariance(k, omega, 0.25));
}
BENCHMARK(BM_ObsCovariance)->Arg(100)->Arg(400)->Arg(1600);

void BM_AbsorbFrame(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const int base = static_cast<int>(state.range(0));
  ClusterModel c = preloaded_cluster(base, rng);
  Frame f{1000, Locations{random_points(rng, 100, 2)},
          random_velocities(rng, 100, 2)};
  for (auto _ : state)
    benchmark::DoNotOptimize(schur_extend(c, f));
}
BENCHMARK(BM_AbsorbFrame)->Arg(100)->Arg(500)->Arg(1000)->Arg(2000)
    ->Unit(benchmark::kMillisecond);

void BM_PredictiveLoglik(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const int base = static_cast<int>(state.range(0));
  ClusterModel c = preloaded_cluster(base, rng);
  Frame f{1000, Locations{random_points(rng, 100, 2)},
          random_velocities(rng, 100, 2)};
  for (auto _ : state)
    benchmark::DoNotOptimize(c.predictive_loglik(f));
}
BENCHMARK(BM_PredictiveLoglik)->Arg(100)->Arg(500)->Arg(1000)->Arg(2000)
    ->Unit(benchmark::kMillisecond);

void BM_EngineStep(benchmark::State& state) {
  SimConfig sc;
  sc.k_true = 8;
  sc.steps = 30;
  sc.mean_points = 100;
  sc.noise_sd = 1.0;
  sc.seed = 5;
  SimOutput sim = simulate(sc);

  EngineConfig cfg;
  cfg.sigma_sq = 1.0;
  cfg.threads = 1;
  Engine eng(cfg, sim.frames.front());
  for (std::size_t t = 1; t + 1 < sim.frames.size(); ++t)
    eng.step(sim.frames[t]);

  // Steady-state step cost against a warm engine; the copy keeps the engine
  // from growing across samples and stays off the timed path.
  const Frame& probe = sim.frames.back();
  for (auto _ : state) {
    state.PauseTiming();
    Engine scratch = eng;
    state.ResumeTiming();
    benchmark::DoNotOptimize(scratch.step(probe));
  }
}
BENCHMARK(BM_EngineStep)->Unit(benchmark::kMillisecond)->Iterations(20);

}  // namespace

BENCHMARK_MAIN();
