#include "flowfield/simulator.hpp"

#include <cmath>
#include <stdexcept>

namespace flowfield {
namespace {

Eigen::Vector2d f_rotation(const Eigen::Vector2d& z) { return {-z.y(), z.x()}; }
Eigen::Vector2d f_source(const Eigen::Vector2d& z) { return {z.x(), z.y()}; }
Eigen::Vector2d f_sink(const Eigen::Vector2d& z) { return {-z.x(), -z.y()}; }
Eigen::Vector2d f_saddle(const Eigen::Vector2d& z) { return {z.x(), -z.y()}; }
Eigen::Vector2d f_shear(const Eigen::Vector2d& z) { return {z.y(), 0.0}; }
Eigen::Vector2d f_east(const Eigen::Vector2d&) { return {1.5, 0.0}; }
Eigen::Vector2d f_north(const Eigen::Vector2d&) { return {0.0, 1.5}; }
Eigen::Vector2d f_swirl_sink(const Eigen::Vector2d& z) {
  return {-z.x() - z.y(), z.x() - z.y()};
}

}  // namespace

void SimConfig::validate() const {
  const int library = static_cast<int>(builtin_fields().size());
  if (k_true < 1 || k_true > library)
    throw std::invalid_argument("SimConfig: k_true must be in [1, " +
                                std::to_string(library) + "]");
  if (steps < 1) throw std::invalid_argument("SimConfig: steps must be >= 1");
  if (!(mean_points > 0.0))
    throw std::invalid_argument("SimConfig: mean_points must be > 0");
  if (noise_sd < 0.0 || !std::isfinite(noise_sd))
    throw std::invalid_argument("SimConfig: noise_sd must be >= 0");
  if (!(dirichlet_conc > 0.0))
    throw std::invalid_argument("SimConfig: dirichlet_conc must be > 0");
  if (!((domain_max - domain_min).minCoeff() > 0.0))
    throw std::invalid_argument("SimConfig: domain box is degenerate");
}

const std::vector<VectorField>& builtin_fields() {
  static const std::vector<VectorField> fields = {
      {"rotation", f_rotation},       {"source", f_source},
      {"sink", f_sink},               {"saddle", f_saddle},
      {"shear", f_shear},             {"constant-east", f_east},
      {"constant-north", f_north},    {"swirl-sink", f_swirl_sink},
  };
  return fields;
}

Eigen::MatrixXd gen_transition(int k, double conc, std::mt19937_64& rng) {
  if (k < 1) throw std::invalid_argument("gen_transition: k must be >= 1");
  if (!(conc > 0.0))
    throw std::invalid_argument("gen_transition: conc must be > 0");
  std::gamma_distribution<double> gamma(conc, 1.0);
  Eigen::MatrixXd p(k, k);
  for (int i = 0; i < k; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < k; ++j) {
      // Guard against an exact-zero draw so rows stay normalizable.
      double g = 0.0;
      while (!(g > 0.0)) g = gamma(rng);
      p(i, j) = g;
      row_sum += g;
    }
    p.row(i) /= row_sum;
  }
  return p;
}

Eigen::MatrixXd gen_transition(int k, double conc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return gen_transition(k, conc, rng);
}

SimOutput simulate(const SimConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const auto& fields = builtin_fields();

  SimOutput out;
  out.true_transition = gen_transition(cfg.k_true, cfg.dirichlet_conc, rng);
  out.field_ids.resize(cfg.k_true);
  for (int i = 0; i < cfg.k_true; ++i) out.field_ids[i] = i;

  std::uniform_int_distribution<int> init_state(0, cfg.k_true - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::poisson_distribution<int> poisson(cfg.mean_points);
  std::normal_distribution<double> noise(0.0, cfg.noise_sd > 0.0 ? cfg.noise_sd : 1.0);

  int state = init_state(rng);  // 0-based internally
  out.frames.reserve(cfg.steps);
  out.true_states.reserve(cfg.steps);

  for (int t = 0; t < cfg.steps; ++t) {
    out.true_states.push_back(state + 1);

    int n = 0;
    while (n < 1) n = poisson(rng);

    Frame frame;
    frame.t = t + 1;
    frame.locations.points.resize(n, 2);
    frame.velocities.resize(n, 2);
    const VectorField& f = fields[static_cast<size_t>(state)];
    for (int i = 0; i < n; ++i) {
      Eigen::Vector2d z;
      for (int c = 0; c < 2; ++c)
        z(c) = cfg.domain_min(c) +
               unit(rng) * (cfg.domain_max(c) - cfg.domain_min(c));
      frame.locations.points.row(i) = z.transpose();
      Eigen::Vector2d v = f.eval(z);
      if (cfg.noise_sd > 0.0) {
        v.x() += noise(rng);
        v.y() += noise(rng);
      }
      frame.velocities.row(i) = v.transpose();
    }
    out.frames.push_back(std::move(frame));

    // Next state by inverse-CDF over the current transition row.
    const double u = unit(rng);
    double acc = 0.0;
    int next = cfg.k_true - 1;
    for (int j = 0; j < cfg.k_true; ++j) {
      acc += out.true_transition(state, j);
      if (u < acc) {
        next = j;
        break;
      }
    }
    state = next;
  }
  return out;
}

}  // namespace flowfield
