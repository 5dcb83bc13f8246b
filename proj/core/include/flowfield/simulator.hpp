#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flowfield/frame.hpp"

namespace flowfield {

struct SimConfig {
  int k_true = 8;            // number of fields in play (library holds 8)
  int steps = 100;           // frames to generate
  double mean_points = 100;  // Poisson rate for points per frame
  double noise_sd = 1.0;     // per-component observation noise, may be 0
  Eigen::Vector2d domain_min{-2.0, -2.0};
  Eigen::Vector2d domain_max{2.0, 2.0};
  double dirichlet_conc = 1.0;  // symmetric Dirichlet parameter for rows
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

// A named smooth planar vector field.
struct VectorField {
  std::string name;
  Eigen::Vector2d (*eval)(const Eigen::Vector2d&);
};

// The 8 built-in fields, fixed order: rotation, source, sink, saddle,
// shear, constant-east, constant-north, swirl-sink. All bounded on [-2,2]^2
// and pairwise well separated in mean squared difference.
const std::vector<VectorField>& builtin_fields();

// k x k matrix with rows drawn independently from Dirichlet(conc, ..., conc).
Eigen::MatrixXd gen_transition(int k, double conc, std::mt19937_64& rng);
Eigen::MatrixXd gen_transition(int k, double conc, std::uint64_t seed);

struct SimOutput {
  std::vector<Frame> frames;    // frames[t].t == t+1
  std::vector<int> true_states; // 1-based labels in 1..k_true
  Eigen::MatrixXd true_transition;
  std::vector<int> field_ids;   // index into builtin_fields() per state label-1
};

// Markov chain over the first k_true built-in fields, uniform initial
// state; each frame draws Poisson(mean_points) uniform locations (resampled
// to >= 1) and observes the active field plus N(0, noise_sd^2) per
// component. Reproducible from the seed.
SimOutput simulate(const SimConfig& cfg);

}  // namespace flowfield
