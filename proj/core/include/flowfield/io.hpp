#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "flowfield/frame.hpp"

namespace flowfield::io {

// Shortest representation that round-trips a double exactly (%.17g).
std::string format_double(double v);

struct FrameFileDims {
  int p = 0;
  int d = 0;
};

// Reads the header `t,z1,...,zp,v1,...,vd` and returns (p, d).
FrameFileDims sniff_dims(const std::string& path);

// One Frame per run of equal t values; t must be nondecreasing. Errors are
// DataError with file:line positions.
std::vector<Frame> read_frames(const std::string& path, int p, int d);
void write_frames(const std::string& path, const std::vector<Frame>& frames);

// Affine per-coordinate map of every location into [0,1]^p; returns the
// (min, max) box that was used. A degenerate coordinate maps to 0.5.
std::pair<Eigen::VectorXd, Eigen::VectorXd> normalize_frames(
    std::vector<Frame>* frames);

// A row of assignments.csv. States are 1-based in files.
struct AssignmentRow {
  long long t = 0;
  int state = 0;
  int oracle = 1;
  double step_loglik = 0.0;
};
void write_assignments(const std::string& path,
                       const std::vector<AssignmentRow>& rows);
std::vector<AssignmentRow> read_assignments(const std::string& path);

// Headerless rectangular CSV of doubles.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

// Ground-truth sidecar for simulated streams.
struct Truth {
  int k_true = 0;
  std::vector<int> true_states;  // 1-based
  Eigen::MatrixXd transition;
  std::vector<int> field_ids;
  std::vector<std::string> field_names;
};
void write_truth(const std::string& path, const Truth& truth);
Truth read_truth(const std::string& path);

// 64-bit FNV-1a over the raw file bytes, as 16 hex digits.
std::string file_hash_hex(const std::string& path);

}  // namespace flowfield::io
