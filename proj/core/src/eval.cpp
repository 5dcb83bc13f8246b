#include "flowfield/eval.hpp"

#include <cmath>
#include <stdexcept>

namespace flowfield {

double adjusted_rand_index(const std::vector<int>& a,
                           const std::vector<int>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("adjusted_rand_index: length mismatch");
  const auto n = static_cast<long long>(a.size());
  if (n == 0) throw std::invalid_argument("adjusted_rand_index: empty input");

  std::map<std::pair<int, int>, long long> cells;
  std::map<int, long long> row_sums, col_sums;
  for (size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1;
    row_sums[a[i]] += 1;
    col_sums[b[i]] += 1;
  }
  const auto choose2 = [](long long x) {
    return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1);
  };
  double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [key, count] : cells) sum_cells += choose2(count);
  for (const auto& [key, count] : row_sums) sum_rows += choose2(count);
  for (const auto& [key, count] : col_sums) sum_cols += choose2(count);

  const double total = choose2(n);
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double maximum = 0.5 * (sum_rows + sum_cols);
  const double denom = maximum - expected;
  if (denom == 0.0) return 1.0;  // both partitions degenerate the same way
  return (sum_cells - expected) / denom;
}

std::map<int, int> majority_label(const std::vector<int>& assigned,
                                  const std::vector<int>& truth) {
  if (assigned.size() != truth.size())
    throw std::invalid_argument("majority_label: length mismatch");
  std::map<int, std::map<int, long long>> tallies;
  for (size_t i = 0; i < assigned.size(); ++i)
    tallies[assigned[i]][truth[i]] += 1;
  std::map<int, int> out;
  for (const auto& [cluster, counts] : tallies) {
    int best = 0;
    long long best_count = -1;
    for (const auto& [label, count] : counts)
      if (count > best_count) {  // map order makes ties pick the smaller label
        best = label;
        best_count = count;
      }
    out[cluster] = best;
  }
  return out;
}

double field_rmse(const Eigen::MatrixXd& grid_points,
                  const Eigen::MatrixXd& fitted_means,
                  const VectorField& field) {
  if (grid_points.rows() != fitted_means.rows() || grid_points.cols() != 2 ||
      fitted_means.cols() != 2)
    throw std::invalid_argument("field_rmse: shape mismatch");
  double sq_sum = 0.0;
  for (Eigen::Index i = 0; i < grid_points.rows(); ++i) {
    const Eigen::Vector2d truth = field.eval(grid_points.row(i).transpose());
    sq_sum += (fitted_means.row(i).transpose() - truth).squaredNorm();
  }
  return std::sqrt(sq_sum / static_cast<double>(grid_points.size()));
}

}  // namespace flowfield
