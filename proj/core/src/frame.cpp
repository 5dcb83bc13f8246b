#include "flowfield/frame.hpp"

#include <string>

#include "flowfield/errors.hpp"

namespace flowfield {

void Frame::validate(int expect_p, int expect_d) const {
  if (locations.count() == 0)
    throw DataError("frame t=" + std::to_string(t) + ": no observations");
  if (locations.count() != velocities.rows())
    throw DataError("frame t=" + std::to_string(t) +
                    ": locations/velocities row mismatch");
  if (expect_p >= 0 && locations.dim() != expect_p)
    throw DataError("frame t=" + std::to_string(t) + ": location dim " +
                    std::to_string(locations.dim()) + ", expected " +
                    std::to_string(expect_p));
  if (expect_d >= 0 && velocities.cols() != expect_d)
    throw DataError("frame t=" + std::to_string(t) + ": velocity dim " +
                    std::to_string(velocities.cols()) + ", expected " +
                    std::to_string(expect_d));
  if (!locations.points.allFinite() || !velocities.allFinite())
    throw DataError("frame t=" + std::to_string(t) + ": non-finite values");
}

Eigen::VectorXd stack_rows(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    v.segment(i * m.cols(), m.cols()) = m.row(i).transpose();
  return v;
}

Eigen::MatrixXd unstack_rows(const Eigen::VectorXd& v, Eigen::Index rows,
                             Eigen::Index cols) {
  if (v.size() != rows * cols)
    throw DataError("unstack_rows: size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    m.row(i) = v.segment(i * cols, cols).transpose();
  return m;
}

}  // namespace flowfield
