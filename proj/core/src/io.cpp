#include "flowfield/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "flowfield/errors.hpp"

namespace flowfield::io {
namespace {

std::string where(const std::string& path, size_t line) {
  return path + ":" + std::to_string(line) + ": ";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(const std::string& s, const std::string& path, size_t line) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v))
    throw DataError(where(path, line) + "bad numeric field '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& path, size_t line) {
  long long v = 0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw DataError(where(path, line) + "bad integer field '" + s + "'");
  return v;
}

// Reads all lines, stripping one trailing \r per line.
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

FrameFileDims parse_header(const std::string& header, const std::string& path) {
  const std::vector<std::string> cols = split_csv(header);
  if (cols.empty() || cols[0] != "t")
    throw DataError(where(path, 1) + "header must start with 't'");
  FrameFileDims dims;
  size_t i = 1;
  for (; i < cols.size() && cols[i] == "z" + std::to_string(dims.p + 1); ++i)
    ++dims.p;
  for (; i < cols.size() && cols[i] == "v" + std::to_string(dims.d + 1); ++i)
    ++dims.d;
  if (i != cols.size() || dims.p == 0 || dims.d == 0)
    throw DataError(where(path, 1) +
                    "header must be t,z1,...,zp,v1,...,vd; got '" + header + "'");
  return dims;
}

Frame build_frame(long long t, const std::vector<Eigen::VectorXd>& rows,
                  int p, int d) {
  Frame f;
  f.t = t;
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  f.locations.points.resize(n, p);
  f.velocities.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    f.locations.points.row(i) = rows[static_cast<size_t>(i)].head(p).transpose();
    f.velocities.row(i) = rows[static_cast<size_t>(i)].tail(d).transpose();
  }
  return f;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

FrameFileDims sniff_dims(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw DataError(path + ": empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  return parse_header(header, path);
}

std::vector<Frame> read_frames(const std::string& path, int p, int d) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw DataError(path + ": empty file");
  const FrameFileDims dims = parse_header(lines[0], path);
  if (dims.p != p || dims.d != d)
    throw DataError(path + ": header has p=" + std::to_string(dims.p) +
                    ", d=" + std::to_string(dims.d) + "; expected p=" +
                    std::to_string(p) + ", d=" + std::to_string(d));

  std::vector<Frame> frames;
  std::vector<Eigen::VectorXd> pending;
  long long current_t = 0;
  bool have_t = false;

  for (size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const std::vector<std::string> cells = split_csv(lines[li]);
    if (static_cast<int>(cells.size()) != 1 + p + d)
      throw DataError(where(path, li + 1) + "expected " +
                      std::to_string(1 + p + d) + " fields, got " +
                      std::to_string(cells.size()));
    const long long t = parse_int(cells[0], path, li + 1);
    Eigen::VectorXd row(p + d);
    for (int c = 0; c < p + d; ++c)
      row(c) = parse_double(cells[static_cast<size_t>(c) + 1], path, li + 1);

    if (have_t && t < current_t)
      throw DataError(where(path, li + 1) + "t decreased from " +
                      std::to_string(current_t) + " to " + std::to_string(t));
    if (have_t && t != current_t) {
      frames.push_back(build_frame(current_t, pending, p, d));
      pending.clear();
    }
    current_t = t;
    have_t = true;
    pending.push_back(std::move(row));
  }
  if (have_t) frames.push_back(build_frame(current_t, pending, p, d));
  return frames;
}

void write_frames(const std::string& path, const std::vector<Frame>& frames) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  const int p = frames.empty() ? 2 : static_cast<int>(frames[0].locations.dim());
  const int d = frames.empty() ? 2 : static_cast<int>(frames[0].velocities.cols());
  out << "t";
  for (int c = 1; c <= p; ++c) out << ",z" << c;
  for (int c = 1; c <= d; ++c) out << ",v" << c;
  out << "\n";
  for (const Frame& f : frames) {
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      out << f.t;
      for (Eigen::Index c = 0; c < p; ++c)
        out << "," << format_double(f.locations.points(i, c));
      for (Eigen::Index c = 0; c < d; ++c)
        out << "," << format_double(f.velocities(i, c));
      out << "\n";
    }
  }
  if (!out) throw DataError("write failed for " + path);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> normalize_frames(
    std::vector<Frame>* frames) {
  if (!frames || frames->empty())
    throw DataError("normalize_frames: no frames");
  const Eigen::Index p = (*frames)[0].locations.dim();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (const Frame& f : *frames) {
    lo = lo.cwiseMin(f.locations.points.colwise().minCoeff().transpose());
    hi = hi.cwiseMax(f.locations.points.colwise().maxCoeff().transpose());
  }
  for (Frame& f : *frames) {
    for (Eigen::Index c = 0; c < p; ++c) {
      const double span = hi(c) - lo(c);
      if (span > 0.0)
        f.locations.points.col(c) =
            (f.locations.points.col(c).array() - lo(c)) / span;
      else
        f.locations.points.col(c).setConstant(0.5);
    }
  }
  return {lo, hi};
}

void write_assignments(const std::string& path,
                       const std::vector<AssignmentRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "t,state,oracle,step_loglik\n";
  for (const AssignmentRow& r : rows)
    out << r.t << "," << r.state << "," << r.oracle << ","
        << format_double(r.step_loglik) << "\n";
  if (!out) throw DataError("write failed for " + path);
}

std::vector<AssignmentRow> read_assignments(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0] != "t,state,oracle,step_loglik")
    throw DataError(path + ": missing assignments header");
  std::vector<AssignmentRow> rows;
  for (size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const std::vector<std::string> cells = split_csv(lines[li]);
    if (cells.size() != 4)
      throw DataError(where(path, li + 1) + "expected 4 fields");
    AssignmentRow r;
    r.t = parse_int(cells[0], path, li + 1);
    r.state = static_cast<int>(parse_int(cells[1], path, li + 1));
    r.oracle = static_cast<int>(parse_int(cells[2], path, li + 1));
    r.step_loglik = parse_double(cells[3], path, li + 1);
    rows.push_back(r);
  }
  return rows;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ",";
      out << format_double(m(i, j));
    }
    out << "\n";
  }
  if (!out) throw DataError("write failed for " + path);
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<std::vector<double>> rows;
  for (size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const std::vector<std::string> cells = split_csv(lines[li]);
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& c : cells) row.push_back(parse_double(c, path, li + 1));
    if (!rows.empty() && row.size() != rows[0].size())
      throw DataError(where(path, li + 1) + "ragged matrix row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": empty matrix");
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

void write_truth(const std::string& path, const Truth& truth) {
  nlohmann::json j;
  j["k_true"] = truth.k_true;
  j["true_states"] = truth.true_states;
  j["field_ids"] = truth.field_ids;
  j["field_names"] = truth.field_names;
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < truth.transition.rows(); ++i) {
    std::vector<double> row(static_cast<size_t>(truth.transition.cols()));
    for (Eigen::Index c = 0; c < truth.transition.cols(); ++c)
      row[static_cast<size_t>(c)] = truth.transition(i, c);
    rows.push_back(std::move(row));
  }
  j["transition"] = rows;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("write failed for " + path);
}

Truth read_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  Truth t;
  try {
    t.k_true = j.at("k_true").get<int>();
    t.true_states = j.at("true_states").get<std::vector<int>>();
    t.field_ids = j.at("field_ids").get<std::vector<int>>();
    t.field_names = j.at("field_names").get<std::vector<std::string>>();
    const auto rows = j.at("transition").get<std::vector<std::vector<double>>>();
    t.transition.resize(static_cast<Eigen::Index>(rows.size()),
                        rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size())
        throw DataError(path + ": ragged transition matrix");
      for (size_t c = 0; c < rows[i].size(); ++c)
        t.transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            rows[i][c];
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return t;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace flowfield::io
