// flowfield: one-pass clustering of streaming velocity observations into
// latent vector fields, plus a synthetic stream generator and a scorer.
//
// Subcommands:
//   simulate  write a synthetic frame stream and its ground truth
//   fit       run the sequential MAP engine over a frame CSV
//   eval      score a fit against simulator ground truth
//
// Exit codes: 0 success, 1 usage, 2 data, 3 numerical failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flowfield/engine.hpp"
#include "flowfield/errors.hpp"
#include "flowfield/eval.hpp"
#include "flowfield/io.hpp"
#include "flowfield/log.hpp"
#include "flowfield/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace flowfield;

struct SimulateOpts {
  int k = 8;
  int steps = 100;
  double points = 100.0;
  double noise = 1.0;
  double conc = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> domain{-2.0, -2.0, 2.0, 2.0};
  std::string out;
};

struct FitOpts {
  std::string input;
  std::string out;
  double alpha = 1.0;
  double gamma = 1.0;
  double sigma = 1.0;   // noise SD
  double sigma0 = 1.0;  // kernel SD
  double lengthscale = 1.0;
  double rho_init = 0.0;
  std::string rho_mode = "frozen";
  long long cap = 0;  // 0 = unbounded
  std::string grid = "20x20";
  int kstep = 20;
  int threads = 0;
  bool normalize = false;
};

struct EvalOpts {
  std::string fit_dir;
  std::string truth;
  std::string out;
};

std::pair<int, int> parse_grid(const std::string& s) {
  int nx = 0, ny = 0;
  char sep = 0;
  if (std::sscanf(s.c_str(), "%d%c%d", &nx, &sep, &ny) != 3 || sep != 'x' ||
      nx < 2 || ny < 2)
    throw std::invalid_argument("--grid must be NxM with N,M >= 2");
  return {nx, ny};
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_simulate(const SimulateOpts& o) {
  SimConfig cfg;
  cfg.k_true = o.k;
  cfg.steps = o.steps;
  cfg.mean_points = o.points;
  cfg.noise_sd = o.noise;
  cfg.dirichlet_conc = o.conc;
  cfg.seed = o.seed;
  cfg.domain_min = {o.domain[0], o.domain[1]};
  cfg.domain_max = {o.domain[2], o.domain[3]};
  cfg.validate();

  fs::create_directories(o.out);
  const SimOutput sim = simulate(cfg);
  log::info("simulated " + std::to_string(sim.frames.size()) + " frames, " +
            std::to_string(cfg.k_true) + " regimes, seed " +
            std::to_string(cfg.seed));

  const std::string frames_path = (fs::path(o.out) / "frames.csv").string();
  io::write_frames(frames_path, sim.frames);

  io::Truth truth;
  truth.k_true = cfg.k_true;
  truth.true_states = sim.true_states;
  truth.transition = sim.true_transition;
  truth.field_ids = sim.field_ids;
  for (int id : sim.field_ids)
    truth.field_names.push_back(builtin_fields()[static_cast<size_t>(id)].name);
  io::write_truth((fs::path(o.out) / "truth.json").string(), truth);

  Eigen::Index total_points = 0;
  for (const Frame& f : sim.frames) total_points += f.size();
  std::printf("wrote %s (%zu frames, %lld points) and truth.json\n",
              frames_path.c_str(), sim.frames.size(),
              static_cast<long long>(total_points));
  return 0;
}

void write_field_grids(const FitResult& fit, const std::vector<Frame>& frames,
                       int nx, int ny, const fs::path& out_dir,
                       std::vector<std::string>* outputs) {
  const int p = static_cast<int>(frames[0].locations.dim());
  const int d = static_cast<int>(frames[0].velocities.cols());
  if (p != 2) {
    log::warn("field grids need 2-D locations; skipping field_<j>.csv");
    return;
  }
  Eigen::Vector2d lo = frames[0].locations.points.colwise().minCoeff();
  Eigen::Vector2d hi = frames[0].locations.points.colwise().maxCoeff();
  for (const Frame& f : frames) {
    lo = lo.cwiseMin(f.locations.points.colwise().minCoeff().transpose());
    hi = hi.cwiseMax(f.locations.points.colwise().maxCoeff().transpose());
  }

  Locations grid;
  grid.points.resize(static_cast<Eigen::Index>(nx) * ny, 2);
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy) {
      const double x = lo.x() + (hi.x() - lo.x()) * ix / (nx - 1);
      const double y = lo.y() + (hi.y() - lo.y()) * iy / (ny - 1);
      grid.points.row(static_cast<Eigen::Index>(ix) * ny + iy) << x, y;
    }

  for (size_t j = 0; j < fit.clusters.size(); ++j) {
    const FieldEstimate est =
        fit.clusters[j].posterior_field(grid, /*with_noise=*/false);
    const std::string name = "field_" + std::to_string(j + 1) + ".csv";
    std::ofstream out(out_dir / name);
    if (!out) throw DataError("cannot write " + (out_dir / name).string());
    out << "z1,z2";
    for (int c = 1; c <= d; ++c) out << ",mean_v" << c;
    for (int c = 1; c <= d; ++c) out << ",sd_v" << c;
    out << "\n";
    for (Eigen::Index g = 0; g < grid.count(); ++g) {
      out << io::format_double(grid.points(g, 0)) << ","
          << io::format_double(grid.points(g, 1));
      for (int c = 0; c < d; ++c)
        out << "," << io::format_double(est.mean(g, c));
      for (int c = 0; c < d; ++c) {
        const double var = std::max(0.0, est.cov(g * d + c, g * d + c));
        out << "," << io::format_double(std::sqrt(var));
      }
      out << "\n";
    }
    if (!out) throw DataError("write failed for " + (out_dir / name).string());
    outputs->push_back(name);
  }
}

int cmd_fit(const FitOpts& o) {
  const auto t_start = std::chrono::steady_clock::now();
  const auto [nx, ny] = parse_grid(o.grid);
  if (o.kstep < 1) throw std::invalid_argument("--kstep must be >= 1");
  if (o.cap < 0) throw std::invalid_argument("--cap must be >= 0");
  if (!(o.sigma >= 0.0) || !(o.sigma0 > 0.0) || !(o.lengthscale > 0.0))
    throw std::invalid_argument("--sigma must be >= 0; --sigma0 and --lengthscale > 0");

  RhoMode mode;
  if (o.rho_mode == "frozen")
    mode = RhoMode::kFrozen;
  else if (o.rho_mode == "refit")
    mode = RhoMode::kRefit;
  else
    throw std::invalid_argument("--rho-mode must be frozen or refit");

  const io::FrameFileDims dims = io::sniff_dims(o.input);
  std::vector<Frame> frames = io::read_frames(o.input, dims.p, dims.d);
  if (frames.empty()) throw DataError(o.input + ": no data rows");
  log::info("fitting " + std::to_string(frames.size()) + " frames (p=" +
            std::to_string(dims.p) + ", d=" + std::to_string(dims.d) + ")");
  std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> norm_box;
  if (o.normalize) norm_box = io::normalize_frames(&frames);

  EngineConfig cfg;
  cfg.alpha = o.alpha;
  cfg.gamma = o.gamma;
  cfg.sigma_sq = o.sigma * o.sigma;
  cfg.kernel = RbfKernel(o.sigma0 * o.sigma0, o.lengthscale);
  cfg.rho_init = o.rho_init;
  cfg.rho_mode = mode;
  if (o.cap > 0) cfg.cluster_point_cap = o.cap;
  cfg.d = dims.d;
  cfg.p = dims.p;
  cfg.threads = o.threads;

  fs::create_directories(o.out);
  const fs::path out_dir(o.out);

  std::vector<double> step_ms;
  step_ms.reserve(frames.size());
  auto t_prev = std::chrono::steady_clock::now();
  Engine engine(cfg, frames[0]);
  auto t_now = std::chrono::steady_clock::now();
  step_ms.push_back(std::chrono::duration<double, std::milli>(t_now - t_prev).count());
  for (size_t i = 1; i < frames.size(); ++i) {
    t_prev = t_now;
    engine.step(frames[i]);
    t_now = std::chrono::steady_clock::now();
    step_ms.push_back(std::chrono::duration<double, std::milli>(t_now - t_prev).count());
    if (i % 100 == 0)
      log::info("processed " + std::to_string(i + 1) + " frames, k=" +
                std::to_string(engine.state().counts.k_tilde()));
  }
  const FitResult fit = engine.result();

  std::vector<std::string> outputs;

  std::vector<io::AssignmentRow> rows(frames.size());
  for (size_t i = 0; i < frames.size(); ++i)
    rows[i] = {frames[i].t, fit.s_hat[i] + 1, fit.o_hat[i],
               fit.step_logliks[i]};
  io::write_assignments((out_dir / "assignments.csv").string(), rows);
  outputs.push_back("assignments.csv");

  io::write_matrix_csv((out_dir / "transition_1.csv").string(),
                       fit.transition.matrix);
  outputs.push_back("transition_1.csv");
  if (o.kstep != 1) {
    const std::string name = "transition_" + std::to_string(o.kstep) + ".csv";
    io::write_matrix_csv((out_dir / name).string(),
                         empirical_transition(fit.counts, o.kstep).matrix);
    outputs.push_back(name);
  }

  write_field_grids(fit, frames, nx, ny, out_dir, &outputs);

  const double wall_s = std::max(
      1e-9, std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t_start)
                .count());

  Eigen::Index total_points = 0;
  for (const Frame& f : frames) total_points += f.size();

  json manifest;
  manifest["command"] = "fit";
  manifest["input"] = o.input;
  manifest["input_hash"] = io::file_hash_hex(o.input);
  manifest["config"] = {
      {"alpha", o.alpha},          {"gamma", o.gamma},
      {"sigma", o.sigma},          {"sigma0", o.sigma0},
      {"lengthscale", o.lengthscale}, {"rho_init", o.rho_init},
      {"rho_mode", o.rho_mode},    {"cap", o.cap},
      {"grid", o.grid},            {"kstep", o.kstep},
      {"threads", o.threads},      {"normalize", o.normalize},
      {"p", dims.p},               {"d", dims.d}};
  if (norm_box) {
    manifest["normalize_box"] = {
        {"min", std::vector<double>(norm_box->first.data(),
                                    norm_box->first.data() + dims.p)},
        {"max", std::vector<double>(norm_box->second.data(),
                                    norm_box->second.data() + dims.p)}};
  }
  manifest["n_frames"] = frames.size();
  manifest["n_points"] = total_points;
  manifest["k_found"] = fit.k_found;
  manifest["total_loglik"] = fit.total_loglik;
  manifest["wall_time_seconds"] = wall_s;
  const auto [mn, mx] = std::minmax_element(step_ms.begin(), step_ms.end());
  double mean_ms = 0.0;
  for (double v : step_ms) mean_ms += v;
  mean_ms /= static_cast<double>(step_ms.size());
  manifest["step_time_ms"] = {{"min", *mn}, {"mean", mean_ms}, {"max", *mx}};
  if (!fit.transition.uniform_rows.empty())
    manifest["transition_uniform_rows"] = fit.transition.uniform_rows;
  manifest["outputs"] = outputs;
  {
    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw DataError("cannot write manifest.json");
    out << manifest.dump(2) << "\n";
    if (!out) throw DataError("write failed for manifest.json");
  }

  std::printf("fit: %zu frames, %lld points -> k=%d, loglik=%.6f, %.2fs\n",
              frames.size(), static_cast<long long>(total_points), fit.k_found,
              fit.total_loglik, wall_s);
  return 0;
}

int cmd_eval(const EvalOpts& o) {
  const fs::path fit_dir(o.fit_dir);
  const std::vector<io::AssignmentRow> rows =
      io::read_assignments((fit_dir / "assignments.csv").string());
  const io::Truth truth = io::read_truth(o.truth);
  if (rows.size() != truth.true_states.size())
    throw DataError("assignments cover " + std::to_string(rows.size()) +
                    " frames but truth has " +
                    std::to_string(truth.true_states.size()));

  std::vector<int> assigned(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) assigned[i] = rows[i].state;
  const double ari = adjusted_rand_index(assigned, truth.true_states);
  const int k_found =
      static_cast<int>(std::set<int>(assigned.begin(), assigned.end()).size());

  const std::map<int, int> majority =
      majority_label(assigned, truth.true_states);
  std::map<int, long long> support;
  for (int s : assigned) support[s] += 1;

  json clusters = json::array();
  double rmse_sum = 0.0;
  int rmse_count = 0;
  for (const auto& [cluster, true_state] : majority) {
    json entry;
    entry["cluster"] = cluster;
    entry["majority_true_state"] = true_state;
    entry["frames"] = support[cluster];
    const int field_idx = truth.field_ids.at(static_cast<size_t>(true_state - 1));
    const VectorField& field = builtin_fields().at(static_cast<size_t>(field_idx));
    entry["field_name"] = field.name;
    const fs::path field_file =
        fit_dir / ("field_" + std::to_string(cluster) + ".csv");
    if (fs::exists(field_file)) {
      // Columns: z1, z2, mean_v1..vd, sd_v1..vd (header skipped on read).
      std::vector<std::string> lines;
      {
        std::ifstream in(field_file);
        if (!in) throw DataError("cannot open " + field_file.string());
        std::string line;
        while (std::getline(in, line)) {
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (!line.empty()) lines.push_back(line);
        }
      }
      if (lines.size() < 2)
        throw DataError(field_file.string() + ": no grid rows");
      const Eigen::Index m = static_cast<Eigen::Index>(lines.size()) - 1;
      Eigen::MatrixXd grid(m, 2), means(m, 2);
      for (Eigen::Index i = 0; i < m; ++i) {
        std::stringstream ss(lines[static_cast<size_t>(i) + 1]);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() < 6)
          throw DataError(field_file.string() + ": short row");
        grid(i, 0) = vals[0];
        grid(i, 1) = vals[1];
        means(i, 0) = vals[2];
        means(i, 1) = vals[3];
      }
      const double rmse = field_rmse(grid, means, field);
      entry["rmse"] = rmse;
      rmse_sum += rmse;
      rmse_count += 1;
    }
    clusters.push_back(std::move(entry));
  }

  json out;
  out["k_true"] = truth.k_true;
  out["k_found"] = k_found;
  out["ari"] = ari;
  out["clusters"] = clusters;
  if (rmse_count > 0) out["mean_rmse"] = rmse_sum / rmse_count;

  const std::string out_path =
      o.out.empty() ? (fit_dir / "eval.json").string() : o.out;
  {
    std::ofstream f(out_path);
    if (!f) throw DataError("cannot write " + out_path);
    f << out.dump(2) << "\n";
    if (!f) throw DataError("write failed for " + out_path);
  }
  log::info("scored " + std::to_string(rows.size()) +
            " assignments against " + o.truth);
  std::printf("eval: k_true=%d k_found=%d ari=%.4f -> %s\n", truth.k_true,
              k_found, ari, out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowfield: streaming velocity-field clustering"};
  app.require_subcommand(1);

  SimulateOpts so;
  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic stream");
  sim->add_option("--k", so.k, "number of true fields (1-8)");
  sim->add_option("--steps", so.steps, "frames to generate");
  sim->add_option("--points", so.points, "mean points per frame");
  sim->add_option("--noise", so.noise, "observation noise SD");
  sim->add_option("--conc", so.conc, "Dirichlet concentration for transition rows");
  sim->add_option("--seed", so.seed, "RNG seed");
  sim->add_option("--domain", so.domain, "box as x0 y0 x1 y1")->expected(4);
  sim->add_option("--out", so.out, "output directory")->required();

  FitOpts fo;
  CLI::App* fit = app.add_subcommand("fit", "run the sequential MAP engine");
  fit->add_option("--input", fo.input, "frame CSV (header t,z1..zp,v1..vd)")
      ->required();
  fit->add_option("--out", fo.out, "output directory")->required();
  fit->add_option("--alpha", fo.alpha, "transition concentration");
  fit->add_option("--gamma", fo.gamma, "oracle concentration");
  fit->add_option("--sigma", fo.sigma, "observation noise SD");
  fit->add_option("--sigma0", fo.sigma0, "kernel SD");
  fit->add_option("--lengthscale", fo.lengthscale, "kernel lengthscale");
  fit->add_option("--rho-init", fo.rho_init, "new-cluster correlation");
  fit->add_option("--rho-mode", fo.rho_mode, "frozen | refit");
  fit->add_option("--cap", fo.cap, "per-cluster point budget (0 = unbounded)");
  fit->add_option("--grid", fo.grid, "field export grid, NxM");
  fit->add_option("--kstep", fo.kstep, "extra transition power to export");
  fit->add_option("--threads", fo.threads,
                  "likelihood fan-out width (0 = hardware)");
  fit->add_flag("--normalize", fo.normalize,
                "map locations into the unit box before fitting");

  EvalOpts eo;
  CLI::App* ev = app.add_subcommand("eval", "score a fit against ground truth");
  ev->add_option("--fit", eo.fit_dir, "fit output directory")->required();
  ev->add_option("--truth", eo.truth, "truth.json from simulate")->required();
  ev->add_option("--out", eo.out, "eval report path (default <fit>/eval.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(so);
    if (fit->parsed()) return cmd_fit(fo);
    if (ev->parsed()) return cmd_eval(eo);
    return 1;
  } catch (const std::invalid_argument& e) {
    flowfield::log::error(e.what());
    return 1;
  } catch (const flowfield::DataError& e) {
    flowfield::log::error(e.what());
    return 2;
  } catch (const flowfield::NumericalError& e) {
    flowfield::log::error(e.what());
    return 3;
  } catch (const std::exception& e) {
    flowfield::log::error(e.what());
    return 3;
  }
}
