#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nmjump/ensemble.hpp"
#include "nmjump/io.hpp"
#include "nmjump/master.hpp"
#include "nmjump/model_io.hpp"

namespace nmjump {

struct RunConfig {
  std::string model = "jaynes_cummings";  // built-in name or model-file path
  double gamma0 = 25.0;
  double lambda = 1.0;
  double delta = 5.0;
  double t_end = 3.0;
  int points = 200;
  std::int64_t ntraj = 10000;
  std::uint64_t seed = 12345;
  double tol = 1e-8;
  int workers = 0;  // 0 = hardware concurrency
  std::string mode = "all";
  std::string out = "out";
};

inline void validate_config(const RunConfig& c) {
  if (!(c.t_end > 0.0)) throw ValidationError("config: t-end must be > 0");
  if (c.points < 2) throw ValidationError("config: points must be >= 2");
  if (c.ntraj < 1) throw ValidationError("config: ntraj must be >= 1");
  if (!(c.tol > 1e-14 && c.tol <= 1e-2))
    throw ValidationError("config: tol must lie in (1e-14, 1e-2]");
  if (c.workers < 0) throw ValidationError("config: workers must be >= 0");
  if (c.mode != "tcl" && c.mode != "embedded" && c.mode != "trajectories" &&
      c.mode != "all")
    throw ValidationError(
        "config: mode must be one of tcl, embedded, trajectories, all");
  if (c.model.empty()) throw ValidationError("config: model must be set");
  if (c.out.empty()) throw ValidationError("config: out must be set");
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  return nlohmann::json{
      {"model", c.model},   {"gamma0", c.gamma0}, {"lambda", c.lambda},
      {"delta", c.delta},   {"t_end", c.t_end},   {"points", c.points},
      {"ntraj", c.ntraj},   {"seed", c.seed},     {"tol", c.tol},
      {"workers", c.workers}, {"mode", c.mode},   {"out", c.out}};
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.model = j.at("model").get<std::string>();
  c.gamma0 = j.at("gamma0").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.delta = j.at("delta").get<double>();
  c.t_end = j.at("t_end").get<double>();
  c.points = j.at("points").get<int>();
  c.ntraj = j.at("ntraj").get<std::int64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.tol = j.at("tol").get<double>();
  c.workers = j.at("workers").get<int>();
  c.mode = j.at("mode").get<std::string>();
  c.out = j.at("out").get<std::string>();
  return c;
}

struct RunResult {
  std::vector<std::string> outputs;
  double wall_time_s = 0.0;
};

namespace detail {

inline std::vector<double> make_grid(double t_end, int points) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = t_end * i / (points - 1);
  grid.back() = t_end;
  return grid;
}

// cumulative int_0^t sum_a a_alpha(s) ds on the grid: exact for the JC
// model, adaptive quadrature otherwise
inline std::vector<double> cumulative_int_a(const LoadedModel& model,
                                            const std::vector<double>& grid) {
  std::vector<double> out(grid.size(), 0.0);
  if (model.jc) {
    const JcRateIntegrals integrals(*model.jc, grid.back());
    for (std::size_t i = 0; i < grid.size(); ++i)
      out[i] = integrals.int_a(grid[i]);
    return out;
  }
  auto total_a = [&](double t) {
    double sum = 0.0;
    for (const Channel& ch : model.spec.channels)
      sum += compute_a(ch.c(t), ch.d(t));
    return sum;
  };
  double acc = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    acc += [&] {
      // adaptive Simpson on one grid subinterval
      std::function<double(double, double, double, double, double, double,
                           int)>
          rec = [&](double lo, double hi, double flo, double fmid, double fhi,
                    double whole, int depth) -> double {
        const double mid = 0.5 * (lo + hi);
        const double fl = total_a(0.5 * (lo + mid));
        const double fr = total_a(0.5 * (mid + hi));
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi);
        if (depth <= 0 || std::abs(left + right - whole) < 1e-10)
          return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, fl, fmid, left, depth - 1) +
               rec(mid, hi, fmid, fr, fhi, right, depth - 1);
      };
      const double lo = grid[i - 1], hi = grid[i];
      const double flo = total_a(lo), fhi = total_a(hi),
                   fmid = total_a(0.5 * (lo + hi));
      return rec(lo, hi, flo, fmid, fhi,
                 (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi), 30);
    }();
    out[i] = acc;
  }
  return out;
}

inline void append_entries(std::vector<std::string>& names, Eigen::Index dim,
                           const char* prefix_re, const char* prefix_im) {
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) {
      names.push_back(std::string(prefix_re) + "_" + std::to_string(i) + "_" +
                      std::to_string(j));
      names.push_back(std::string(prefix_im) + "_" + std::to_string(i) + "_" +
                      std::to_string(j));
    }
}

inline void write_tcl_csv(const std::string& path,
                          const std::vector<double>& grid,
                          const std::vector<Matrix>& rho) {
  CsvWriter csv(path);
  const Eigen::Index d = rho.front().rows();
  std::vector<std::string> names{"t"};
  append_entries(names, d, "rho_re", "rho_im");
  names.insert(names.end(), {"trace", "min_eig", "purity"});
  csv.header(names);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<double> row{grid[i]};
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) {
        row.push_back(rho[i](r, c).real());
        row.push_back(rho[i](r, c).imag());
      }
    row.push_back(rho[i].trace().real());
    row.push_back(hermitian_eig(rho[i], 1e-8).eigenvalues.minCoeff());
    row.push_back(Matrix(rho[i] * rho[i]).trace().real());
    csv.row(row);
  }
}

inline Matrix block_density_dense(const BlockDensity& w) {
  Matrix out(3 * w.dim, 3 * w.dim);
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l)
      out.block(k * w.dim, l * w.dim, w.dim, w.dim) = w.block(k, l);
  return out;
}

inline void write_embedded_csv(const std::string& path,
                               const std::vector<double>& grid,
                               const ExtendedSolution& sol) {
  CsvWriter csv(path);
  const Eigen::Index d = sol.rho.front().rows();
  std::vector<std::string> names{"t"};
  append_entries(names, d, "rho_re", "rho_im");
  names.insert(names.end(), {"trace_w", "min_eig_w", "tr_w12"});
  csv.header(names);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<double> row{grid[i]};
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) {
        row.push_back(sol.rho[i](r, c).real());
        row.push_back(sol.rho[i](r, c).imag());
      }
    row.push_back(sol.w[i].trace().real());
    row.push_back(
        hermitian_eig(block_density_dense(sol.w[i]), 1e-7).eigenvalues
            .minCoeff());
    row.push_back(sol.tr_w12[i].real());
    csv.row(row);
  }
}

inline void write_mc_csv(const std::string& path,
                         const std::vector<double>& grid,
                         const LoadedModel& model,
                         const EnsembleAccumulator& acc) {
  CsvWriter csv(path);
  const Eigen::Index d = acc.dim;
  std::vector<std::string> names{"t",        "pg_exact",    "pg_mc",
                                 "pg_stderr", "denom_mc",   "denom_exact",
                                 "denom_stderr"};
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const std::string suffix =
          "_" + std::to_string(i) + "_" + std::to_string(j);
      names.push_back("rho_re" + suffix);
      names.push_back("rho_im" + suffix);
      names.push_back("rho_stderr" + suffix);
    }
  names.insert(names.end(),
               {"njumps0", "njumps1", "njumps2", "njumps3plus"});
  csv.header(names);

  const std::vector<double> int_a = cumulative_int_a(model, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const RhoEstimate est = estimate_rho(acc, i);
    const double pg_exact =
        model.jc ? 1.0 - std::norm(jc_amplitude(*model.jc, grid[i]).c)
                 : std::nan("");
    std::vector<double> row{grid[i],
                            pg_exact,
                            est.rho(0, 0).real(),
                            est.stderr_entries(0, 0),
                            2.0 * est.mean_den.real(),
                            std::exp(-int_a[i]),
                            2.0 * est.mean_den_re_stderr};
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) {
        row.push_back(est.rho(r, c).real());
        row.push_back(est.rho(r, c).imag());
        row.push_back(est.stderr_entries(r, c));
      }
    for (int b = 0; b < 4; ++b)
      row.push_back(static_cast<double>(
          acc.jump_hist[i][static_cast<std::size_t>(b)]));
    csv.row(row);
  }
}

}  // namespace detail

// Execute one configured run: deterministic solves and/or the Monte Carlo
// unraveling, CSV outputs, and a manifest that pins everything needed to
// reproduce the outputs byte for byte.
inline RunResult run(const RunConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  validate_config(config);

  LoadedModel model;
  if (config.model == "jaynes_cummings") {
    model = model_from_json(nlohmann::json{{"model", "jaynes_cummings"},
                                           {"gamma0", config.gamma0},
                                           {"lambda", config.lambda},
                                           {"delta", config.delta}});
  } else {
    model = load_model_file(config.model);
  }

  // Refuse windows containing an amplitude zero up front: the time-local
  // rates diverge there and no continuation is attempted in any mode.
  if (model.jc) JcRateIntegrals window_probe(*model.jc, config.t_end);

  std::filesystem::create_directories(config.out);
  const std::vector<double> grid = detail::make_grid(config.t_end,
                                                     config.points);
  const Matrix rho0 = model.psi0 * model.psi0.adjoint();

  RunResult result;
  auto out_path = [&](const char* name) {
    return (std::filesystem::path(config.out) / name).string();
  };

  if (config.mode == "tcl" || config.mode == "all") {
    const auto rho = solve_tcl(model.spec, rho0, grid, config.tol);
    const std::string path = out_path("tcl.csv");
    detail::write_tcl_csv(path, grid, rho);
    result.outputs.push_back(path);
  }
  if (config.mode == "embedded" || config.mode == "all") {
    const ExtendedSolution sol =
        solve_extended(model.spec, rho0, grid, config.tol);
    const std::string path = out_path("embedded.csv");
    detail::write_embedded_csv(path, grid, sol);
    result.outputs.push_back(path);
  }
  if (config.mode == "trajectories" || config.mode == "all") {
    EnsembleOptions opt;
    opt.n_traj = config.ntraj;
    opt.seed = config.seed;
    opt.tol = config.tol;
    opt.workers = config.workers;
    const EnsembleResult ens =
        run_ensemble(model.spec, model.psi0, grid, opt);
    const std::string path = out_path("mc_estimate.csv");
    detail::write_mc_csv(path, grid, model, ens.total);
    result.outputs.push_back(path);
  }

  result.wall_time_s = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t_start)
                           .count();
  nlohmann::json manifest{
      {"tool", "nmjump"},
      {"config", config_to_json(config)},
      {"inputs_hash", git_blob_sha1(model.canonical_json)},
      {"outputs", result.outputs},
      {"wall_time_s", result.wall_time_s}};
  write_file(out_path("manifest.json"), manifest.dump(2) + "\n");
  result.outputs.push_back(out_path("manifest.json"));
  return result;
}

}  // namespace nmjump
