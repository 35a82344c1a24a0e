#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "nmjump/trajectory.hpp"

namespace nmjump {

// Running sums over trajectories at each grid time: the ratio-estimator
// numerator |psi1><psi2| and denominator <psi2|psi1>, the second moments
// needed for delta-method standard errors, and the jump-count histogram.
// Accumulators merge by plain addition, always in a fixed index order.
struct EnsembleAccumulator {
  std::vector<double> grid;
  Eigen::Index dim = 0;
  std::int64_t count = 0;

  std::vector<Matrix> sum_outer;        // sum of psi1 psi2^dag
  std::vector<Complex> sum_den;         // sum of <psi2|psi1>
  std::vector<RealMatrix> sum_outer_abs2;
  std::vector<Matrix> sum_outer_den;    // sum of outer_ij * conj(den)
  std::vector<double> sum_den_abs2;
  std::vector<double> sum_den_re2;
  std::vector<std::array<std::int64_t, 4>> jump_hist;  // N = 0, 1, 2, >= 3
  double max_norm_dev = 0.0;
  int max_jumps = 0;

  EnsembleAccumulator() = default;
  EnsembleAccumulator(std::vector<double> grid_times, Eigen::Index d)
      : grid(std::move(grid_times)), dim(d) {
    const std::size_t n = grid.size();
    sum_outer.assign(n, Matrix::Zero(d, d));
    sum_outer_abs2.assign(n, RealMatrix::Zero(d, d));
    sum_outer_den.assign(n, Matrix::Zero(d, d));
    sum_den.assign(n, Complex(0.0, 0.0));
    sum_den_abs2.assign(n, 0.0);
    sum_den_re2.assign(n, 0.0);
    jump_hist.assign(n, {0, 0, 0, 0});
  }

  void add_snapshot(std::size_t i, const Vector& psi1, const Vector& psi2,
                    const Vector& psi3, int n_jumps) {
    const Matrix outer = psi1 * psi2.adjoint();
    const Complex den = psi2.dot(psi1);  // <psi2|psi1>
    sum_outer[i] += outer;
    sum_den[i] += den;
    sum_outer_abs2[i] += outer.cwiseAbs2();
    sum_outer_den[i] += outer * std::conj(den);
    sum_den_abs2[i] += std::norm(den);
    sum_den_re2[i] += den.real() * den.real();
    jump_hist[i][static_cast<std::size_t>(std::min(n_jumps, 3))] += 1;
    max_jumps = std::max(max_jumps, n_jumps);
    const double dev = std::abs(psi1.squaredNorm() + psi2.squaredNorm() +
                                psi3.squaredNorm() - 1.0);
    max_norm_dev = std::max(max_norm_dev, dev);
  }

  void finish_trajectory() { count += 1; }

  void merge(const EnsembleAccumulator& other) {
    count += other.count;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      sum_outer[i] += other.sum_outer[i];
      sum_den[i] += other.sum_den[i];
      sum_outer_abs2[i] += other.sum_outer_abs2[i];
      sum_outer_den[i] += other.sum_outer_den[i];
      sum_den_abs2[i] += other.sum_den_abs2[i];
      sum_den_re2[i] += other.sum_den_re2[i];
      for (int b = 0; b < 4; ++b)
        jump_hist[i][static_cast<std::size_t>(b)] +=
            other.jump_hist[i][static_cast<std::size_t>(b)];
    }
    max_norm_dev = std::max(max_norm_dev, other.max_norm_dev);
    max_jumps = std::max(max_jumps, other.max_jumps);
  }
};

struct RhoEstimate {
  Matrix rho;                 // Hermitian part of the ratio estimate
  RealMatrix stderr_entries;  // delta-method standard error per entry
  double anti_hermitian_residual = 0.0;
  Complex mean_den{0.0, 0.0};        // mean <psi2|psi1>
  double mean_den_re_stderr = 0.0;   // standard error of Re mean_den
  std::int64_t n = 0;
};

// rho(t) = E[|psi1><psi2|] / E[<psi2|psi1>] with first-order ratio-variance
// propagation: Var(R_jk) ~ Var(X_jk - R_jk Y) / (n |E Y|^2).
inline RhoEstimate estimate_rho(const EnsembleAccumulator& acc,
                                std::size_t t_index) {
  if (acc.count < 2)
    throw ValidationError("estimate_rho: need at least 2 trajectories");
  const double n = static_cast<double>(acc.count);
  const Complex mean_den = acc.sum_den[t_index] / n;
  if (std::abs(mean_den) < 1e-10)
    throw EstimatorError(
        "estimate_rho: |E<psi2|psi1>| below the 1e-10 floor at t = " +
        std::to_string(acc.grid[t_index]) + "; the estimator is ill-conditioned");
  const Matrix ratio = acc.sum_outer[t_index] / (n * mean_den);

  RhoEstimate out;
  out.rho = 0.5 * (ratio + ratio.adjoint());
  out.anti_hermitian_residual = max_abs(Matrix(0.5 * (ratio - ratio.adjoint())));
  out.mean_den = mean_den;
  out.n = acc.count;

  const double abs_den2 = std::norm(mean_den);
  out.stderr_entries = RealMatrix::Zero(acc.dim, acc.dim);
  for (Eigen::Index j = 0; j < acc.dim; ++j) {
    for (Eigen::Index k = 0; k < acc.dim; ++k) {
      const Complex r = ratio(j, k);
      const double e_xx = acc.sum_outer_abs2[t_index](j, k) / n;
      const Complex e_xy = acc.sum_outer_den[t_index](j, k) / n;
      const double e_yy = acc.sum_den_abs2[t_index] / n;
      const double var =
          e_xx - 2.0 * (std::conj(r) * e_xy).real() + std::norm(r) * e_yy;
      out.stderr_entries(j, k) = std::sqrt(std::max(0.0, var) / (n * abs_den2));
    }
  }
  const double den_re_mean = mean_den.real();
  const double den_re_var =
      acc.sum_den_re2[t_index] / n - den_re_mean * den_re_mean;
  out.mean_den_re_stderr = std::sqrt(std::max(0.0, den_re_var) / n);
  return out;
}

struct EnsembleOptions {
  std::int64_t n_traj = 1;
  std::uint64_t seed = 0;
  double tol = 1e-8;
  int workers = 0;           // 0 = hardware concurrency
  bool keep_chunks = false;  // retain per-chunk partials (bootstrap)
};

// Trajectories are merged at a fixed chunk granularity, so the reduction
// order depends only on trajectory indices and the result is bitwise
// independent of the worker count.
inline constexpr std::int64_t kEnsembleChunk = 256;

struct EnsembleResult {
  EnsembleAccumulator total;
  std::vector<EnsembleAccumulator> chunks;  // kept only on request
};

inline EnsembleResult run_ensemble(const TclSpec& spec, const Vector& phi,
                                   const std::vector<double>& grid,
                                   const EnsembleOptions& options) {
  if (options.n_traj < 1)
    throw ValidationError("run_ensemble: n_traj must be >= 1");
  validate_time_grid(grid);
  const std::int64_t n_chunks =
      (options.n_traj + kEnsembleChunk - 1) / kEnsembleChunk;
  std::vector<EnsembleAccumulator> chunks(static_cast<std::size_t>(n_chunks));

  int workers = options.workers > 0
                    ? options.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = static_cast<int>(
      std::min<std::int64_t>(workers, n_chunks));

  std::atomic<std::int64_t> next_chunk{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&]() {
    try {
      while (true) {
        const std::int64_t chunk = next_chunk.fetch_add(1);
        if (chunk >= n_chunks) return;
        EnsembleAccumulator acc(grid, spec.dim);
        const std::int64_t begin = chunk * kEnsembleChunk;
        const std::int64_t end =
            std::min(options.n_traj, begin + kEnsembleChunk);
        for (std::int64_t k = begin; k < end; ++k) {
          TrajectoryState state = make_initial_state(
              phi, options.seed, static_cast<std::uint64_t>(k));
          simulate_trajectory(spec, state, grid, options.tol,
                              [&acc](std::size_t i, const Vector& p1,
                                     const Vector& p2, const Vector& p3,
                                     int n) {
                                acc.add_snapshot(i, p1, p2, p3, n);
                              });
          acc.finish_trajectory();
        }
        chunks[static_cast<std::size_t>(chunk)] = std::move(acc);
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  EnsembleResult result;
  result.total = EnsembleAccumulator(grid, spec.dim);
  for (const EnsembleAccumulator& chunk : chunks) result.total.merge(chunk);
  if (options.keep_chunks) result.chunks = std::move(chunks);
  return result;
}

// Chunk-level bootstrap of the p-style entry (row, col) of the ratio
// estimate: an optional cross-check of the delta-method standard error.
inline double bootstrap_stderr_entry(
    const std::vector<EnsembleAccumulator>& chunks, std::size_t t_index,
    Eigen::Index row, Eigen::Index col, int n_resamples, std::uint64_t seed) {
  if (chunks.size() < 2)
    throw ValidationError("bootstrap_stderr_entry: need at least 2 chunks");
  PhiloxStream rng(seed, 0x626f6f74ull);  // dedicated bootstrap stream
  std::vector<double> estimates;
  estimates.reserve(static_cast<std::size_t>(n_resamples));
  for (int b = 0; b < n_resamples; ++b) {
    Complex num(0.0, 0.0), den(0.0, 0.0);
    std::int64_t n = 0;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      const std::size_t pick = static_cast<std::size_t>(
          rng.uniform() * static_cast<double>(chunks.size()));
      const EnsembleAccumulator& chunk =
          chunks[std::min(pick, chunks.size() - 1)];
      num += chunk.sum_outer[t_index](row, col);
      den += chunk.sum_den[t_index];
      n += chunk.count;
    }
    if (n > 0 && std::abs(den) > 0.0)
      estimates.push_back((num / den).real());
  }
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= static_cast<double>(estimates.size());
  double var = 0.0;
  for (double e : estimates) var += (e - mean) * (e - mean);
  return std::sqrt(var / static_cast<double>(estimates.size() - 1));
}

}  // namespace nmjump
