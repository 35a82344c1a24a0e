// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Budgeted for a laptop-scale machine.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

#include "nmjump/ensemble.hpp"
#include "nmjump/io.hpp"
#include "nmjump/jaynes_cummings.hpp"
#include "nmjump/master.hpp"
#include "nmjump/run.hpp"
#include "nmjump/stats.hpp"
#include "support.hpp"

using namespace nmjump;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

const JcParams kJc{25.0, 1.0, 5.0};
const double kTEnd = 3.0;
const int kPoints = 200;

std::vector<double> make_grid(double t_end, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = t_end * i / (n - 1);
  g.back() = t_end;
  return g;
}

Vector excited() {
  Vector e = Vector::Zero(2);
  e[1] = 1.0;
  return e;
}

Matrix dense_w(const BlockDensity& w) {
  Matrix out(3 * w.dim, 3 * w.dim);
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l)
      out.block(k * w.dim, l * w.dim, w.dim, w.dim) = w.block(k, l);
  return out;
}

// Count statistically significant decreasing intervals: a drop of more than
// 5 combined standard errors below the running maximum starts one.
int count_decreasing_intervals(const std::vector<double>& y,
                               const std::vector<double>& se) {
  int intervals = 0;
  double run_max = y.front();
  double run_max_se = se.front();
  for (std::size_t i = 1; i < y.size(); ++i) {
    if (y[i] > run_max) {
      run_max = y[i];
      run_max_se = se[i];
    } else if (run_max - y[i] > 5.0 * (run_max_se + se[i])) {
      ++intervals;
      run_max = y[i];
      run_max_se = se[i];
    }
  }
  return intervals;
}

struct Fig3Run {
  std::vector<double> grid;
  EnsembleResult ensemble;
  double seconds = 0.0;
};

Fig3Run run_fig3() {
  Fig3Run out;
  out.grid = make_grid(kTEnd, kPoints);
  EnsembleOptions opt;
  opt.n_traj = 100000;
  opt.seed = 12345;
  opt.tol = 1e-8;
  const double t0 = now_s();
  out.ensemble = run_ensemble(jc_spec(kJc), excited(), out.grid, opt);
  out.seconds = now_s() - t0;
  return out;
}

void criterion_1(const Fig3Run& fig3, const JcRateIntegrals& integrals) {
  const auto& grid = fig3.grid;
  std::vector<double> pg(grid.size()), se(grid.size());
  int within = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const RhoEstimate est = estimate_rho(fig3.ensemble.total, i);
    pg[i] = est.rho(0, 0).real();
    se[i] = est.stderr_entries(0, 0);
    const double exact = 1.0 - std::exp(-integrals.int_gamma(grid[i]));
    if (std::abs(pg[i] - exact) <= 4.0 * se[i] + 1e-12) ++within;
  }
  const double frac =
      static_cast<double>(within) / static_cast<double>(grid.size());
  const int dips = count_decreasing_intervals(pg, se);
  const bool pass = frac >= 0.95 && dips >= 2 && fig3.seconds < 300.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "Fig.3 reproduction: |pg_mc - pg_exact| <= 4 stderr at %.1f%% "
                "of points (need >= 95%%), %d decreasing intervals (need >= "
                "2), runtime %.0f s (budget 300 s)",
                100.0 * frac, dips, fig3.seconds);
  report(1, pass, buf);
}

void criterion_2(const Fig3Run& fig3, const JcRateIntegrals& integrals) {
  const auto& grid = fig3.grid;
  int within = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const RhoEstimate est = estimate_rho(fig3.ensemble.total, i);
    const double got = 2.0 * est.mean_den.real();
    const double expected = std::exp(-integrals.int_a(grid[i]));
    if (std::abs(got - expected) <= 3.0 * 2.0 * est.mean_den_re_stderr + 1e-12)
      ++within;
  }
  const double frac =
      static_cast<double>(within) / static_cast<double>(grid.size());
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "denominator law E[2<psi2|psi1>] = exp(-int a) within 3 "
                "stderr at %.1f%% of points (need >= 95%%)",
                100.0 * frac);
  report(2, frac >= 0.95, buf);
}

struct RandomSpecCase {
  TclSpec spec;
  Matrix rho0;
};

std::vector<RandomSpecCase> random_cases(int count) {
  auto rng = testsupport::make_rng(0x5eedf00d);
  std::vector<RandomSpecCase> cases;
  for (int i = 0; i < count; ++i) {
    const int d = 2 + i % 3;
    const int nch = 1 + (i / 3) % 3;
    cases.push_back({testsupport::random_constant_spec(rng, d, nch),
                     testsupport::random_density(rng, d)});
  }
  return cases;
}

void criterion_3(const std::vector<RandomSpecCase>& cases) {
  const double t0 = now_s();
  const auto grid = make_grid(5.0, 11);
  double worst_gap = 0.0, worst_min_eig = 0.0, worst_trace_dev = 0.0;
  bool pass = true;
  for (const RandomSpecCase& c : cases) {
    const auto rho_tcl = solve_tcl(c.spec, c.rho0, grid, 1e-10);
    const ExtendedSolution sol = solve_extended(c.spec, c.rho0, grid, 1e-10);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      worst_gap = std::max(worst_gap,
                           max_abs(Matrix(sol.rho[i] - rho_tcl[i])));
      const Matrix w = dense_w(sol.w[i]);
      worst_min_eig = std::min(
          worst_min_eig, hermitian_eig(w, 1e-7).eigenvalues.minCoeff());
      worst_trace_dev = std::max(
          worst_trace_dev, std::abs(w.trace().real() - 1.0));
    }
  }
  const double secs = now_s() - t0;
  pass = worst_gap <= 1e-6 && worst_min_eig >= -1e-8 &&
         worst_trace_dev <= 1e-8 && secs < 120.0;
  char buf[220];
  std::snprintf(buf, sizeof(buf),
                "embedding-theorem oracle pair on %zu random specs: max gap "
                "%.2e (<= 1e-6), min eig W %.2e (>= -1e-8), max |tr W - 1| "
                "%.2e (<= 1e-8), runtime %.0f s (budget 120 s)",
                cases.size(), worst_gap, worst_min_eig, worst_trace_dev, secs);
  report(3, pass, buf);
}

void criterion_4(const std::vector<RandomSpecCase>& cases) {
  std::mt19937_64 rng(0xabcdef);
  std::uniform_real_distribution<double> times(0.0, 5.0);
  double worst = 0.0;
  for (const RandomSpecCase& c : cases) {
    for (int k = 0; k < 100; ++k) {
      const EmbeddedGenerator gen = build_embedded(c.spec, times(rng));
      for (const EmbeddedChannel& ch : gen.channels) {
        const Matrix lhs = ch.omega.adjoint() * ch.omega +
                           ch.c.adjoint() * ch.c + ch.d.adjoint() * ch.d;
        const Matrix rhs =
            ch.a * Matrix::Identity(gen.dim, gen.dim) +
            ch.d.adjoint() * ch.c + ch.c.adjoint() * ch.d;
        const double scale = std::max(1.0, max_abs(rhs));
        worst = std::max(worst, max_abs(Matrix(lhs - rhs)) / scale);
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "Omega-equation residual at 100 random times per spec: max "
                "relative residual %.2e (<= 1e-9)",
                worst);
  report(4, worst <= 1e-9, buf);
}

void criterion_5(const JcRateIntegrals& integrals) {
  const double t0 = now_s();
  const TclSpec spec = jc_spec(kJc);
  const auto grid = make_grid(kTEnd, 2);  // jump statistics only
  const std::int64_t n = 20000;

  std::vector<double> first_u, second_u;
  const double f1_end = 1.0 - std::exp(-integrals.int_abs_gamma(kTEnd));
  for (std::int64_t k = 0; k < n; ++k) {
    TrajectoryState state =
        make_initial_state(excited(), 777, static_cast<std::uint64_t>(k));
    simulate_trajectory(spec, state, grid, 1e-8,
                        [](std::size_t, const Vector&, const Vector&,
                           const Vector&, int) {});
    if (state.jump_log.empty()) continue;
    const double t1 = state.jump_log[0].t;
    first_u.push_back((1.0 - std::exp(-integrals.int_abs_gamma(t1))) / f1_end);
    if (jc_rates(kJc, t1).gamma < 0.0 && state.jump_log.size() >= 2) {
      const double t2 = state.jump_log[1].t;
      const double f2 = 1.0 - std::exp(-(integrals.int_a(t2) -
                                         integrals.int_a(t1)));
      const double f2_end = 1.0 - std::exp(-(integrals.int_a(kTEnd) -
                                             integrals.int_a(t1)));
      second_u.push_back(f2 / f2_end);
    }
  }
  const double secs = now_s() - t0;
  const KsResult ks1 = ks_test_uniform(first_u);
  const KsResult ks2 = ks_test_uniform(second_u);
  const bool pass = ks1.p_value > 0.01 && ks2.p_value > 0.01 &&
                    second_u.size() >= 500 && secs < 60.0;
  char buf[220];
  std::snprintf(buf, sizeof(buf),
                "waiting-time KS: first-jump p = %.3f (n = %zu), conditional "
                "second-jump p = %.3f (n = %zu), alpha = 0.01, runtime %.0f s "
                "(budget 60 s)",
                ks1.p_value, first_u.size(), ks2.p_value, second_u.size(),
                secs);
  report(5, pass, buf);
}

void criterion_6(const Fig3Run& fig3, const JcRateIntegrals& integrals) {
  const auto& grid = fig3.grid;
  const auto& acc = fig3.ensemble.total;
  const double n = static_cast<double>(acc.count);
  int within = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double got = 2.0 * (acc.sum_outer[i](0, 0) / n).real();
    const double expected = std::exp(-integrals.int_a(grid[i])) -
                            std::exp(-integrals.int_abs_gamma(grid[i]));
    const double var = acc.sum_outer_abs2[i](0, 0) / n -
                       std::norm(acc.sum_outer[i](0, 0) / n);
    const double se = 2.0 * std::sqrt(std::max(var, 0.0) / n);
    if (std::abs(got - expected) <= 3.0 * se + 1e-12) ++within;
  }
  const double frac =
      static_cast<double>(within) / static_cast<double>(grid.size());

  // never more than two jumps, and after J3/J4 the state lives in block 3
  const bool max_two = acc.max_jumps <= 2;
  bool sink_ok = true;
  int checked_two_jump = 0;
  const TclSpec spec = jc_spec(kJc);
  for (std::uint64_t k = 0; k < 4000 && checked_two_jump < 50; ++k) {
    const TrajectoryRecord rec =
        simulate_trajectory(spec, excited(), fig3.grid, 12345, k, 1e-8);
    if (rec.jump_log.size() == 2) {
      ++checked_two_jump;
      if (rec.jump_log[1].op < 2) sink_ok = false;
      const double t2 = rec.jump_log[1].t;
      for (std::size_t i = 0; i < fig3.grid.size(); ++i)
        if (fig3.grid[i] > t2 &&
            (rec.snapshots[i][0].norm() != 0.0 ||
             rec.snapshots[i][1].norm() != 0.0))
          sink_ok = false;
    }
  }
  const bool pass =
      frac >= 0.95 && max_two && sink_ok && checked_two_jump >= 25;
  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "jump bookkeeping: two-point identity within 3 stderr at "
                "%.1f%% of points (need >= 95%%), max jumps = %d (<= 2), %d "
                "two-jump trajectories all confined to block 3: %s",
                100.0 * frac, fig3.ensemble.total.max_jumps, checked_two_jump,
                sink_ok ? "yes" : "no");
  report(6, pass, buf);
}

double criterion_7() {
  auto rng = testsupport::make_rng(0xc0ffee);
  TclSpec spec;
  spec.dim = 2;
  spec.hamiltonian = constant_op(testsupport::random_hermitian(rng, 2));
  Matrix c = testsupport::random_matrix(rng, 2);
  c *= 0.8 / std::max(1.0, testsupport::power_iteration_op_norm(c, rng));
  spec.channels.push_back({constant_op(c), constant_op(c)});
  const Vector phi = testsupport::random_unit_vector(rng, 2);
  const auto grid = make_grid(3.0, 31);

  // exact block identities on individual trajectories
  double max_block_gap = 0.0, max_sink = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const TrajectoryRecord rec =
        simulate_trajectory(spec, phi, grid, 4242, k, 1e-8);
    for (const auto& snap : rec.snapshots) {
      max_block_gap =
          std::max(max_block_gap, max_abs(Vector(snap[0] - snap[1])));
      max_sink = std::max(max_sink, snap[2].norm());
    }
  }

  EnsembleOptions opt;
  opt.n_traj = 10000;
  opt.seed = 4242;
  const EnsembleResult res = run_ensemble(spec, phi, grid, opt);
  const auto rho_ref = solve_tcl(spec, phi * phi.adjoint(), grid, 1e-10);
  const double n = static_cast<double>(res.total.count);
  int within = 0, cells = 0;
  double max_reduction_gap = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const RhoEstimate est = estimate_rho(res.total, i);
    const Matrix direct = 2.0 * res.total.sum_outer[i] / n;
    max_reduction_gap = std::max(
        max_reduction_gap,
        max_abs(Matrix(est.rho - 0.5 * (direct + direct.adjoint()))));
    for (Eigen::Index r = 0; r < 2; ++r)
      for (Eigen::Index col = 0; col < 2; ++col) {
        ++cells;
        if (std::abs(est.rho(r, col) - rho_ref[i](r, col)) <=
            4.0 * est.stderr_entries(r, col) + 1e-12)
          ++within;
      }
  }
  const double frac = static_cast<double>(within) / cells;
  const bool pass = max_block_gap <= 1e-12 && max_sink <= 1e-12 &&
                    max_reduction_gap <= 1e-12 && frac >= 0.95;
  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "Markovian reduction (C = D): max |psi1 - psi2| = %.1e and "
                "max |psi3| = %.1e (<= 1e-12), estimate vs 2 E|psi1><psi1| "
                "gap %.1e, matches solve_tcl within 4 stderr at %.1f%% of "
                "entries (need >= 95%%)",
                max_block_gap, max_sink, max_reduction_gap, 100.0 * frac);
  report(7, pass, buf);
  return res.total.max_norm_dev;
}

void criterion_8() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "nmjump_acceptance_det";
  fs::remove_all(dir);
  RunConfig c;
  c.ntraj = 2000;
  c.points = 50;
  c.t_end = 1.5;
  c.mode = "trajectories";
  c.seed = 31415;

  auto mc_bytes = [&](const std::string& sub, int workers) {
    RunConfig cc = c;
    cc.workers = workers;
    cc.out = (dir / sub).string();
    run(cc);
    return read_file((dir / sub / "mc_estimate.csv").string());
  };
  const std::string w2a = mc_bytes("w2a", 2);
  const std::string w2b = mc_bytes("w2b", 2);
  const std::string w1 = mc_bytes("w1", 1);
  const std::string w8 = mc_bytes("w8", 8);
  const bool pass = w2a == w2b && w2a == w1 && w2a == w8;
  report(8, pass,
         std::string("determinism: identical reruns byte-identical: ") +
             (w2a == w2b ? "yes" : "no") +
             ", workers 1 vs 2 vs 8 byte-identical: " +
             (w2a == w1 && w2a == w8 ? "yes" : "no"));
}

void criterion_9(const Fig3Run& fig3, double other_max_dev) {
  const double dev =
      std::max(fig3.ensemble.total.max_norm_dev, other_max_dev);
  char buf[120];
  std::snprintf(buf, sizeof(buf),
                "norm invariant: max | ||Phi||^2 - 1 | = %.2e (<= 1e-8)", dev);
  report(9, dev <= 1e-8, buf);
}

}  // namespace

int main() {
  std::printf("nmjump acceptance suite\n");
  const JcRateIntegrals integrals(kJc, kTEnd);

  const Fig3Run fig3 = run_fig3();
  criterion_1(fig3, integrals);
  criterion_2(fig3, integrals);

  const auto cases = random_cases(50);
  criterion_3(cases);
  criterion_4(cases);
  criterion_5(integrals);
  criterion_6(fig3, integrals);

  const double extra_dev = criterion_7();
  criterion_8();
  criterion_9(fig3, extra_dev);

  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", g_failures);
  return 1;
}
