#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "nmjump/embedding.hpp"
#include "nmjump/model.hpp"
#include "nmjump/rk45.hpp"
#include "nmjump/rng.hpp"

namespace nmjump {

struct JumpEvent {
  double t = 0.0;
  int op = 0;       // 0..3 for J1..J4
  int channel = 0;  // alpha
  // +1 / -1 when blocks 1 and 2 remain parallel / antiparallel after the
  // jump (the sign gamma bookkeeping of two-level channels), 0 otherwise.
  int phase = 0;
};

// State |Phi> = psi1 (x) |1> + psi2 (x) |2> + psi3 (x) |3>, normalized so
// that ||psi1||^2 + ||psi2||^2 + ||psi3||^2 = 1, plus the jump log and the
// trajectory's private RNG stream.
struct TrajectoryState {
  Vector psi1, psi2, psi3;
  double t = 0.0;
  std::vector<JumpEvent> jump_log;
  int n_jumps = 0;
  PhiloxStream rng{0, 0};
};

// |Phi(0)> = |phi> (x) |chi> with |chi> = (|1> + |2~)/sqrt(2):
// psi1(0) = psi2(0) = phi / sqrt(2), psi3(0) = 0.
inline TrajectoryState make_initial_state(const Vector& phi,
                                          std::uint64_t seed,
                                          std::uint64_t stream) {
  if (std::abs(phi.squaredNorm() - 1.0) > 1e-9)
    throw ValidationError("make_initial_state: phi must be normalized");
  TrajectoryState s;
  s.psi1 = phi / std::sqrt(2.0);
  s.psi2 = s.psi1;
  s.psi3 = Vector::Zero(phi.size());
  s.rng = PhiloxStream(seed, stream);
  return s;
}

namespace detail {

inline Vector stack_blocks(const Vector& a, const Vector& b, const Vector& c) {
  Vector y(a.size() * 3);
  y << a, b, c;
  return y;
}

// drift RHS on the stacked state: blocks 1 and 2 evolve under the
// non-Hermitian h12, block 3 unitarily under H_S
inline Vector drift_rhs(const TclSpec& spec, double t, const Vector& y) {
  const Eigen::Index d = spec.dim;
  const DriftGenerator g = drift_generator(spec, t);
  const Complex mi(0.0, -1.0);
  Vector dy(3 * d);
  dy.segment(0, d).noalias() = mi * (g.h12 * y.segment(0, d));
  dy.segment(d, d).noalias() = mi * (g.h12 * y.segment(d, d));
  dy.segment(2 * d, d).noalias() = mi * (g.h3 * y.segment(2 * d, d));
  return dy;
}

// Resolution floor for the drift integrator: at least 64 steps across the
// integration window.
inline double step_cap(double t0, double t1) {
  return std::max((t1 - t0) / 64.0, 1e-12);
}

// Integrate the unnormalized state from (t0, y normalized) until either the
// survival ||y||^2 drops to `target` or t_max is reached. The jump time is
// located on the dense output by a bisection/secant hybrid. emit(seg, t_stop)
// is called per accepted segment so callers can take grid samples up to
// min(seg.t1, t_stop). On a jump returns its time and leaves y at the
// (unnormalized) jump state; otherwise returns nullopt and leaves y at t_max.
//
// The step is capped at h_cap: with piecewise-structured rates (e.g.
// a(t) = 0 on whole stretches) the local error estimate is blind to
// whatever happens between stage abscissae, so steps grown across a
// quiescent stretch would silently alias the next active one.
template <class Emit>
std::optional<double> drift_until(const TclSpec& spec, Vector& y, double t0,
                                  double t_max, double target, double tol,
                                  double h_cap, Emit&& emit) {
  if (t_max <= t0) return std::nullopt;
  Rk45Options opt;
  opt.rtol = tol;
  opt.atol = tol * 1e-4;  // survival may decay through many decades
  opt.h_max = h_cap;
  std::optional<double> t_jump;
  Vector y_jump;
  y = rk45_integrate(
      [&spec](double t, const Vector& v) { return drift_rhs(spec, t, v); },
      std::move(y), t0, t_max, opt,
      [&](const DenseSegment<Vector>& seg) {
        if (seg.y1.squaredNorm() > target) {
          emit(seg, seg.t1);
          return true;
        }
        // bracketed root of ||y(theta)||^2 - target on [t0, t1]
        double lo = seg.t0, hi = seg.t1;
        double g_lo = seg.y0.squaredNorm() - target;
        double g_hi = seg.y1.squaredNorm() - target;
        if (g_lo < 0.0) {
          // the previous segment ended an epsilon above the target; jump now
          t_jump = seg.t0;
          y_jump = seg.y0;
          emit(seg, seg.t0);
          return false;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi);
             ++it) {
          double mid = lo + (hi - lo) * (g_lo / (g_lo - g_hi));  // secant
          const double margin = 0.125 * (hi - lo);
          if (!(mid > lo + margin) || !(mid < hi - margin))
            mid = 0.5 * (lo + hi);  // fall back to bisection
          const double g_mid = seg.eval(mid).squaredNorm() - target;
          if (g_mid >= 0.0) {
            lo = mid;
            g_lo = g_mid;
          } else {
            hi = mid;
            g_hi = g_mid;
          }
        }
        t_jump = 0.5 * (lo + hi);
        y_jump = seg.eval(*t_jump);
        emit(seg, *t_jump);
        return false;
      });
  if (t_jump) y = std::move(y_jump);
  return t_jump;
}

}  // namespace detail

// Deterministic drift of the normalized state to time t1: linear
// non-unitary propagation under Hhat followed by renormalization, equal to
// the norm-preserving nonlinear drift of the jump process.
inline TrajectoryState drift(const TclSpec& spec, TrajectoryState state,
                             double t1, double tol) {
  if (t1 < state.t) throw ValidationError("drift: t1 < state.t");
  Vector y = detail::stack_blocks(state.psi1, state.psi2, state.psi3);
  detail::drift_until(spec, y, state.t, t1,
                      -std::numeric_limits<double>::infinity(), tol,
                      detail::step_cap(state.t, t1),
                      [](const DenseSegment<Vector>&, double) {});
  const double norm = y.norm();
  if (!(norm > 0.0)) throw IntegrationError("drift: state norm underflow");
  y /= norm;
  const Eigen::Index d = spec.dim;
  state.psi1 = y.segment(0, d);
  state.psi2 = y.segment(d, d);
  state.psi3 = y.segment(2 * d, d);
  state.t = t1;
  return state;
}

// Unnormalized time-ordered propagation of the blocks; the squared norm of
// the result is the no-jump survival probability 1 - F(t1, state.t).
inline std::array<Vector, 3> drift_unnormalized(const TclSpec& spec,
                                                const TrajectoryState& state,
                                                double t1, double tol) {
  if (t1 < state.t) throw ValidationError("drift_unnormalized: t1 < state.t");
  Vector y = detail::stack_blocks(state.psi1, state.psi2, state.psi3);
  detail::drift_until(spec, y, state.t, t1,
                      -std::numeric_limits<double>::infinity(), tol,
                      detail::step_cap(state.t, t1),
                      [](const DenseSegment<Vector>&, double) {});
  const Eigen::Index d = spec.dim;
  return {y.segment(0, d), y.segment(d, d), y.segment(2 * d, d)};
}

// Waiting-time sample by the inverse-CDF/norm-decay method: the next jump
// happens at the smallest t1 with F(t1, state.t) = 1 - ||y(t1)||^2 >= u.
// Returns nullopt when no jump occurs before t_max.
inline std::optional<double> sample_waiting_time(const TclSpec& spec,
                                                 const TrajectoryState& state,
                                                 double t_max, double u,
                                                 double tol) {
  if (!(u > 0.0 && u < 1.0))
    throw ValidationError("sample_waiting_time: u must lie in (0,1)");
  Vector y = detail::stack_blocks(state.psi1, state.psi2, state.psi3);
  return detail::drift_until(spec, y, state.t, t_max, 1.0 - u, tol,
                             detail::step_cap(state.t, t_max),
                             [](const DenseSegment<Vector>&, double) {});
}

// Jump rates ||J_{i alpha} |Phi>||^2 at time t. The J3/J4 rates use
// <psi| (a I - E^dag E) |psi> directly, so no operator square root is
// required on the drift path.
struct JumpRates {
  std::vector<std::array<double, 4>> per_channel;
  double total = 0.0;
};

inline JumpRates jump_rates(const TclSpec& spec, const TrajectoryState& state,
                            double t) {
  JumpRates rates;
  rates.per_channel.reserve(spec.channels.size());
  for (const Channel& ch : spec.channels) {
    const Matrix c = ch.c(t);
    const Matrix d = ch.d(t);
    const double a = compute_a(c, d);
    const Matrix e = c - d;
    std::array<double, 4> r{};
    r[0] = (c * state.psi1).squaredNorm() + (d * state.psi2).squaredNorm();
    r[1] = (d * state.psi1).squaredNorm() + (c * state.psi2).squaredNorm();
    r[2] = std::max(0.0, a * state.psi1.squaredNorm() -
                             (e * state.psi1).squaredNorm());
    r[3] = std::max(0.0, a * state.psi2.squaredNorm() -
                             (e * state.psi2).squaredNorm());
    rates.total += r[0] + r[1] + r[2] + r[3];
    rates.per_channel.push_back(r);
  }
  return rates;
}

// Channel selection with probability ||J_i Phi||^2 / sum ||J Phi||^2 from a
// single uniform draw.
inline std::pair<int, int> select_channel(const TclSpec& spec,
                                          const TrajectoryState& state,
                                          double t, double u) {
  const JumpRates rates = jump_rates(spec, state, t);
  if (!(rates.total > 0.0))
    throw Error("select_channel: total jump rate is zero; the waiting-time "
                "sampler should not have fired");
  double acc = 0.0;
  const double threshold = u * rates.total;
  for (std::size_t alpha = 0; alpha < rates.per_channel.size(); ++alpha) {
    for (int i = 0; i < 4; ++i) {
      acc += rates.per_channel[alpha][static_cast<std::size_t>(i)];
      if (threshold <= acc) return {i, static_cast<int>(alpha)};
    }
  }
  return {3, static_cast<int>(rates.per_channel.size()) - 1};
}

// |Phi> -> J_{i alpha} |Phi> / ||J_{i alpha} |Phi>|| at time state.t.
inline TrajectoryState apply_jump(const TclSpec& spec, TrajectoryState state,
                                  int op, int channel) {
  const Channel& ch = spec.channels.at(static_cast<std::size_t>(channel));
  const double t = state.t;
  const Matrix c = ch.c(t);
  const Matrix d = ch.d(t);
  const Eigen::Index dim = spec.dim;
  Vector p1 = Vector::Zero(dim), p2 = Vector::Zero(dim),
         p3 = Vector::Zero(dim);
  switch (op) {
    case 0:  // J1 = C (x) |1><1| + D (x) |2><2|
      p1 = c * state.psi1;
      p2 = d * state.psi2;
      break;
    case 1:  // J2 = D (x) |1><1| + C (x) |2><2|
      p1 = d * state.psi1;
      p2 = c * state.psi2;
      break;
    case 2:  // J3 = Omega (x) |3><1|
      p3 = compute_omega(c, d, compute_a(c, d)) * state.psi1;
      break;
    case 3:  // J4 = Omega (x) |3><2|
      p3 = compute_omega(c, d, compute_a(c, d)) * state.psi2;
      break;
    default:
      throw ValidationError("apply_jump: op must be 0..3");
  }
  const double norm = std::sqrt(p1.squaredNorm() + p2.squaredNorm() +
                                p3.squaredNorm());
  if (!(norm > 0.0))
    throw Error("apply_jump: jump image has zero norm");
  state.psi1 = p1 / norm;
  state.psi2 = p2 / norm;
  state.psi3 = p3 / norm;

  int phase = 0;
  const double block_scale = std::max(state.psi1.norm(), state.psi2.norm());
  if (block_scale > 1e-12) {
    if (max_abs(Vector(state.psi2 - state.psi1)) <= 1e-9 * block_scale)
      phase = 1;
    else if (max_abs(Vector(state.psi2 + state.psi1)) <= 1e-9 * block_scale)
      phase = -1;
  }
  state.jump_log.push_back({t, op, channel, phase});
  state.n_jumps += 1;
  return state;
}

// One full trajectory over the grid; the state is advanced in place so the
// final jump log stays available. sink(i, psi1, psi2, psi3, n_jumps) is
// called once per grid time with the normalized blocks; grid samples are
// taken from the dense output, so they never perturb the jump statistics.
template <class Sink>
void simulate_trajectory(const TclSpec& spec, TrajectoryState& state,
                         const std::vector<double>& grid, double tol,
                         Sink&& sink) {
  const Eigen::Index d = spec.dim;
  const double t_end = grid.back();
  std::size_t next = 0;

  auto emit_state = [&](std::size_t i, const Vector& stacked) {
    const double inv = 1.0 / stacked.norm();
    sink(i, Vector(inv * stacked.segment(0, d)),
         Vector(inv * stacked.segment(d, d)),
         Vector(inv * stacked.segment(2 * d, d)), state.n_jumps);
  };

  Vector y = detail::stack_blocks(state.psi1, state.psi2, state.psi3);
  while (next < grid.size() && grid[next] <= state.t) {
    emit_state(next, y);
    ++next;
  }

  const double h_cap = detail::step_cap(grid.front(), t_end);
  while (state.t < t_end && next < grid.size()) {
    const double u = state.rng.uniform();
    const auto t_jump = detail::drift_until(
        spec, y, state.t, t_end, 1.0 - u, tol, h_cap,
        [&](const DenseSegment<Vector>& seg, double t_stop) {
          while (next < grid.size() && grid[next] <= t_stop) {
            emit_state(next, grid[next] == seg.t1 ? seg.y1
                                                  : seg.eval(grid[next]));
            ++next;
          }
        });
    if (!t_jump) {
      state.t = t_end;
      break;
    }
    // normalized pre-jump state at the jump time
    const double inv = 1.0 / y.norm();
    state.psi1 = inv * y.segment(0, d);
    state.psi2 = inv * y.segment(d, d);
    state.psi3 = inv * y.segment(2 * d, d);
    state.t = *t_jump;
    const double u_sel = state.rng.uniform();
    const auto [op, channel] = select_channel(spec, state, state.t, u_sel);
    state = apply_jump(spec, std::move(state), op, channel);
    y = detail::stack_blocks(state.psi1, state.psi2, state.psi3);
  }
  const double inv = 1.0 / y.norm();
  state.psi1 = inv * y.segment(0, d);
  state.psi2 = inv * y.segment(d, d);
  state.psi3 = inv * y.segment(2 * d, d);
}

// Convenience wrapper storing the snapshots (tests, single-trajectory use).
struct TrajectoryRecord {
  std::vector<std::array<Vector, 3>> snapshots;
  std::vector<int> n_jumps;
  std::vector<JumpEvent> jump_log;
};

inline TrajectoryRecord simulate_trajectory(const TclSpec& spec,
                                            const Vector& phi,
                                            const std::vector<double>& grid,
                                            std::uint64_t seed,
                                            std::uint64_t stream, double tol) {
  TrajectoryRecord record;
  record.snapshots.resize(grid.size());
  record.n_jumps.assign(grid.size(), 0);
  TrajectoryState state = make_initial_state(phi, seed, stream);
  simulate_trajectory(
      spec, state, grid, tol,
      [&record](std::size_t i, Vector p1, Vector p2, Vector p3, int n) {
        record.snapshots[i] = {std::move(p1), std::move(p2), std::move(p3)};
        record.n_jumps[i] = n;
      });
  record.jump_log = state.jump_log;
  return record;
}

}  // namespace nmjump
