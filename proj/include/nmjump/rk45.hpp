#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "nmjump/errors.hpp"
#include "nmjump/linalg.hpp"

namespace nmjump {

struct Rk45Options {
  double rtol = 1e-8;
  double atol = 0.0;       // pure relative control by default
  double h_max = std::numeric_limits<double>::infinity();
  double h_init = 0.0;     // 0 = choose automatically
  long max_steps = 20000000L;
};

// One accepted step with its endpoint derivatives; eval() is the cubic
// Hermite interpolant used for dense output.
template <class State>
struct DenseSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  State y0, y1, f0, f1;

  State eval(double t) const {
    const double h = t1 - t0;
    const double th = (t - t0) / h;
    const double th2 = th * th;
    const double th3 = th2 * th;
    const double h00 = 2 * th3 - 3 * th2 + 1;
    const double h10 = th3 - 2 * th2 + th;
    const double h01 = -2 * th3 + 3 * th2;
    const double h11 = th3 - th2;
    return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
  }
};

// Adaptive Dormand-Prince 5(4) with FSAL. Calls on_step(segment) after every
// accepted step; returning false stops the integration early. post_accept
// may mutate the committed state (e.g. Hermitian re-symmetrization); the
// mutation must stay within the local error for the FSAL derivative to
// remain valid. Error control: max-norm of the embedded difference against
// atol + rtol * max-norm of the state.
template <class State, class Rhs, class OnStep, class PostAccept>
State rk45_integrate(Rhs&& rhs, State y, double t0, double t1,
                     const Rk45Options& opt, OnStep&& on_step,
                     PostAccept&& post_accept) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b (5th order) minus the embedded 4th-order weights
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                          e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  if (t1 < t0) throw IntegrationError("rk45: t1 < t0");
  if (t1 == t0) return y;

  double t = t0;
  State f = rhs(t, y);
  const double span = t1 - t0;
  double h = opt.h_init > 0 ? opt.h_init : std::min(opt.h_max, 0.01 * span);
  h = std::min(h, span);

  for (long step = 0; step < opt.max_steps; ++step) {
    if (t + h > t1) h = t1 - t;
    const double h_floor = 16.0 * std::numeric_limits<double>::epsilon() *
                           std::max(1.0, std::abs(t));
    if (h < h_floor)
      throw IntegrationError("rk45: step size underflow at t = " +
                             std::to_string(t));

    const State k1 = f;
    const State k2 = rhs(t + c2 * h, State(y + h * (a21 * k1)));
    const State k3 = rhs(t + c3 * h, State(y + h * (a31 * k1 + a32 * k2)));
    const State k4 =
        rhs(t + c4 * h, State(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    const State k5 = rhs(
        t + c5 * h, State(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const State k6 = rhs(
        t + h,
        State(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    State y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const State k7 = rhs(t + h, y_new);  // FSAL
    const State err_vec =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double scale =
        opt.atol + opt.rtol * std::max({max_abs(y), max_abs(y_new), 1e-300});
    const double err = max_abs(err_vec) / scale;

    if (err <= 1.0) {
      DenseSegment<State> seg{t, t + h, std::move(y), y_new, std::move(f),
                              k7};
      t += h;
      y = std::move(y_new);
      f = k7;
      post_accept(y);
      const bool keep_going = on_step(seg);
      if (!keep_going) return y;
      if (t >= t1) return y;
    }
    double grow = 5.0;
    if (!std::isfinite(err)) {
      grow = 0.2;  // non-finite stages: shrink hard until underflow reports
    } else if (err > 0.0) {
      grow = std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    }
    h *= grow;
    h = std::min(h, opt.h_max);
  }
  throw IntegrationError("rk45: exceeded max step count");
}

template <class State, class Rhs, class OnStep>
State rk45_integrate(Rhs&& rhs, State y, double t0, double t1,
                     const Rk45Options& opt, OnStep&& on_step) {
  return rk45_integrate(std::forward<Rhs>(rhs), std::move(y), t0, t1, opt,
                        std::forward<OnStep>(on_step), [](State&) {});
}

template <class State, class Rhs>
State rk45_integrate(Rhs&& rhs, State y, double t0, double t1,
                     const Rk45Options& opt) {
  return rk45_integrate(std::forward<Rhs>(rhs), std::move(y), t0, t1, opt,
                        [](const DenseSegment<State>&) { return true; },
                        [](State&) {});
}

// Time-ordered propagation of v under a (generally non-Hermitian) generator:
// dv/dt = -i Hhat(t) v. The result is left unnormalized; with
// Hhat = H - (i/2) sum J^dag J the squared norm is the survival probability.
template <class HamFn>
Vector propagate_nonunitary(HamFn&& hhat, const Vector& v, double t0,
                            double t1, double tol) {
  if (t1 < t0) throw ValidationError("propagate_nonunitary: t1 < t0");
  const Complex mi(0.0, -1.0);
  Rk45Options opt;
  opt.rtol = tol;
  return rk45_integrate(
      [&](double t, const Vector& y) { return Vector(mi * (hhat(t) * y)); }, v,
      t0, t1, opt);
}

}  // namespace nmjump
