#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "nmjump/errors.hpp"
#include "nmjump/model.hpp"

namespace nmjump {

// Damped Jaynes-Cummings model: two-level atom decaying into a Lorentzian
// bath of width lambda, detuned by delta, with Markovian rate gamma0. Basis
// order is (|g>, |e>) = (0, 1).
struct JcParams {
  double gamma0 = 1.0;
  double lambda = 1.0;
  double delta = 0.0;

  void validate() const {
    if (!(gamma0 > 0.0)) throw ValidationError("JcParams: gamma0 must be > 0");
    if (!(lambda > 0.0)) throw ValidationError("JcParams: lambda must be > 0");
    if (!std::isfinite(delta)) throw ValidationError("JcParams: delta must be finite");
  }
};

struct RatePair {
  double gamma = 0.0;  // decay rate, may be negative
  double shift = 0.0;  // Lamb-shift S(t)
};

namespace detail {

// sinh(z)/z, stable near z = 0
inline Complex sinch(Complex z) {
  if (std::abs(z) < 1e-4) {
    const Complex z2 = z * z;
    return 1.0 + z2 / 6.0 + z2 * z2 / 120.0;
  }
  return std::sinh(z) / z;
}

}  // namespace detail

struct JcAmplitude {
  Complex c;      // excited-state amplitude, c(0) = 1
  Complex c_dot;  // its derivative, c_dot(0) = 0
};

// Exact amplitude for the exponential bath kernel
//   f(tau) = (gamma0 lambda / 2) exp((i delta - lambda) tau),
// obtained from the equivalent linear system c' = -b,
// b' = (i delta - lambda) b + (gamma0 lambda / 2) c with c(0)=1, b(0)=0.
// In closed form, with s = i delta - lambda and k = gamma0 lambda / 2:
//   c(t)  = e^{s t / 2} [cosh(z) - (s t / 2) sinch(z)],   z = t sqrt(s^2-4k)/2
//   c'(t) = -k t e^{s t / 2} sinch(z)
inline JcAmplitude jc_amplitude(const JcParams& p, double t) {
  const Complex s(-p.lambda, p.delta);
  const Complex k(0.5 * p.gamma0 * p.lambda, 0.0);
  const Complex d = std::sqrt(s * s - 4.0 * k);
  const Complex z = 0.5 * t * d;
  const Complex pre = std::exp(0.5 * s * t);
  const Complex snc = detail::sinch(z);
  JcAmplitude out;
  out.c = pre * (std::cosh(z) - 0.5 * s * t * snc);
  out.c_dot = -k * t * pre * snc;
  return out;
}

// Decay rate and Lamb shift of the exact JC master equation,
// gamma(t) = -2 Re[c'(t)/c(t)], S(t) = -2 Im[c'(t)/c(t)]. Refuses to
// evaluate once the amplitude has (numerically) hit zero: there the
// time-local generator is singular.
inline RatePair jc_rates(const JcParams& p, double t) {
  p.validate();
  if (t < 0.0) throw ValidationError("jc_rates: t must be >= 0");
  const JcAmplitude amp = jc_amplitude(p, t);
  if (std::abs(amp.c) < 1e-12)
    throw AmplitudeZeroError("jc_rates: amplitude c(t) vanished at t = " +
                             std::to_string(t) +
                             "; rates diverge (time-local generator singular)");
  const Complex ratio = amp.c_dot / amp.c;
  return {-2.0 * ratio.real(), -2.0 * ratio.imag()};
}

namespace detail {

inline Matrix jc_sigma_minus() {
  Matrix s = Matrix::Zero(2, 2);
  s(0, 1) = 1.0;
  return s;
}

}  // namespace detail

// The JC model as a time-local spec: H_S(t) = S(t)/2 sigma_+ sigma_-,
// one channel with C(t) = sqrt(|gamma|/2) sigma_- and D(t) = sign(gamma) C(t).
inline TclSpec jc_spec(const JcParams& p) {
  p.validate();
  TclSpec spec;
  spec.dim = 2;
  spec.hamiltonian = [p](double t) {
    Matrix h = Matrix::Zero(2, 2);
    h(1, 1) = 0.5 * jc_rates(p, t).shift;
    return h;
  };
  Channel ch;
  ch.c = [p](double t) {
    const double gamma = jc_rates(p, t).gamma;
    return Matrix(std::sqrt(0.5 * std::abs(gamma)) * detail::jc_sigma_minus());
  };
  ch.d = [p](double t) {
    const double gamma = jc_rates(p, t).gamma;
    const double sign = gamma > 0.0 ? 1.0 : (gamma < 0.0 ? -1.0 : 0.0);
    return Matrix(sign * std::sqrt(0.5 * std::abs(gamma)) *
                  detail::jc_sigma_minus());
  };
  spec.channels.push_back(std::move(ch));
  return spec;
}

// Exact integrals of the JC rates over [0, t], based on the amplitude
// identity exp(-int_0^t gamma) = |c(t)|^2 and on locating the sign changes
// of gamma. Needed for the closed-form curves p_g, the waiting-time CDFs and
// the trace-decay law.
class JcRateIntegrals {
public:
  JcRateIntegrals(const JcParams& p, double t_max, int scan_points = 20000)
      : params_(p), t_max_(t_max) {
    p.validate();
    if (!(t_max > 0.0)) throw ValidationError("JcRateIntegrals: t_max must be > 0");
    // gamma and -Re[c_dot conj(c)] share their sign (|c|^2 > 0)
    auto g = [&](double t) {
      const JcAmplitude amp = jc_amplitude(params_, t);
      return -(amp.c_dot * std::conj(amp.c)).real();
    };
    double t_prev = 0.0;
    double g_prev = g(t_prev);
    for (int i = 1; i <= scan_points; ++i) {
      const double t = t_max * static_cast<double>(i) / scan_points;
      if (std::abs(jc_amplitude(p, t).c) < 1e-9)
        throw AmplitudeZeroError(
            "JcRateIntegrals: amplitude zero inside [0, t_max] near t = " +
            std::to_string(t));
      const double gt = g(t);
      if (g_prev != 0.0 && gt != 0.0 && ((g_prev < 0) != (gt < 0))) {
        double lo = t_prev, hi = t, glo = g_prev;
        for (int it = 0; it < 120; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double gm = g(mid);
          if ((glo < 0) != (gm < 0)) {
            hi = mid;
          } else {
            lo = mid;
            glo = gm;
          }
          if (hi - lo < 1e-14 * std::max(1.0, std::abs(mid))) break;
        }
        const double root = 0.5 * (lo + hi);
        // Re[c_dot conj(c)] flips sign both where gamma crosses zero and
        // where c itself vanishes; the latter is a pole of the rates and the
        // whole window must be refused, not split.
        if (std::abs(jc_amplitude(p, root).c) < 1e-9)
          throw AmplitudeZeroError(
              "JcRateIntegrals: amplitude zero inside [0, t_max] at t = " +
              std::to_string(root));
        sign_changes_.push_back(root);
      }
      t_prev = t;
      g_prev = gt;
    }
  }

  // int_0^t gamma(s) ds = -2 ln |c(t)|
  double int_gamma(double t) const {
    check_range(t);
    const JcAmplitude amp = jc_amplitude(params_, t);
    const double c2 = std::norm(amp.c);
    if (c2 < 1e-24)
      throw AmplitudeZeroError("JcRateIntegrals: amplitude vanished");
    return -std::log(c2);
  }

  // int_0^t |gamma(s)| ds, summed over the constant-sign pieces
  double int_abs_gamma(double t) const {
    check_range(t);
    double total = 0.0;
    double left = 0.0;
    for (double sc : sign_changes_) {
      if (sc >= t) break;
      total += std::abs(piece(left, sc));
      left = sc;
    }
    total += std::abs(piece(left, t));
    return total;
  }

  // int_0^t a(s) ds with a = |gamma| - gamma
  double int_a(double t) const { return int_abs_gamma(t) - int_gamma(t); }

  const std::vector<double>& sign_changes() const { return sign_changes_; }
  double t_max() const { return t_max_; }

private:
  void check_range(double t) const {
    if (t < 0.0 || t > t_max_ * (1.0 + 1e-12))
      throw ValidationError("JcRateIntegrals: t outside [0, t_max]");
  }

  double piece(double a, double b) const {
    if (b <= a) return 0.0;
    const double ca = std::norm(jc_amplitude(params_, a).c);
    const double cb = std::norm(jc_amplitude(params_, b).c);
    if (ca < 1e-24 || cb < 1e-24)
      throw AmplitudeZeroError("JcRateIntegrals: amplitude vanished");
    return -std::log(cb / ca);
  }

  JcParams params_;
  double t_max_ = 0.0;
  std::vector<double> sign_changes_;
};

}  // namespace nmjump
