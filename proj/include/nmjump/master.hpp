#pragma once

#include <array>
#include <vector>

#include "nmjump/embedding.hpp"
#include "nmjump/model.hpp"
#include "nmjump/rk45.hpp"

namespace nmjump {

// Density matrix on the triple space, stored as nine d x d blocks W_{kl}.
// Supports the vector-space operations the integrator needs.
struct BlockDensity {
  Eigen::Index dim = 0;
  std::array<Matrix, 9> w;

  static BlockDensity zero(Eigen::Index d) {
    BlockDensity out;
    out.dim = d;
    for (Matrix& m : out.w) m = Matrix::Zero(d, d);
    return out;
  }

  // W(0) = rho0 (x) |chi><chi| with |chi> = (|1> + |2>)/sqrt(2): all four
  // blocks of the (1,2) corner equal rho0/2, block 3 empty.
  static BlockDensity initial(const Matrix& rho0) {
    BlockDensity out = zero(rho0.rows());
    const Matrix half = 0.5 * rho0;
    out.block(0, 0) = half;
    out.block(0, 1) = half;
    out.block(1, 0) = half;
    out.block(1, 1) = half;
    return out;
  }

  Matrix& block(int k, int l) { return w[static_cast<std::size_t>(3 * k + l)]; }
  const Matrix& block(int k, int l) const {
    return w[static_cast<std::size_t>(3 * k + l)];
  }

  Complex trace() const {
    return block(0, 0).trace() + block(1, 1).trace() + block(2, 2).trace();
  }
  Complex trace_w12() const { return block(0, 1).trace(); }

  void symmetrize() {
    for (int k = 0; k < 3; ++k) {
      for (int l = k; l < 3; ++l) {
        const Matrix sym = 0.5 * (block(k, l) + block(l, k).adjoint());
        block(k, l) = sym;
        block(l, k) = sym.adjoint();
      }
    }
  }
};

inline BlockDensity operator+(const BlockDensity& a, const BlockDensity& b) {
  BlockDensity out;
  out.dim = a.dim;
  for (std::size_t i = 0; i < 9; ++i) out.w[i] = a.w[i] + b.w[i];
  return out;
}

inline BlockDensity operator*(double s, const BlockDensity& a) {
  BlockDensity out;
  out.dim = a.dim;
  for (std::size_t i = 0; i < 9; ++i) out.w[i] = s * a.w[i];
  return out;
}

inline double max_abs(const BlockDensity& a) {
  double m = 0.0;
  for (const Matrix& b : a.w) m = std::max(m, max_abs(b));
  return m;
}

namespace detail {

inline void check_density(const Matrix& rho, Eigen::Index dim) {
  if (rho.rows() != dim || rho.cols() != dim)
    throw ValidationError("density matrix has wrong dimensions");
  if (hermiticity_defect(rho) > 1e-10)
    throw ValidationError("density matrix is not Hermitian");
  if (std::abs(rho.trace() - Complex(1.0, 0.0)) > 1e-9)
    throw ValidationError("density matrix trace is not 1");
}

// Integrate from t = 0 to the last grid time, emitting dense-output samples
// at every grid time through snap(index, state). post(y) runs after each
// accepted step.
template <class State, class Rhs, class Snap, class Post>
void integrate_on_grid(Rhs&& rhs, State y0, const std::vector<double>& grid,
                       const Rk45Options& opt, Snap&& snap, Post&& post) {
  std::size_t next = 0;
  while (next < grid.size() && grid[next] <= 0.0) {
    snap(next, y0);
    ++next;
  }
  if (next >= grid.size()) return;
  rk45_integrate(
      std::forward<Rhs>(rhs), std::move(y0), 0.0, grid.back(), opt,
      [&](const DenseSegment<State>& seg) {
        while (next < grid.size() && grid[next] <= seg.t1) {
          State y = grid[next] == seg.t1 ? seg.y1 : seg.eval(grid[next]);
          snap(next, y);
          ++next;
        }
        return next < grid.size();
      },
      std::forward<Post>(post));
}

}  // namespace detail

// Right-hand side of the time-local master equation.
inline Matrix tcl_rhs(const TclSpec& spec, double t, const Matrix& rho) {
  const Matrix h = spec.hamiltonian(t);
  const Complex mi(0.0, -1.0);
  Matrix k = mi * (h * rho - rho * h);
  for (const Channel& ch : spec.channels) {
    const Matrix c = ch.c(t);
    const Matrix d = ch.d(t);
    k += c * rho * d.adjoint() + d * rho * c.adjoint();
    const Matrix g = d.adjoint() * c + c.adjoint() * d;
    k -= 0.5 * (g * rho + rho * g);
  }
  return k;
}

// Deterministic reference integration of the time-local master equation.
// Hermiticity is re-symmetrized after each accepted step; the trace is left
// alone so that drift stays visible as a diagnostic.
inline std::vector<Matrix> solve_tcl(const TclSpec& spec, const Matrix& rho0,
                                     const std::vector<double>& grid,
                                     double tol) {
  detail::check_density(rho0, spec.dim);
  validate_time_grid(grid);
  Rk45Options opt;
  opt.rtol = tol;
  opt.atol = tol;  // scale ~ 1 for unit-trace states
  // resolution floor: the error estimate cannot see coefficient structure
  // that falls entirely between stage abscissae
  opt.h_max = std::max(grid.back() / 64.0, 1e-12);
  std::vector<Matrix> out(grid.size());
  detail::integrate_on_grid(
      [&](double t, const Matrix& rho) { return tcl_rhs(spec, t, rho); },
      Matrix(rho0), grid, opt,
      [&](std::size_t i, const Matrix& rho) {
        Matrix sym = 0.5 * (rho + rho.adjoint());
        const double drift = std::abs(sym.trace() - Complex(1.0, 0.0));
        if (drift > 1e-6)
          throw AccuracyError("solve_tcl: trace drift " +
                              std::to_string(drift) + " at t = " +
                              std::to_string(grid[i]));
        out[i] = std::move(sym);
      },
      [](Matrix& rho) { rho = 0.5 * (rho + rho.adjoint()); });
  return out;
}

// Right-hand side of the embedded Lindblad equation in block form. The
// channel structure makes every term block-local: J1/J2 act diagonally with
// (C, D) resp. (D, C) on blocks 1 and 2, J3/J4 feed Omega (W11 + W22)
// Omega^dag into the sink block, and the loss operator touches blocks 1 and
// 2 only.
inline BlockDensity extended_rhs(const EmbeddedGenerator& gen,
                                 const BlockDensity& w) {
  const Complex mi(0.0, -1.0);
  BlockDensity out;
  out.dim = w.dim;
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l)
      out.block(k, l) =
          mi * (gen.h_s * w.block(k, l) - w.block(k, l) * gen.h_s);

  for (const EmbeddedChannel& ch : gen.channels) {
    const Matrix* a1[2] = {&ch.c, &ch.d};  // J1 diagonal blocks
    const Matrix* a2[2] = {&ch.d, &ch.c};  // J2 diagonal blocks
    for (int k = 0; k < 2; ++k) {
      for (int l = 0; l < 2; ++l) {
        out.block(k, l) += (*a1[k]) * w.block(k, l) * a1[l]->adjoint() +
                           (*a2[k]) * w.block(k, l) * a2[l]->adjoint();
      }
    }
    out.block(2, 2) +=
        ch.omega * (w.block(0, 0) + w.block(1, 1)) * ch.omega.adjoint();
    for (int k = 0; k < 3; ++k) {
      for (int l = 0; l < 3; ++l) {
        if (k < 2) out.block(k, l) -= 0.5 * (ch.loss * w.block(k, l));
        if (l < 2) out.block(k, l) -= 0.5 * (w.block(k, l) * ch.loss);
      }
    }
  }
  return out;
}

struct ExtendedSolution {
  std::vector<BlockDensity> w;    // W(t) at each grid time
  std::vector<Matrix> rho;        // extracted W12 / tr W12
  std::vector<Complex> tr_w12;    // extraction denominators
};

// Integrates the embedded Lindblad equation from W(0) = rho0 (x) |chi><chi|
// and extracts rho(t) = W12(t) / tr W12(t) at every grid time.
inline ExtendedSolution solve_extended(const TclSpec& spec, const Matrix& rho0,
                                       const std::vector<double>& grid,
                                       double tol) {
  detail::check_density(rho0, spec.dim);
  validate_time_grid(grid);
  Rk45Options opt;
  opt.rtol = tol;
  opt.atol = tol;
  opt.h_max = std::max(grid.back() / 64.0, 1e-12);
  ExtendedSolution out;
  out.w.resize(grid.size());
  out.rho.resize(grid.size());
  out.tr_w12.resize(grid.size());
  detail::integrate_on_grid(
      [&](double t, const BlockDensity& w) {
        return extended_rhs(build_embedded(spec, t), w);
      },
      BlockDensity::initial(rho0), grid, opt,
      [&](std::size_t i, const BlockDensity& w_raw) {
        BlockDensity w = w_raw;
        w.symmetrize();
        const double drift = std::abs(w.trace() - Complex(1.0, 0.0));
        if (drift > 1e-6)
          throw AccuracyError("solve_extended: trace drift " +
                              std::to_string(drift) + " at t = " +
                              std::to_string(grid[i]));
        const Complex tr12 = w.trace_w12();
        if (std::abs(tr12) < 1e-12)
          throw AccuracyError(
              "solve_extended: tr W12 underflow at t = " +
              std::to_string(grid[i]) + "; extraction is ill-conditioned");
        Matrix rho = w.block(0, 1) / tr12;
        out.rho[i] = 0.5 * (rho + rho.adjoint());
        out.tr_w12[i] = tr12;
        out.w[i] = std::move(w);
      },
      [](BlockDensity& w) { w.symmetrize(); });
  return out;
}

// Expectation value of an observable A of the open system read off the
// extended state: tr{A rho} = tr{(A (x) sigma_x) W} / tr{(I (x) sigma_x) W}
// with sigma_x = |1><2| + |2><1| on the auxiliary space.
inline Complex observable_via_extended(const Matrix& a, const BlockDensity& w) {
  if (a.rows() != w.dim || a.cols() != w.dim)
    throw ValidationError("observable_via_extended: dimension mismatch");
  const Matrix coh = w.block(0, 1) + w.block(1, 0);
  const Complex den = coh.trace();
  if (std::abs(den) < 1e-12)
    throw AccuracyError("observable_via_extended: tr{(I (x) sigma_x) W} = 0");
  return Matrix(a * coh).trace() / den;
}

}  // namespace nmjump
