#pragma once

// Test-only oracles and generators. Everything here is deliberately
// independent of the implementation paths it is used to check: brute-force
// root bracketing, Taylor-series matrix exponentials, power iteration and
// adaptive quadrature instead of the library's eigensolver / RK45 routes.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "nmjump/linalg.hpp"
#include "nmjump/model.hpp"

namespace testsupport {

using nmjump::Complex;
using nmjump::Matrix;
using nmjump::Vector;

inline std::mt19937_64 make_rng(unsigned long long seed) {
  return std::mt19937_64(seed);
}

inline Matrix random_matrix(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = Complex(n(rng), n(rng));
  return m;
}

inline Matrix random_hermitian(std::mt19937_64& rng, int d) {
  const Matrix g = random_matrix(rng, d);
  return 0.5 * (g + g.adjoint());
}

inline Vector random_unit_vector(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = Complex(n(rng), n(rng));
  return v / v.norm();
}

inline Matrix random_density(std::mt19937_64& rng, int d) {
  const Matrix g = random_matrix(rng, d);
  Matrix rho = g * g.adjoint();
  rho /= rho.trace();
  return rho;
}

// Eigenvalues of a Hermitian matrix by sign changes of the characteristic
// polynomial det(M - x I), refined by bisection. Assumes distinct roots,
// which holds almost surely for random matrices.
inline std::vector<double> charpoly_eigenvalues(const Matrix& m,
                                                int scan_points = 20000) {
  const int d = static_cast<int>(m.rows());
  const double bound = m.cwiseAbs().rowwise().sum().maxCoeff() + 1.0;
  auto p = [&](double x) {
    const Matrix shifted = m - x * Matrix::Identity(d, d);
    return shifted.determinant().real();
  };
  std::vector<double> roots;
  double x_prev = -bound;
  double p_prev = p(x_prev);
  for (int i = 1; i <= scan_points; ++i) {
    const double x = -bound + 2.0 * bound * i / scan_points;
    const double px = p(x);
    if (p_prev == 0.0) roots.push_back(x_prev);
    if (p_prev * px < 0.0) {
      double lo = x_prev, hi = x, plo = p_prev;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double pm = p(mid);
        if (plo * pm <= 0.0) {
          hi = mid;
        } else {
          lo = mid;
          plo = pm;
        }
        if (hi - lo < 1e-13 * std::max(1.0, std::abs(mid))) break;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    x_prev = x;
    p_prev = px;
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// Dense matrix exponential by scaling and squaring with a Taylor series.
inline Matrix expm_oracle(const Matrix& a) {
  const int d = static_cast<int>(a.rows());
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.25)
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.25)));
  const Matrix b = a / std::pow(2.0, squarings);
  Matrix sum = Matrix::Identity(d, d);
  Matrix term = Matrix::Identity(d, d);
  for (int k = 1; k <= 80; ++k) {
    term = Matrix(term * b) / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-20 * sum.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) sum = Matrix(sum * sum);
  return sum;
}

// Largest eigenvalue of a Hermitian PSD matrix by plain power iteration.
inline double power_iteration_max_eig(const Matrix& m, std::mt19937_64& rng,
                                      int iters = 20000) {
  Vector v = random_unit_vector(rng, static_cast<int>(m.rows()));
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    Vector w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    w /= norm;
    const double next = std::real(Complex(w.dot(m * w)));
    if (i > 10 && std::abs(next - lambda) < 1e-14 * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
    v = w;
  }
  return lambda;
}

// Largest singular value of E via power iteration on E^dag E.
inline double power_iteration_op_norm(const Matrix& e, std::mt19937_64& rng) {
  return std::sqrt(
      std::max(0.0, power_iteration_max_eig(Matrix(e.adjoint() * e), rng)));
}

// Dense 3d x 3d materialization of a block operator (tests only).
template <class BlockOp>
Matrix block_to_dense(const BlockOp& op) {
  const Eigen::Index d = op.dim();
  Matrix out = Matrix::Zero(3 * d, 3 * d);
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l)
      if (op.has_block(k, l)) out.block(k * d, l * d, d, d) = op.block(k, l);
  return out;
}

// Random density matrix on the triple space, returned dense.
inline Matrix random_block_density_dense(std::mt19937_64& rng, int d) {
  return random_density(rng, 3 * d);
}

// Random constant-operator spec with 1..3 channels. Operator norms stay
// below 2; the (C, D) pairs are jointly rescaled so that the total embedding
// decay sum_a a_alpha stays moderate, keeping the W12 extraction
// well-conditioned over t in [0, 5].
inline nmjump::TclSpec random_constant_spec(std::mt19937_64& rng, int dim,
                                            int n_channels) {
  using nmjump::Matrix;
  std::uniform_real_distribution<double> a_target(0.05, 0.8 / n_channels);
  nmjump::TclSpec spec;
  spec.dim = dim;
  Matrix h = random_hermitian(rng, dim);
  h /= std::max(1.0, power_iteration_op_norm(h, rng));
  spec.hamiltonian = nmjump::constant_op(h);
  for (int a = 0; a < n_channels; ++a) {
    Matrix c = random_matrix(rng, dim);
    Matrix d = random_matrix(rng, dim);
    c /= std::max(1.0, power_iteration_op_norm(c, rng));
    d /= std::max(1.0, power_iteration_op_norm(d, rng));
    const Matrix e = c - d;
    const double a0 = power_iteration_max_eig(Matrix(e.adjoint() * e), rng);
    const double s = std::min(2.0, std::sqrt(a_target(rng) / std::max(a0, 1e-6)));
    spec.channels.push_back(
        {nmjump::constant_op(Matrix(s * c)), nmjump::constant_op(Matrix(s * d))});
  }
  return spec;
}

// Adaptive Simpson quadrature.
inline double adaptive_simpson(const std::function<double(double)>& f,
                               double a, double b, double tol,
                               int depth = 40) {
  auto simpson = [&](double lo, double hi, double flo, double fmid,
                     double fhi) {
    return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
  };
  std::function<double(double, double, double, double, double, double, int)>
      rec = [&](double lo, double hi, double flo, double fmid, double fhi,
                double whole, int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double fl = f(0.5 * (lo + mid));
    const double fr = f(0.5 * (mid + hi));
    const double left = simpson(lo, mid, flo, fl, fmid);
    const double right = simpson(mid, hi, fmid, fr, fhi);
    if (d <= 0 || std::abs(left + right - whole) < 15.0 * tol)
      return left + right + (left + right - whole) / 15.0;
    return rec(lo, mid, flo, fl, fmid, left, d - 1) +
           rec(mid, hi, fmid, fr, fhi, right, d - 1);
  };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), depth);
}

}  // namespace testsupport
