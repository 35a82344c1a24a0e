#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <string>
#include <utility>

#include "nmjump/errors.hpp"

namespace nmjump {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

// Time-dependent operator, evaluated on demand. Evaluators must be pure in t.
using MatrixFn = std::function<Matrix(double)>;

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }
inline double max_abs(const Vector& v) { return v.cwiseAbs().maxCoeff(); }

// Relative max-norm Hermiticity defect, ||M - M^dag|| / max(1, ||M||).
inline double hermiticity_defect(const Matrix& m) {
  return max_abs(Matrix(m - m.adjoint())) / std::max(1.0, max_abs(m));
}

inline bool is_hermitian(const Matrix& m, double tol = 1e-12) {
  return m.rows() == m.cols() && hermiticity_defect(m) <= tol;
}

struct HermitianEig {
  RealVector eigenvalues;  // ascending
  Matrix eigenvectors;     // unitary, columns match eigenvalues
};

// Eigendecomposition of a Hermitian matrix, M = V diag(lambda) V^dag.
inline HermitianEig hermitian_eig(const Matrix& m, double herm_tol = 1e-12) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw ValidationError("hermitian_eig: matrix must be square and non-empty");
  if (hermiticity_defect(m) > herm_tol)
    throw ValidationError("hermitian_eig: input is not Hermitian within tolerance");
  const Matrix sym = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success)
    throw IntegrationError("hermitian_eig: eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

// Largest eigenvalue of a Hermitian matrix. Closed form for d <= 2, solver
// otherwise.
inline double hermitian_max_eig(const Matrix& m, double herm_tol = 1e-12) {
  if (m.rows() == 1) return m(0, 0).real();
  if (m.rows() == 2 && m.cols() == 2) {
    const double p = m(0, 0).real();
    const double r = m(1, 1).real();
    const double q = std::abs(m(0, 1));
    return 0.5 * (p + r) + std::hypot(0.5 * (p - r), q);
  }
  return hermitian_eig(m, herm_tol).eigenvalues.maxCoeff();
}

// Principal Hermitian PSD square root. Eigenvalues in [-psd_floor, 0) are
// clamped to zero; anything below -psd_floor is a genuine PSD violation.
inline Matrix psd_sqrt(const Matrix& m, double herm_tol = 1e-12) {
  const auto eig = hermitian_eig(m, herm_tol);
  const double scale = std::max(1.0, max_abs(m));
  const double psd_floor = 1e-10 * scale;
  RealVector roots(eig.eigenvalues.size());
  for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
    const double lambda = eig.eigenvalues[i];
    if (lambda < -psd_floor)
      throw PsdError("psd_sqrt: eigenvalue " + std::to_string(lambda) +
                     " below PSD floor " + std::to_string(-psd_floor));
    roots[i] = lambda > 0.0 ? std::sqrt(lambda) : 0.0;
  }
  return eig.eigenvectors * roots.asDiagonal() * eig.eigenvectors.adjoint();
}

}  // namespace nmjump
