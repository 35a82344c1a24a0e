#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "nmjump/linalg.hpp"

namespace nmjump {

// One decay channel of the time-local master equation: the pair of
// (possibly time dependent) operators C(t), D(t). C = D is the Lindblad case.
struct Channel {
  MatrixFn c;
  MatrixFn d;
};

// A time-local master equation
//   drho/dt = -i[H_S, rho] + sum_a (C_a rho D_a^dag + D_a rho C_a^dag)
//             - 1/2 sum_a {D_a^dag C_a + C_a^dag D_a, rho}.
// Evaluators must be pure functions of t so a spec can be shared across
// worker threads.
struct TclSpec {
  Eigen::Index dim = 0;
  MatrixFn hamiltonian;  // H_S(t), Hermitian at every t
  std::vector<Channel> channels;
};

inline MatrixFn constant_op(Matrix m) {
  return [m = std::move(m)](double) { return m; };
}

// Piecewise-linear interpolation in t of tabulated matrix entries. Outside
// the table the nearest sample is held constant.
class TabulatedMatrix {
public:
  TabulatedMatrix(std::vector<double> times, std::vector<Matrix> matrices)
      : times_(std::move(times)), matrices_(std::move(matrices)) {
    if (times_.empty() || times_.size() != matrices_.size())
      throw ValidationError("TabulatedMatrix: times and matrices must be non-empty and equal-length");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (times_[i] <= times_[i - 1])
        throw ValidationError("TabulatedMatrix: times must be strictly ascending");
    for (const Matrix& m : matrices_)
      if (m.rows() != matrices_[0].rows() || m.cols() != matrices_[0].cols())
        throw ValidationError("TabulatedMatrix: inconsistent matrix dimensions");
  }

  Matrix operator()(double t) const {
    if (t <= times_.front()) return matrices_.front();
    if (t >= times_.back()) return matrices_.back();
    const auto hi = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t i = static_cast<std::size_t>(hi - times_.begin());
    const double w = (t - times_[i - 1]) / (times_[i] - times_[i - 1]);
    return (1.0 - w) * matrices_[i - 1] + w * matrices_[i];
  }

private:
  std::vector<double> times_;
  std::vector<Matrix> matrices_;
};

inline void validate_time_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ValidationError("time grid is empty");
  if (grid.front() < 0.0)
    throw ValidationError("time grid must start at t >= 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw ValidationError("time grid must be strictly ascending");
}

struct SpecViolation {
  double t = 0.0;
  std::string what;
};

struct SpecReport {
  std::vector<SpecViolation> violations;
  // max over grid times and channels of the operator 2-norm of C - D; this
  // bounds the embedding scalar a(t) by its square.
  double max_cd_gap_norm = 0.0;
  bool ok() const { return violations.empty(); }
};

// Grid-sampled sanity check of a spec: Hermiticity of H_S, finiteness and
// shape of all channel operators. Collects violations instead of throwing.
inline SpecReport validate_spec(const TclSpec& spec,
                                const std::vector<double>& grid) {
  SpecReport report;
  auto flag = [&](double t, std::string what) {
    report.violations.push_back({t, std::move(what)});
  };
  if (spec.dim < 1) flag(0.0, "dim must be >= 1");
  if (!spec.hamiltonian) flag(0.0, "missing Hamiltonian evaluator");
  if (!report.ok()) return report;

  for (double t : grid) {
    try {
      const Matrix h = spec.hamiltonian(t);
      if (h.rows() != spec.dim || h.cols() != spec.dim)
        flag(t, "H_S has wrong dimensions");
      else if (!h.allFinite())
        flag(t, "H_S has non-finite entries");
      else if (hermiticity_defect(h) > 1e-10)
        flag(t, "H_S is not Hermitian");
    } catch (const Error& e) {
      flag(t, std::string("H_S evaluator failed: ") + e.what());
    }

    for (std::size_t a = 0; a < spec.channels.size(); ++a) {
      const std::string tag = "channel " + std::to_string(a) + ": ";
      try {
        const Matrix c = spec.channels[a].c(t);
        const Matrix d = spec.channels[a].d(t);
        if (c.rows() != spec.dim || c.cols() != spec.dim ||
            d.rows() != spec.dim || d.cols() != spec.dim) {
          flag(t, tag + "operator has wrong dimensions");
          continue;
        }
        if (!c.allFinite() || !d.allFinite()) {
          flag(t, tag + "operator has non-finite entries");
          continue;
        }
        const Matrix e = c - d;
        const double op_norm = std::sqrt(
            std::max(0.0, hermitian_max_eig(Matrix(e.adjoint() * e))));
        report.max_cd_gap_norm = std::max(report.max_cd_gap_norm, op_norm);
      } catch (const Error& e) {
        flag(t, tag + std::string("evaluator failed: ") + e.what());
      }
    }
  }
  return report;
}

}  // namespace nmjump
