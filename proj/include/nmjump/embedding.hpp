#pragma once

#include <array>
#include <vector>

#include "nmjump/linalg.hpp"
#include "nmjump/model.hpp"

namespace nmjump {

// Operator on the triple space H (x) C^3, stored as nine d x d blocks.
// Block (k, l) maps auxiliary component l to component k; an empty (0 x 0)
// matrix means a structural zero. Auxiliary labels |1>, |2>, |3> are block
// indices 0, 1, 2.
class BlockOperator {
public:
  explicit BlockOperator(Eigen::Index dim) : dim_(dim) {}

  Eigen::Index dim() const { return dim_; }

  void set_block(int k, int l, Matrix m) {
    blocks_[static_cast<std::size_t>(3 * k + l)] = std::move(m);
  }
  bool has_block(int k, int l) const {
    return blocks_[static_cast<std::size_t>(3 * k + l)].size() > 0;
  }
  const Matrix& block(int k, int l) const {
    return blocks_[static_cast<std::size_t>(3 * k + l)];
  }

  std::array<Vector, 3> apply(const std::array<Vector, 3>& v) const {
    std::array<Vector, 3> out;
    for (int k = 0; k < 3; ++k) {
      out[k] = Vector::Zero(dim_);
      for (int l = 0; l < 3; ++l)
        if (has_block(k, l)) out[k] += block(k, l) * v[l];
    }
    return out;
  }

private:
  Eigen::Index dim_;
  std::array<Matrix, 9> blocks_;  // default-constructed 0 x 0 = zero
};

// The scalar a(t): largest eigenvalue of (C-D)^dag (C-D), clamped at zero.
// This is the smallest admissible choice, so a >= ||(C-D) psi||^2 for every
// unit psi.
inline double compute_a(const Matrix& c, const Matrix& d) {
  if (c.rows() != d.rows() || c.cols() != d.cols())
    throw ValidationError("compute_a: C and D must have equal dimensions");
  const Matrix e = c - d;
  return std::max(0.0, hermitian_max_eig(Matrix(e.adjoint() * e)));
}

// Principal Hermitian PSD solution of Omega^dag Omega = a I - (C-D)^dag (C-D).
// The unitary gauge freedom Omega -> U Omega is irrelevant: only
// Omega^dag Omega enters the dynamics.
inline Matrix compute_omega(const Matrix& c, const Matrix& d, double a) {
  const Matrix e = c - d;
  const Matrix m =
      a * Matrix::Identity(c.rows(), c.cols()) - e.adjoint() * e;
  try {
    return psd_sqrt(m);
  } catch (const PsdError& err) {
    throw PsdError(std::string("compute_omega: a violates the embedding "
                               "inequality: ") +
                   err.what());
  }
}

// One lifted channel at a fixed time: the originating pair (C, D), the
// scalar a, the operator Omega and the four Lindblad operators
//   J1 = C (x) |1><1| + D (x) |2><2|,   J2 = D (x) |1><1| + C (x) |2><2|,
//   J3 = Omega (x) |3><1|,              J4 = Omega (x) |3><2|.
// loss = a I + D^dag C + C^dag D, equal to Omega^dag Omega + C^dag C +
// D^dag D by construction; it is the operator appearing in
// sum_i Ji^dag Ji = loss (x) (|1><1| + |2><2|).
struct EmbeddedChannel {
  Matrix c;
  Matrix d;
  double a = 0.0;
  Matrix omega;
  std::array<BlockOperator, 4> j_ops;
  Matrix loss;
};

// The lifted Lindblad data at one time: H = H_S (x) I3 (stored as H_S and
// applied blockwise) plus one EmbeddedChannel per channel of the spec.
struct EmbeddedGenerator {
  Eigen::Index dim = 0;
  double t = 0.0;
  Matrix h_s;
  std::vector<EmbeddedChannel> channels;
};

inline EmbeddedGenerator build_embedded(const TclSpec& spec, double t) {
  EmbeddedGenerator gen;
  gen.dim = spec.dim;
  gen.t = t;
  gen.h_s = spec.hamiltonian(t);
  gen.channels.reserve(spec.channels.size());
  for (const Channel& ch : spec.channels) {
    Matrix c = ch.c(t);
    Matrix d = ch.d(t);
    const double a = compute_a(c, d);
    Matrix omega = compute_omega(c, d, a);
    EmbeddedChannel out{std::move(c), std::move(d), a, std::move(omega),
                        {BlockOperator(spec.dim), BlockOperator(spec.dim),
                         BlockOperator(spec.dim), BlockOperator(spec.dim)},
                        Matrix()};
    out.j_ops[0].set_block(0, 0, out.c);
    out.j_ops[0].set_block(1, 1, out.d);
    out.j_ops[1].set_block(0, 0, out.d);
    out.j_ops[1].set_block(1, 1, out.c);
    out.j_ops[2].set_block(2, 0, out.omega);
    out.j_ops[3].set_block(2, 1, out.omega);
    out.loss = a * Matrix::Identity(spec.dim, spec.dim) +
               out.d.adjoint() * out.c + out.c.adjoint() * out.d;
    gen.channels.push_back(std::move(out));
  }
  return gen;
}

// Effective non-Hermitian Hamiltonian of the no-jump drift,
// Hhat = H - (i/2) sum_i Ji^dag Ji, in block form: blocks 1 and 2 see
// h12 = H_S - (i/2) sum_a loss_a, block 3 evolves unitarily under H_S.
// Does not need Omega, so no eigendecomposition is performed.
struct DriftGenerator {
  Matrix h12;
  Matrix h3;
};

inline DriftGenerator drift_generator(const TclSpec& spec, double t) {
  DriftGenerator gen;
  gen.h3 = spec.hamiltonian(t);
  gen.h12 = gen.h3;
  const Complex half_i(0.0, 0.5);
  for (const Channel& ch : spec.channels) {
    const Matrix c = ch.c(t);
    const Matrix d = ch.d(t);
    const double a = compute_a(c, d);
    gen.h12 -= half_i * (a * Matrix::Identity(spec.dim, spec.dim) +
                         d.adjoint() * c + c.adjoint() * d);
  }
  return gen;
}

}  // namespace nmjump
