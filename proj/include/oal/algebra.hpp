#pragma once

// Linear-algebra substrate for the four-level atom + single cavity mode:
// truncated Fock space, tensor-product operators, states, expectations.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

#include "oal/common.hpp"

namespace oal {

using MatrixXcd = Eigen::MatrixXcd;
using VectorXcd = Eigen::VectorXcd;

// Hyperfine levels of the lasing scheme. F3/F4 are the 6S_1/2 ground levels,
// F3p/F4p the 6P_3/2 excited ones.
enum class Level : int { F3 = 0, F4 = 1, F3p = 2, F4p = 3 };

inline const char* level_name(Level l) {
  switch (l) {
    case Level::F3: return "3";
    case Level::F4: return "4";
    case Level::F3p: return "3'";
    case Level::F4p: return "4'";
  }
  return "?";
}

// Product space atom (x) field, in that fixed factor order. Basis index of
// |level, n> is level*(n_max+1) + n; the labeling helpers below are the
// single source of truth for that layout.
struct HilbertSpace {
  int atom_dim = 4;
  int fock_cutoff = 8;  // n_max

  explicit HilbertSpace(int n_max = 8) : fock_cutoff(n_max) {
    if (n_max < 1) throw std::invalid_argument("HilbertSpace: fock_cutoff must be >= 1");
  }

  int fock_dim() const { return fock_cutoff + 1; }
  int total_dim() const { return atom_dim * fock_dim(); }

  int index_of(Level l, int n) const {
    if (n < 0 || n > fock_cutoff) throw std::invalid_argument("HilbertSpace: photon number out of range");
    return static_cast<int>(l) * fock_dim() + n;
  }
  Level level_of(int index) const { return static_cast<Level>(index / fock_dim()); }
  int photons_of(int index) const { return index % fock_dim(); }

  friend bool operator==(const HilbertSpace& a, const HilbertSpace& b) {
    return a.atom_dim == b.atom_dim && a.fock_cutoff == b.fock_cutoff;
  }
  friend bool operator!=(const HilbertSpace& a, const HilbertSpace& b) { return !(a == b); }
};

inline MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

struct Operator {
  HilbertSpace space;
  MatrixXcd m;

  Operator(HilbertSpace s, MatrixXcd mat) : space(s), m(std::move(mat)) {
    if (m.rows() != space.total_dim() || m.cols() != space.total_dim())
      throw std::invalid_argument("Operator: matrix shape inconsistent with space");
  }

  Operator adjoint() const { return {space, m.adjoint()}; }
  double hermiticity_defect() const { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }
  bool is_hermitian(double tol = 1e-12) const { return hermiticity_defect() <= tol; }

  friend Operator operator+(const Operator& a, const Operator& b) {
    require_same_space(a, b);
    return {a.space, a.m + b.m};
  }
  friend Operator operator-(const Operator& a, const Operator& b) {
    require_same_space(a, b);
    return {a.space, a.m - b.m};
  }
  friend Operator operator*(const Operator& a, const Operator& b) {
    require_same_space(a, b);
    return {a.space, a.m * b.m};
  }
  friend Operator operator*(complexd c, const Operator& a) { return {a.space, c * a.m}; }
  friend Operator operator*(double c, const Operator& a) { return {a.space, c * a.m}; }

  static void require_same_space(const Operator& a, const Operator& b) {
    if (a.space != b.space) throw std::invalid_argument("Operator: space mismatch");
  }
};

struct StateVector {
  HilbertSpace space;
  VectorXcd v;

  StateVector(HilbertSpace s, VectorXcd amps) : space(s), v(std::move(amps)) {
    if (v.size() != space.total_dim())
      throw std::invalid_argument("StateVector: amplitude count inconsistent with space");
  }

  double norm() const { return v.norm(); }
  void normalize() { v /= v.norm(); }
};

struct DensityMatrix {
  HilbertSpace space;
  MatrixXcd m;

  DensityMatrix(HilbertSpace s, MatrixXcd mat) : space(s), m(std::move(mat)) {
    if (m.rows() != space.total_dim() || m.cols() != space.total_dim())
      throw std::invalid_argument("DensityMatrix: matrix shape inconsistent with space");
  }

  static DensityMatrix pure(const StateVector& psi) {
    return {psi.space, psi.v * psi.v.adjoint()};
  }

  double trace_defect() const { return std::abs(m.trace() - complexd(1.0, 0.0)); }
  double hermiticity_defect() const { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (m + m.adjoint()),
                                                Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  // Contract: trace 1 within 1e-9, Hermitian within 1e-9, eigenvalues >= -1e-8.
  bool is_valid(double trace_tol = 1e-9, double herm_tol = 1e-9, double eig_tol = 1e-8) const {
    return trace_defect() <= trace_tol && hermiticity_defect() <= herm_tol &&
           min_eigenvalue() >= -eig_tol;
  }
};

// a on the truncated Fock basis, <n-1|a|n> = sqrt(n), extended as
// identity-on-atom (x) a.
inline Operator annihilator(const HilbertSpace& space) {
  MatrixXcd af = MatrixXcd::Zero(space.fock_dim(), space.fock_dim());
  for (int n = 1; n <= space.fock_cutoff; ++n) af(n - 1, n) = std::sqrt(double(n));
  return {space, kron(MatrixXcd::Identity(space.atom_dim, space.atom_dim), af)};
}

inline Operator creator(const HilbertSpace& space) { return annihilator(space).adjoint(); }

inline Operator number_operator(const HilbertSpace& space) {
  Operator a = annihilator(space);
  return {space, a.m.adjoint() * a.m};
}

// sigma_ab = |a><b| on the atom, identity on the field.
inline Operator atomic_sigma(const HilbertSpace& space, Level a, Level b) {
  int ia = static_cast<int>(a), ib = static_cast<int>(b);
  if (ia < 0 || ia >= space.atom_dim || ib < 0 || ib >= space.atom_dim)
    throw std::invalid_argument("atomic_sigma: invalid level label");
  MatrixXcd block = MatrixXcd::Zero(space.atom_dim, space.atom_dim);
  block(ia, ib) = 1.0;
  return {space, kron(block, MatrixXcd::Identity(space.fock_dim(), space.fock_dim()))};
}

inline Operator identity_operator(const HilbertSpace& space) {
  return {space, MatrixXcd::Identity(space.total_dim(), space.total_dim())};
}

inline StateVector basis_state(const HilbertSpace& space, Level l, int n) {
  VectorXcd v = VectorXcd::Zero(space.total_dim());
  v(space.index_of(l, n)) = 1.0;
  return {space, v};
}

// Tr(op * rho). Real within 1e-10 for Hermitian op and valid rho.
inline complexd expectation(const Operator& op, const DensityMatrix& rho) {
  if (op.space != rho.space) throw std::invalid_argument("expectation: space mismatch");
  // Tr(AB) = sum_ij A_ij B_ji
  return (op.m.transpose().cwiseProduct(rho.m)).sum();
}

inline complexd expectation(const Operator& op, const StateVector& psi) {
  if (op.space != psi.space) throw std::invalid_argument("expectation: space mismatch");
  return psi.v.dot(op.m * psi.v);
}

}  // namespace oal
