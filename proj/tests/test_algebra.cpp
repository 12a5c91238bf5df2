#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oal/algebra.hpp"

using namespace oal;
using Catch::Approx;

namespace {

MatrixXcd random_matrix(std::mt19937& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = complexd(g(rng), g(rng));
  return m;
}

DensityMatrix random_density(std::mt19937& rng, const HilbertSpace& sp) {
  MatrixXcd g = random_matrix(rng, sp.total_dim());
  MatrixXcd rho = g * g.adjoint();
  rho /= rho.trace().real();
  return {sp, rho};
}

}  // namespace

TEST_CASE("annihilator matrix elements", "[algebra]") {
  HilbertSpace sp(1);
  Operator a = annihilator(sp);
  StateVector one = basis_state(sp, Level::F3, 1);
  StateVector zero = basis_state(sp, Level::F3, 0);
  VectorXcd lowered = a.m * one.v;
  REQUIRE((lowered - zero.v).norm() == Approx(0.0).margin(1e-15));
  REQUIRE((a.m * zero.v).norm() == Approx(0.0).margin(1e-15));
}

TEST_CASE("number operator spectrum at n_max = 3", "[algebra]") {
  HilbertSpace sp(3);
  Operator n = number_operator(sp);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(n.m);
  // each of 0..3 appears once per atomic level
  std::vector<double> eigs(es.eigenvalues().data(),
                           es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(eigs.begin(), eigs.end());
  for (int lvl = 0; lvl < 4; ++lvl)
    for (int k = 0; k <= 3; ++k) REQUIRE(eigs[static_cast<std::size_t>(k * 4 + lvl)] == Approx(k).margin(1e-12));
}

TEST_CASE("commutator [a, a^dag] on the truncated space", "[algebra]") {
  // direct matrix-multiplication oracle at n_max = 3
  HilbertSpace sp(3);
  Operator a = annihilator(sp);
  MatrixXcd comm = a.m * a.m.adjoint() - a.m.adjoint() * a.m;
  for (int lvl = 0; lvl < 4; ++lvl) {
    for (int n = 0; n < sp.fock_cutoff; ++n) {
      const int i = sp.index_of(static_cast<Level>(lvl), n);
      REQUIRE(comm(i, i).real() == Approx(1.0).margin(1e-12));
    }
    const int top = sp.index_of(static_cast<Level>(lvl), sp.fock_cutoff);
    REQUIRE(comm(top, top).real() == Approx(-sp.fock_cutoff).margin(1e-12));
  }
  // off-diagonal elements all vanish
  MatrixXcd off = comm;
  off.diagonal().setZero();
  REQUIRE(off.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("atomic sigma algebra", "[algebra]") {
  HilbertSpace sp(4);
  Operator proj = atomic_sigma(sp, Level::F3p, Level::F3p);
  REQUIRE(((proj * proj).m - proj.m).cwiseAbs().maxCoeff() < 1e-15);

  Operator lhs = atomic_sigma(sp, Level::F3p, Level::F3) * atomic_sigma(sp, Level::F3, Level::F3p);
  REQUIRE((lhs.m - proj.m).cwiseAbs().maxCoeff() < 1e-15);

  Operator s44 = atomic_sigma(sp, Level::F4, Level::F4);
  REQUIRE(s44.m.trace().real() == Approx(sp.fock_cutoff + 1).margin(1e-12));

  Operator s = atomic_sigma(sp, Level::F3, Level::F4p);
  REQUIRE((s.adjoint().m - atomic_sigma(sp, Level::F4p, Level::F3).m).cwiseAbs().maxCoeff() <
          1e-15);

  REQUIRE_THROWS_AS(atomic_sigma(sp, static_cast<Level>(7), Level::F3), std::invalid_argument);
}

TEST_CASE("expectation values", "[algebra]") {
  HilbertSpace sp(8);
  std::mt19937 rng(42);
  DensityMatrix rho = random_density(rng, sp);
  REQUIRE(expectation(identity_operator(sp), rho).real() == Approx(1.0).margin(1e-12));

  DensityMatrix fock2 = DensityMatrix::pure(basis_state(sp, Level::F4, 2));
  REQUIRE(expectation(number_operator(sp), fock2).real() == Approx(2.0).margin(1e-12));

  // maximally mixed atom (x) vacuum
  MatrixXcd m = MatrixXcd::Zero(sp.total_dim(), sp.total_dim());
  for (int lvl = 0; lvl < 4; ++lvl) {
    const int i = sp.index_of(static_cast<Level>(lvl), 0);
    m(i, i) = 0.25;
  }
  DensityMatrix mixed(sp, m);
  REQUIRE(expectation(atomic_sigma(sp, Level::F3p, Level::F3p), mixed).real() ==
          Approx(0.25).margin(1e-12));

  HilbertSpace other(3);
  REQUIRE_THROWS_AS(expectation(identity_operator(other), rho), std::invalid_argument);
}

TEST_CASE("kron is multiplicative", "[algebra]") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXcd a = random_matrix(rng, 3), b = random_matrix(rng, 4);
    MatrixXcd c = random_matrix(rng, 3), d = random_matrix(rng, 4);
    MatrixXcd lhs = kron(a, b) * kron(c, d);
    MatrixXcd rhs = kron(MatrixXcd(a * c), MatrixXcd(b * d));
    REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("number operator is Hermitian positive semidefinite", "[algebra]") {
  for (int n_max = 1; n_max <= 10; ++n_max) {
    HilbertSpace sp(n_max);
    Operator n = number_operator(sp);
    REQUIRE(n.is_hermitian(1e-14));
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(n.m, Eigen::EigenvaluesOnly);
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-14);
  }
}

TEST_CASE("expectation is bilinear", "[algebra]") {
  HilbertSpace sp(4);
  std::mt19937 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Operator A(sp, random_matrix(rng, sp.total_dim()));
    Operator B(sp, random_matrix(rng, sp.total_dim()));
    DensityMatrix r1 = random_density(rng, sp);
    DensityMatrix r2 = random_density(rng, sp);
    const complexd c1(1.7, -0.3), c2(-0.4, 0.9);

    Operator combo = c1 * A + c2 * B;
    complexd lhs = expectation(combo, r1);
    complexd rhs = c1 * expectation(A, r1) + c2 * expectation(B, r1);
    REQUIRE(std::abs(lhs - rhs) < 1e-10 * (1.0 + std::abs(rhs)));

    // state mixing
    MatrixXcd mix = 0.3 * r1.m + 0.7 * r2.m;
    DensityMatrix rmix(sp, mix);
    complexd lhs2 = expectation(A, rmix);
    complexd rhs2 = 0.3 * expectation(A, r1) + 0.7 * expectation(A, r2);
    REQUIRE(std::abs(lhs2 - rhs2) < 1e-10 * (1.0 + std::abs(rhs2)));
  }
}

TEST_CASE("density matrix validity checks", "[algebra]") {
  HilbertSpace sp(2);
  DensityMatrix good = DensityMatrix::pure(basis_state(sp, Level::F3, 0));
  REQUIRE(good.is_valid());
  MatrixXcd m = good.m;
  m(0, 0) = 0.5;
  DensityMatrix bad(sp, m);
  REQUIRE_FALSE(bad.is_valid());
}

TEST_CASE("basis labeling round-trips", "[algebra]") {
  HilbertSpace sp(8);
  for (int lvl = 0; lvl < 4; ++lvl)
    for (int n = 0; n <= 8; ++n) {
      const int i = sp.index_of(static_cast<Level>(lvl), n);
      REQUIRE(static_cast<int>(sp.level_of(i)) == lvl);
      REQUIRE(sp.photons_of(i) == n);
    }
  REQUIRE(sp.total_dim() == 36);
  REQUIRE_THROWS_AS(HilbertSpace(0), std::invalid_argument);
}
