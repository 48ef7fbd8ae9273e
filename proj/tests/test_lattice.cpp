#include <catch_amalgamated.hpp>

#include <cmath>

#include "geoent/lattice.hpp"

using namespace geoent;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("coupling matrix for N = 2, D = 3") {
  ModelParams p;
  p.sites = 2;
  const auto k = build_coupling_matrix(p, 0).dense();
  CHECK_THAT(k(0, 0), WithinAbs(2.25, 1e-15));
  CHECK_THAT(k(1, 1), WithinAbs(2.125, 1e-15));
  CHECK_THAT(k(0, 1), WithinAbs(-1.125, 1e-15));
  CHECK(k(0, 1) == k(1, 0));

  const auto k5 = build_coupling_matrix(p, 5);
  CHECK_THAT(k5.diagonal[0], WithinAbs(32.25, 1e-13));
  CHECK_THAT(k5.diagonal[1], WithinAbs(9.625, 1e-13));
  CHECK_THAT(k5.off_diagonal[0], WithinAbs(-1.125, 1e-15));
}

TEST_CASE("mass enters the diagonal only") {
  ModelParams p, q;
  p.sites = q.sites = 7;
  q.mass = 0.5;
  const auto a = build_coupling_matrix(p, 3), b = build_coupling_matrix(q, 3);
  for (int j = 0; j < 7; ++j) CHECK_THAT(b.diagonal[j] - a.diagonal[j], WithinAbs(0.25, 1e-14));
  for (int j = 0; j < 6; ++j) CHECK(b.off_diagonal[j] == a.off_diagonal[j]);
}

TEST_CASE("printed free boundary has the zero mode j^((D-1)/2)") {
  for (double d : {2.0, 3.0, 3.7}) {
    ModelParams p;
    p.dim = d;
    p.sites = 12;
    p.boundary = Boundary::FreePrinted;
    const auto k = build_coupling_matrix(p, 0).dense();
    Eigen::VectorXd v(12);
    for (int j = 0; j < 12; ++j) v[j] = std::pow(j + 1.0, (d - 1.0) / 2.0);
    CHECK((k * v).norm() / v.norm() < 1e-12);
  }
}

TEST_CASE("Dirichlet K is positive definite") {
  for (double d : {1.5, 2.0, 3.0, 4.5}) {
    ModelParams p;
    p.dim = d;
    p.sites = 30;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(build_coupling_matrix(p, 0).dense());
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("degeneracy") {
  for (int l : {0, 1, 7, 100}) CHECK(degeneracy(l, 3.0) == 2.0 * l + 1.0);
  CHECK(degeneracy(3, 4.0) == 16.0);
  CHECK(degeneracy(5, 2.0) == 2.0);
  CHECK(degeneracy(0, 2.0) == 1.0);
  for (double d : {1.5, 2.5, 3.3, 4.9}) CHECK_THAT(degeneracy(0, d), WithinAbs(1.0, 1e-14));
  // D = 4: (l + 1)^2
  CHECK_THAT(degeneracy(123456, 4.0), WithinRel(123457.0 * 123457.0, 1e-13));
  // large-l series agrees with the exact binomial across the switch
  CHECK_THAT(degeneracy(5000, 5.0), WithinRel((2.0 * 5000 + 3) * (5001.0 * 5002.0 / 6.0), 1e-13));
  // continuity in D
  CHECK_THAT(degeneracy(50, 3.0 + 1e-9), WithinRel(101.0, 1e-7));
  CHECK_THAT(degeneracy(100000, 3.0 + 1e-9), WithinRel(200001.0, 1e-7));
}

TEST_CASE("invalid parameters") {
  ModelParams p;
  p.dim = 1.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p.dim = 3.0;
  p.sites = 1;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p.sites = 10;
  p.mass = -1.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p.mass = 0.0;
  p.dim = 5.0;
  CHECK_THROWS_AS(p.validate_summable(), DivergenceError);
  CHECK_THROWS_AS(parse_boundary("neumann"), UsageError);
}
