#include <catch_amalgamated.hpp>

#include <cmath>

#include "geoent/perturbative.hpp"
#include "geoent/reduction.hpp"
#include "geoent/zeta.hpp"

using namespace geoent;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double exact_xi(const ModelParams& p, int l, int n) {
  const auto pair = matrix_sqrt_pair(build_coupling_matrix(p, l));
  return reduce_xi(pair.omega, pair.inverse, Partition{n}).front();
}

}  // namespace

TEST_CASE("zeta identities") {
  const double pi = std::numbers::pi;
  CHECK_THAT(riemann_zeta(2.0), WithinAbs(pi * pi / 6.0, 1e-13));
  CHECK_THAT(riemann_zeta(4.0), WithinAbs(std::pow(pi, 4) / 90.0, 1e-13));
  CHECK_THAT(riemann_zeta_prime(2.0), WithinAbs(-0.93754825431584375, 1e-12));
  // remainder = zeta minus the head
  double head = 0.0;
  for (int l = 1; l < 10; ++l) head += std::pow(l, -3.5);
  CHECK_THAT(zeta_remainder(3.5, 10) + head, WithinRel(riemann_zeta(3.5), 1e-13));
}

TEST_CASE("xi falls as l^-4") {
  ModelParams p;
  p.sites = 30;
  const double r = perturbative_xi(p, 200000, 10) / perturbative_xi(p, 100000, 10);
  CHECK_THAT(r, WithinRel(1.0 / 16.0, 0.01));
}

TEST_CASE("perturbative xi approaches the exact one") {
  ModelParams p;
  p.sites = 10;
  const double rel = std::abs(perturbative_xi(p, 10000, 5) / exact_xi(p, 10000, 5) - 1.0);
  CHECK(rel <= 1e-4);
  double prev = 1.0;
  for (int l : {100, 300, 1000, 3000}) {
    const double e = std::abs(perturbative_xi(p, l, 5) / exact_xi(p, l, 5) - 1.0);
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("perturbative xi needs n + 2 <= N") {
  ModelParams p;
  p.sites = 10;
  CHECK_NOTHROW(perturbative_xi(p, 100, 8));
  CHECK_THROWS_AS(perturbative_xi(p, 100, 9), DomainError);
  CHECK_THROWS_AS(perturbative_xi(p, -1, 3), DomainError);
}

TEST_CASE("series fit recovers synthetic coefficients") {
  std::vector<double> ls, xs;
  for (int i = 0; i < 48; ++i) {
    const double l = std::round(1000.0 * std::pow(1e4, i / 47.0));
    ls.push_back(l);
    xs.push_back(std::pow(l, -4.0) * (1.0 + 2.0 / l));
  }
  const auto ts = fit_xi_series(ls, xs, 5, 1000.0);
  REQUIRE(ts.xi_coeffs.size() == 6);
  CHECK_THAT(ts.xi_coeffs[0], WithinAbs(1.0, 1e-10));
  CHECK_THAT(ts.xi_coeffs[1], WithinAbs(2.0, 1e-7));
  CHECK(ts.max_rel_residual < 1e-12);
}

TEST_CASE("direct and zeta tails agree") {
  for (double d : {2.0, 2.5, 3.0, 4.0, 4.5}) {
    ModelParams p;
    p.dim = d;
    p.sites = 20;
    const auto a = tail_sum(p, 8, 200, TailMethod::DirectSum);
    const auto b = tail_sum(p, 8, 200, TailMethod::ZetaAccelerated);
    INFO("D=" << d);
    CHECK_THAT(b.delta_S, WithinRel(a.delta_S, 1e-8));
    CHECK_THAT(b.delta_E1, WithinRel(a.delta_E1, 1e-8));
  }
}

TEST_CASE("summands decay with local exponent D - 6") {
  for (double d : {2.0, 3.0, 4.0}) {
    ModelParams p;
    p.dim = d;
    p.sites = 20;
    const auto term = [&](std::int64_t l) { return degeneracy(l, d) * mode_single_copy(perturbative_xi(p, l, 8)); };
    const double slope = std::log(term(200000) / term(100000)) / std::log(2.0);
    CHECK_THAT(slope, WithinAbs(d - 6.0, 1e-3));
  }
}

TEST_CASE("tails shrink with mass") {
  double prev = 1e300;
  for (double mu : {0.0, 5.0, 50.0}) {
    ModelParams p;
    p.mass = mu;
    p.sites = 20;
    const auto t = tail_sum(p, 8, 100, TailMethod::ZetaAccelerated);
    CHECK(t.delta_S < prev);
    prev = t.delta_S;
  }
}

TEST_CASE("zeta tail stays accurate when the mass sets the crossover scale") {
  ModelParams p;
  p.mass = 50.0;
  p.sites = 20;
  const auto a = tail_sum(p, 10, 2, TailMethod::DirectSum);
  const auto b = tail_sum(p, 10, 2, TailMethod::ZetaAccelerated);
  CHECK_THAT(b.delta_S, WithinRel(a.delta_S, 1e-8));
  CHECK_THAT(b.delta_E1, WithinRel(a.delta_E1, 1e-8));
}

TEST_CASE("divergence at D >= 5") {
  ModelParams p;
  p.dim = 5.0;
  p.sites = 10;
  CHECK_THROWS_AS(tail_sum(p, 4, 100, TailMethod::DirectSum), DivergenceError);
  CHECK_THROWS_AS(tail_sum(p, 4, 100, TailMethod::ZetaAccelerated), DivergenceError);
  CHECK_THROWS_AS(parse_tail_method("euler"), UsageError);
}
