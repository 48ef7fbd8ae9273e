#include <catch_amalgamated.hpp>

#include <cmath>

#include "geoent/entanglement.hpp"

using namespace geoent;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ProbabilitySpectrum spectrum(std::vector<double> p) {
  std::vector<double> logs;
  for (double x : p) logs.push_back(std::log(x));
  return detail::from_logs(std::move(logs));
}

}  // namespace

TEST_CASE("mode entropy") {
  CHECK(mode_entropy(0.0) == 0.0);
  CHECK_THAT(mode_entropy(0.5), WithinAbs(2.0 * std::log(2.0), 1e-15));
  CHECK_THAT(mode_single_copy(0.5), WithinAbs(std::log(2.0), 1e-15));
  // series branch joins the closed form
  const double x = 1e-12;
  CHECK_THAT(mode_entropy(x * 0.999), WithinRel(-std::log1p(-x) - x / (1 - x) * std::log(x), 1e-2));
  CHECK_THROWS_AS(mode_entropy(1.0), DomainError);
  CHECK_THROWS_AS(mode_entropy(-0.1), DomainError);
}

TEST_CASE("geometric spectrum") {
  const auto s = geometric_spectrum(0.5, 3);
  REQUIRE(s.size() == 3);
  CHECK_THAT(s.probs[0], WithinAbs(0.5, 1e-15));
  CHECK_THAT(s.probs[1], WithinAbs(0.25, 1e-15));
  CHECK_THAT(s.probs[2], WithinAbs(0.125, 1e-15));
  CHECK_THAT(s.truncation_deficit, WithinAbs(0.125, 1e-15));
}

TEST_CASE("top-k product spectrum") {
  const std::vector<double> one{0.5};
  const auto a = top_k_product_spectrum(std::span<const double>(one), 3);
  REQUIRE(a.size() == 3);
  CHECK_THAT(a.probs[0], WithinAbs(0.5, 1e-15));
  CHECK_THAT(a.probs[1], WithinAbs(0.25, 1e-15));
  CHECK_THAT(a.probs[2], WithinAbs(0.125, 1e-15));

  const std::vector<double> two{0.5, 0.5};
  const auto b = top_k_product_spectrum(std::span<const double>(two), 4);
  REQUIRE(b.size() == 4);
  const double want[] = {0.25, 0.125, 0.125, 0.0625};
  for (int i = 0; i < 4; ++i) CHECK_THAT(b.probs[i], WithinAbs(want[i], 1e-15));

  const auto c = top_k_product_spectrum(std::span<const double>(), 5);
  REQUIRE(c.size() == 1);
  CHECK(c.probs[0] == 1.0);

  // brute force over three modes with multiplicity
  const std::vector<WeightedMode> modes{{0.4, 2.0}, {0.1, 1.0}};
  const auto d = top_k_product_spectrum(std::span<const WeightedMode>(modes), 20);
  std::vector<double> brute;
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j)
      for (int k = 0; k < 30; ++k)
        brute.push_back(0.6 * 0.6 * 0.9 * std::pow(0.4, i + j) * std::pow(0.1, k));
  std::sort(brute.rbegin(), brute.rend());
  for (int i = 0; i < 20; ++i) CHECK_THAT(d.probs[i], WithinRel(brute[i], 1e-12));
  CHECK_THROWS_AS(top_k_product_spectrum(std::span<const double>(one), 0), DomainError);
}

TEST_CASE("majorization") {
  const auto p = spectrum({0.5, 0.3, 0.2}), q = spectrum({0.4, 0.4, 0.2});
  const auto pq = majorizes(p, q, 3);
  CHECK(pq.holds);
  CHECK_FALSE(pq.first_violation);
  const auto qp = majorizes(q, p, 3);
  CHECK_FALSE(qp.holds);
  REQUIRE(qp.first_violation);
  CHECK(*qp.first_violation == 1);
  CHECK(majorizes(p, p, 3).holds);
  const auto pure = spectrum({1.0});
  CHECK(majorizes(pure, q, 3).holds);
  CHECK_THAT(majorizes(pure, q, 3).relative_margins[0], WithinAbs(0.6, 1e-15));
}

TEST_CASE("heavy field is barely entangled") {
  ModelParams p;
  p.sites = 20;
  p.mass = 1000.0;
  const auto r = total_entanglement(p, Partition{10});
  CHECK(r.converged);
  CHECK(r.S > 0.0);
  CHECK(r.S < 1e-3);
}

TEST_CASE("total entanglement: purity, thread independence and tail methods") {
  ModelParams p;
  p.sites = 20;
  EntanglementConfig one;
  one.threads = 1;
  EntanglementConfig many = one;
  many.threads = 3;
  const auto a = total_entanglement(p, Partition{8, TracedRegion::Inner}, one);
  const auto b = total_entanglement(p, Partition{8, TracedRegion::Outer}, one);
  const auto c = total_entanglement(p, Partition{8, TracedRegion::Inner}, many);
  CHECK(a.converged);
  CHECK_THAT(a.S, WithinRel(b.S, 1e-8));
  CHECK(a.S == c.S);
  CHECK(a.E1 == c.E1);
  EntanglementConfig direct = one;
  direct.tail_method = TailMethod::DirectSum;
  const auto d = total_entanglement(p, Partition{8}, direct);
  CHECK_THAT(d.S, WithinRel(a.S, 1e-9));
  CHECK_THAT(d.E1, WithinRel(a.E1, 1e-9));
  CHECK(a.E1 < a.S);
}

TEST_CASE("cut at the outer edge") {
  ModelParams p;
  p.sites = 12;
  const auto r = total_entanglement(p, Partition{11});
  CHECK(r.converged);
  CHECK(r.l_switch < 100);
  // long exact sum with the remainder from the edge expansion
  EntanglementConfig cfg;
  cfg.l_switch = 3000;
  const auto e = total_entanglement(p, Partition{11}, cfg);
  // the automatic crossover tolerates 1e-6 relative error in the first tail xi
  CHECK_THAT(r.S, WithinRel(e.S, 1e-7));
  CHECK_THAT(r.E1, WithinRel(e.E1, 1e-7));
  CHECK_THROWS_AS(perturbative_xi(p, 1000, 11), DomainError);
}

TEST_CASE("reduced spectrum of a total result") {
  ModelParams p;
  p.sites = 20;
  EntanglementConfig cfg;
  cfg.keep_modes = true;
  const auto r = total_entanglement(p, Partition{6}, cfg);
  const auto s = reduced_spectrum(r, 50);
  REQUIRE(s.size() == 50);
  CHECK(std::is_sorted(s.log_probs.rbegin(), s.log_probs.rend()));
  CHECK(s.mass <= 1.0);
  CHECK(s.mode_deficit < 1e-3);
}
