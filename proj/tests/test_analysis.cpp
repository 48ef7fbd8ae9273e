#include <catch_amalgamated.hpp>

#include <cmath>

#include "geoent/analysis.hpp"

using namespace geoent;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("area-law fit of synthetic data") {
  std::vector<std::pair<double, double>> pts;
  for (int n = 5; n <= 30; ++n) {
    const double r = n + 0.5;
    pts.emplace_back(r, 0.3 * r * r + 0.1);
  }
  const auto f = fit_area_law(pts, 2.0);
  CHECK_THAT(f.slope, WithinAbs(0.3, 1e-12));
  CHECK_THAT(f.intercept, WithinAbs(0.1, 1e-9));
  CHECK_THAT(f.r_squared, WithinAbs(1.0, 1e-12));
  CHECK(f.residuals.size() == pts.size());
  pts.resize(2);
  CHECK_THROWS_AS(fit_area_law(pts, 2.0), DomainError);
}

TEST_CASE("radius sweep on N = 60 gives 26 points with S increasing") {
  ModelParams p;
  p.sites = 60;
  std::vector<Partition> parts;
  for (int n = 5; n <= 30; ++n) parts.push_back(Partition{n});
  const std::vector<double> one{3.0};
  const auto sw = sweep(p, SweepAxis::Dimension, one, parts);
  REQUIRE(sw.points.size() == 26);
  for (std::size_t i = 1; i < sw.points.size(); ++i) CHECK(sw.points[i].result.S > sw.points[i - 1].result.S);
  for (const auto& pt : sw.points) CHECK(pt.result.converged);
  const auto fits = slope_scan(sw);
  REQUIRE(fits.size() == 1);
  CHECK(fits[0].fit_S.r_squared > 0.999);
  CHECK(fits[0].ratio > 5.0);
  CHECK(fits[0].ratio < 7.0);
}

TEST_CASE("sweep input validation") {
  ModelParams p;
  p.sites = 20;
  const std::vector<Partition> parts{Partition{5}};
  const std::vector<double> bad{1.0, 0.5};
  CHECK_THROWS_AS(sweep(p, SweepAxis::Mass, bad, parts), DomainError);
  const std::vector<double> neg{-1.0};
  CHECK_THROWS_AS(sweep(p, SweepAxis::Mass, neg, parts), DomainError);
  CHECK_THROWS_AS(parse_axis("angle"), UsageError);
}

TEST_CASE("default fit window") {
  const auto parts = default_fit_partitions(60);
  REQUIRE(!parts.empty());
  CHECK(parts.front().traced_sites == 5);
  CHECK(parts.back().traced_sites == 30);
}

TEST_CASE("rg report") {
  ModelParams p;
  p.sites = 24;
  std::vector<Partition> fit;
  for (int n = 2; n <= 12; ++n) fit.push_back(Partition{n});
  const std::vector<double> masses{0.0, 0.5, 1.0};
  const auto rep = rg_report(p, masses, Partition{12}, fit, {}, 30);
  CHECK(rep.slopes_decreasing);
  CHECK(rep.modewise_monotone);
  CHECK(rep.majorization_holds);
  CHECK(rep.passed());
  CHECK(rep.modes_compared > 0);
  const std::vector<double> equal{1.0, 1.0};
  CHECK_THROWS_AS(rg_report(p, equal, Partition{12}, fit), DomainError);
}

TEST_CASE("majorization across radii") {
  ModelParams p;
  p.sites = 24;
  const std::vector<Partition> parts{Partition{4}, Partition{8}, Partition{12}};
  const auto rep = majorization_report(p, parts, 30);
  REQUIRE(rep.pairs.size() == 2);
  CHECK(rep.holds);
  const std::vector<Partition> same{Partition{8}, Partition{8}};
  const auto eq = majorization_report(p, same, 30);
  CHECK(eq.holds);
  CHECK_THAT(eq.worst_relative_margin, WithinAbs(0.0, 1e-12));
}

TEST_CASE("modewise decrease with mass") {
  ModelParams lo, hi;
  lo.sites = hi.sites = 16;
  hi.mass = 0.7;
  EntanglementConfig cfg;
  cfg.keep_modes = true;
  const auto a = total_entanglement(lo, Partition{5}, cfg);
  const auto b = total_entanglement(hi, Partition{5}, cfg);
  const auto c = modewise_decrease(a, b);
  CHECK(c.holds);
  CHECK(c.compared > 0);
}
