#pragma once

// Oracle suite behind `geoent selftest`: closed forms and cross-checks that
// exercise every stage of the pipeline in a few seconds.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "cli/output.hpp"
#include "geoent/analysis.hpp"
#include "geoent/entanglement.hpp"
#include "geoent/perturbative.hpp"
#include "geoent/reduction.hpp"
#include "geoent/zeta.hpp"

namespace geoent::cli {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline CheckResult guarded(const std::string& name, const std::function<CheckResult()>& fn) {
  try {
    CheckResult r = fn();
    r.name = name;
    return r;
  } catch (const std::exception& e) {
    return {name, false, std::string("threw: ") + e.what()};
  }
}

inline CheckResult bound(double value, double limit, const std::string& what) {
  return {"", value <= limit, what + " = " + num(value) + " (limit " + num(limit) + ")"};
}

}  // namespace detail

inline CheckResult check_sqrt_residual() {
  double worst = 0.0;
  for (double d : {2.0, 3.0, 4.0})
    for (int sites : {10, 60, 300})
      for (int l : {0, 1, 10, 100}) {
        ModelParams p;
        p.dim = d;
        p.sites = sites;
        const auto k = build_coupling_matrix(p, l);
        const Eigen::MatrixXd kd = k.dense();
        const Eigen::MatrixXd om = matrix_sqrt_spd(k);
        worst = std::max(worst, (om * om - kd).norm() / kd.norm());
      }
  return detail::bound(worst, 1e-10, "max |Omega^2 - K| / |K|");
}

inline CheckResult check_two_oscillators() {
  double worst = 0.0;
  for (const auto& [k, kappa] : std::vector<std::pair<double, double>>{{2.0, 1.0}, {1.0, 0.3}, {5.0, 4.9}, {3.0, 0.01}}) {
    Eigen::Matrix2d km;
    km << k, -kappa, -kappa, k;
    const Eigen::MatrixXd om = matrix_sqrt_spd(Eigen::MatrixXd(km));
    const double xi = reduce_xi(om, Partition{1}).front();
    const double wp = std::sqrt(k + kappa), wm = std::sqrt(k - kappa);
    const double r = (std::sqrt(wp) - std::sqrt(wm)) / (std::sqrt(wp) + std::sqrt(wm));
    worst = std::max(worst, std::abs(xi - r * r));
  }
  return detail::bound(worst, 1e-12, "max |xi - closed form|");
}

inline CheckResult check_purity() {
  double worst = 0.0;
  for (double d : {2.0, 3.0, 3.5}) {
    ModelParams p;
    p.dim = d;
    p.sites = 20;
    for (int l : {0, 1, 5, 40}) {
      const auto roots = matrix_sqrt_pair(build_coupling_matrix(p, l));
      for (int n = 1; n < p.sites; ++n) {
        const auto inner = reduce_xi(roots.omega, roots.inverse, Partition{n, TracedRegion::Inner});
        const auto outer = reduce_xi(roots.omega, roots.inverse, Partition{n, TracedRegion::Outer});
        worst = std::max(worst, std::abs(spectrum_entropy(inner) - spectrum_entropy(outer)));
      }
    }
  }
  return detail::bound(worst, 1e-8, "max |S(inner) - S(outer)|");
}

inline CheckResult check_mode_entropy() {
  double worst = 0.0;
  for (double xi : {0.5, 0.9, 0.3, 0.01}) {
    CompensatedSum s;
    for (int k = 0;; ++k) {
      const double p = (1.0 - xi) * std::pow(xi, k);
      if (p < 1e-18) break;
      s += -p * std::log(p);
    }
    worst = std::max(worst, std::abs(mode_entropy(xi) - s.value()));
  }
  return detail::bound(worst, 1e-12, "max |S(xi) - brute force|");
}

inline CheckResult check_zeta() {
  const double pi = std::numbers::pi;
  const double e2 = std::abs(riemann_zeta(2.0) - pi * pi / 6.0);
  const double e4 = std::abs(riemann_zeta(4.0) - std::pow(pi, 4) / 90.0);
  return detail::bound(std::max(e2, e4), 1e-12, "max |zeta(2) - pi^2/6|, |zeta(4) - pi^4/90|");
}

inline CheckResult check_perturbative() {
  ModelParams p;
  p.sites = 10;
  double worst = 0.0;
  for (int l : {1000, 2000, 10000}) {
    const auto roots = matrix_sqrt_pair(build_coupling_matrix(p, l));
    for (int n = 1; n + 2 <= p.sites; ++n) {
      const double exact = reduce_xi(roots.omega, roots.inverse, Partition{n}).front();
      worst = std::max(worst, std::abs(perturbative_xi(p, l, n) - exact) / exact);
    }
  }
  return detail::bound(worst, 1e-3, "max relative |xi_pert - xi_exact| at l >= 100 N, N = 10");
}

inline CheckResult check_tails() {
  double worst = 0.0;
  for (double d : {2.0, 2.5, 3.0, 4.0}) {
    ModelParams p;
    p.dim = d;
    p.sites = 10;
    const auto a = tail_direct(p, 5, 1000);
    const auto b = tail_zeta(p, 5, 1000, 5);
    worst = std::max({worst, std::abs(a.delta_S - b.delta_S) / a.delta_S, std::abs(a.delta_E1 - b.delta_E1) / a.delta_E1});
  }
  return detail::bound(worst, 1e-3, "max relative |tail_direct - tail_zeta|, D in {2, 2.5, 3, 4}");
}

inline CheckResult check_divergence() {
  ModelParams p;
  p.dim = 5.0;
  p.sites = 10;
  try {
    (void)total_entanglement(p, Partition{5});
  } catch (const DivergenceError& e) {
    return {"", true, std::string("D = 5 raised: ") + e.what()};
  }
  return {"", false, "D = 5 did not raise a divergence error"};
}

inline std::vector<CheckResult> run_selftest() {
  return {
      detail::guarded("omega_squared_residual", check_sqrt_residual),
      detail::guarded("two_oscillator_closed_form", check_two_oscillators),
      detail::guarded("complement_purity", check_purity),
      detail::guarded("mode_entropy_brute_force", check_mode_entropy),
      detail::guarded("zeta_identities", check_zeta),
      detail::guarded("perturbative_vs_exact", check_perturbative),
      detail::guarded("tail_direct_vs_zeta", check_tails),
      detail::guarded("divergence_at_D5", check_divergence),
  };
}

}  // namespace geoent::cli
