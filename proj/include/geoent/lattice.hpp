#pragma once

// Radial lattice for a free scalar field in D dimensions: each angular
// momentum l gives an open chain of N coupled oscillators with a tridiagonal
// coupling matrix K, plus the SO(D) multiplicity nu(l, D) of that chain.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geoent/errors.hpp"

namespace geoent {

enum class Boundary {
  Dirichlet,    // field pinned to zero at site N+1
  FreePrinted,  // outer diagonal term dropped at j = N (has a zero mode at l = 0, mu = 0)
};

inline std::string to_string(Boundary b) { return b == Boundary::Dirichlet ? "dirichlet" : "free-printed"; }

inline Boundary parse_boundary(const std::string& s) {
  if (s == "dirichlet") return Boundary::Dirichlet;
  if (s == "free-printed") return Boundary::FreePrinted;
  throw UsageError("unknown boundary '" + s + "' (expected dirichlet|free-printed)");
}

struct ModelParams {
  double dim = 3.0;
  double mass = 0.0;  // in units of 1/a
  int sites = 60;
  double spacing = 1.0;
  Boundary boundary = Boundary::Dirichlet;

  void validate() const {
    if (!(dim > 1.0)) throw DomainError("dimension must exceed 1 (got " + std::to_string(dim) + ")");
    if (sites < 2) throw DomainError("need at least 2 radial sites");
    if (!(spacing > 0.0)) throw DomainError("lattice spacing must be positive");
    if (!(mass >= 0.0)) throw DomainError("mass must be non-negative");
  }

  /// Summing over all l only converges for 1 < D < 5.
  void validate_summable() const {
    validate();
    if (dim >= 5.0)
      throw DivergenceError(
          "angular-momentum sum divergent for D >= 5; radial regularization insufficient");
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Symmetric tridiagonal K for one angular momentum, stored by diagonals.
struct CouplingMatrix {
  int l = 0;
  ModelParams params;
  Eigen::VectorXd diagonal;      // K_jj, j = 1..N
  Eigen::VectorXd off_diagonal;  // K_{j,j+1}, j = 1..N-1

  int size() const { return static_cast<int>(diagonal.size()); }

  Eigen::MatrixXd dense() const {
    const int n = size();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    k.diagonal() = diagonal;
    for (int j = 0; j + 1 < n; ++j) {
      k(j, j + 1) = off_diagonal[j];
      k(j + 1, j) = off_diagonal[j];
    }
    return k;
  }
};

namespace detail {

inline double centrifugal(const ModelParams& p, std::int64_t l, int j) {
  return static_cast<double>(l) * (l + p.dim - 2.0) / (static_cast<double>(j) * j);
}

}  // namespace detail

/// K_jj for 1-based site j.
inline double coupling_diagonal(const ModelParams& p, std::int64_t l, int j) {
  const double e = p.dim - 1.0;
  double k = detail::centrifugal(p, l, j) + p.mass * p.mass;
  if (j >= 2) k += std::pow(1.0 - 0.5 / j, e);
  if (j <= p.sites - 1 || p.boundary == Boundary::Dirichlet) k += std::pow(1.0 + 0.5 / j, e);
  return k;
}

/// K_{j,j+1} for 1-based j (the link between sites j and j+1); always negative.
inline double coupling_link(const ModelParams& p, int j) {
  const double jd = j;
  return -std::pow((jd + 0.5) / std::sqrt(jd * (jd + 1.0)), p.dim - 1.0);
}

inline CouplingMatrix build_coupling_matrix(const ModelParams& params, int l) {
  params.validate();
  if (l < 0) throw DomainError("angular momentum must be non-negative");
  const int n = params.sites;
  CouplingMatrix k;
  k.l = l;
  k.params = params;
  k.diagonal.resize(n);
  k.off_diagonal.resize(n - 1);
  for (int j = 1; j <= n; ++j) k.diagonal[j - 1] = coupling_diagonal(params, l, j);
  for (int j = 1; j < n; ++j) k.off_diagonal[j - 1] = coupling_link(params, j);
  return k;
}

namespace detail {

inline bool is_integer(double x) { return std::floor(x) == x; }

// C(n, k) for small non-negative integers; exact while the result fits in 2^53.
inline double binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || n < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::int64_t i = 1; i <= k; ++i) r = r * static_cast<unsigned __int128>(n - k + i) / i;
  return static_cast<double>(r);
}

}  // namespace detail

namespace detail {

// Bernoulli polynomial B_m(x), m <= 12.
inline double bernoulli_poly(int m, double x) {
  static constexpr std::array<double, 13> b = {1.0,  -0.5,        1.0 / 6.0, 0.0, -1.0 / 30.0, 0.0, 1.0 / 42.0,
                                               0.0,  -1.0 / 30.0, 0.0,       5.0 / 66.0, 0.0, -691.0 / 2730.0};
  double sum = 0.0;
  double binom = 1.0;
  for (int j = 0; j <= m; ++j) {
    sum += binom * b[static_cast<std::size_t>(j)] * std::pow(x, m - j);
    binom = binom * (m - j) / (j + 1);
  }
  return sum;
}

// Coefficients c_k of log[Gamma(l + a) / Gamma(l + 1)] = (a - 1) log l + sum_k c_k l^{-k}.
inline double gamma_ratio_coeff(int k, double a) {
  const double sign = (k % 2 == 1) ? 1.0 : -1.0;
  return sign * (bernoulli_poly(k + 1, a) - bernoulli_poly(k + 1, 1.0)) / (k * (k + 1.0));
}

}  // namespace detail

/// Multiplicity of the angular-momentum-l representation of SO(D).
///
/// nu(l, D) = [Gamma(l+D)/Gamma(l+1) - Gamma(l+D-2)/Gamma(l-1)] / Gamma(D), with
/// 1/Gamma at non-positive integers taken as zero. This simplifies to
/// (2l + D - 2) Gamma(l + D - 2) / (Gamma(l + 1) Gamma(D - 1)) for l >= 1, which
/// is what we evaluate. Integer D goes through exact binomials; for large l the
/// Gamma ratio comes from its Stirling series, since a difference of lgammas
/// loses digits there.
inline double degeneracy(std::int64_t l, double dim) {
  if (!(dim > 1.0)) throw DomainError("degeneracy requires D > 1");
  if (l < 0) throw DomainError("angular momentum must be non-negative");
  if (l == 0) return 1.0;
  const double a = dim - 2.0;
  if (detail::is_integer(dim) && dim <= 6.0 && l <= 100000) {
    const auto d = static_cast<std::int64_t>(dim);
    return detail::binomial(l + d - 1, l) - detail::binomial(l + d - 3, l - 2);
  }
  const double ld = static_cast<double>(l);
  double lg;
  if (l >= 200) {
    lg = (a - 1.0) * std::log(ld);
    double u = 1.0;
    for (int k = 1; k <= 10; ++k) {
      u /= ld;
      lg += detail::gamma_ratio_coeff(k, a) * u;
    }
  } else {
    lg = std::lgamma(ld + a) - std::lgamma(ld + 1.0);
  }
  return (2.0 * ld + a) * std::exp(lg - std::lgamma(a + 1.0));
}

}  // namespace geoent
