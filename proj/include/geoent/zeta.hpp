#pragma once

// Riemann and Hurwitz zeta functions and their s-derivatives for real s > 1,
// by Euler-Maclaurin summation.

#include <array>
#include <cmath>

#include "geoent/errors.hpp"
#include "geoent/summation.hpp"

namespace geoent {

namespace detail {

// B_{2j} / (2j)!, j = 1..10
inline constexpr std::array<double, 10> kBernoulliOverFactorial = {
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40320.0,
    5.0 / 66.0 / 3628800.0,
    -691.0 / 2730.0 / 479001600.0,
    7.0 / 6.0 / 87178291200.0,
    -3617.0 / 510.0 / 20922789888000.0,
    43867.0 / 798.0 / 6402373705728000.0,
    -174611.0 / 330.0 / 2432902008176640000.0,
};

struct ZetaPair {
  double value;
  double derivative;
};

// sum_{k>=0} (a+k)^{-s} and its s-derivative. Explicit terms until the base
// reaches 20, then the Euler-Maclaurin remainder at x = a + M.
inline ZetaPair hurwitz_em(double s, double a) {
  constexpr double kStart = 20.0;
  CompensatedSum value, deriv;
  double x = a;
  for (; x < kStart; x += 1.0) {
    const double p = std::pow(x, -s);
    value += p;
    deriv += -std::log(x) * p;
  }
  const double lx = std::log(x);
  const double head = std::pow(x, 1.0 - s) / (s - 1.0);
  value += head;
  deriv += -head * lx - head / (s - 1.0);
  const double half = 0.5 * std::pow(x, -s);
  value += half;
  deriv += -half * lx;

  // j-th correction: B_{2j}/(2j)! * s(s+1)...(s+2j-2) * x^{-s-2j+1}
  double rising = s;           // s (s+1) ... (s+2j-2)
  double harmonic = 1.0 / s;   // sum of 1/(s+i) over the same factors
  double power = std::pow(x, -s - 1.0);
  for (std::size_t j = 0; j < kBernoulliOverFactorial.size(); ++j) {
    const double term = kBernoulliOverFactorial[j] * rising * power;
    value += term;
    deriv += term * (harmonic - lx);
    const double s1 = s + 2.0 * j + 1.0;
    const double s2 = s + 2.0 * j + 2.0;
    rising *= s1 * s2;
    harmonic += 1.0 / s1 + 1.0 / s2;
    power /= x * x;
  }
  return {value.value(), deriv.value()};
}

inline void require_convergent(double s) {
  if (!(s > 1.0)) throw DomainError("zeta: requires s > 1 (got " + std::to_string(s) + ")");
}

}  // namespace detail

inline double riemann_zeta(double s) {
  detail::require_convergent(s);
  return detail::hurwitz_em(s, 1.0).value;
}

inline double riemann_zeta_prime(double s) {
  detail::require_convergent(s);
  return detail::hurwitz_em(s, 1.0).derivative;
}

/// sum_{l >= start} l^{-s}, i.e. zeta(s) - sum_{l=1}^{start-1} l^{-s}, without the cancellation.
inline double zeta_remainder(double s, double start) {
  detail::require_convergent(s);
  if (!(start >= 1.0)) throw DomainError("zeta_remainder: start must be >= 1");
  return detail::hurwitz_em(s, start).value;
}

/// sum_{l >= start} log(l) l^{-s}, i.e. -zeta'(s) - sum_{l=1}^{start-1} log(l) l^{-s}.
inline double zeta_log_remainder(double s, double start) {
  detail::require_convergent(s);
  if (!(start >= 1.0)) throw DomainError("zeta_log_remainder: start must be >= 1");
  return -detail::hurwitz_em(s, start).derivative;
}

}  // namespace geoent
