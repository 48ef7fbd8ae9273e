#pragma once

// Entropy and single-copy entanglement of one reduced oscillator mode, whose
// spectrum is the geometric family p_k = (1 - xi) xi^k.

#include <cmath>
#include <string>

#include "geoent/errors.hpp"

namespace geoent {

namespace detail {

inline void require_xi(double xi) {
  if (!(xi >= 0.0 && xi < 1.0)) throw DomainError("xi must lie in [0, 1) (got " + std::to_string(xi) + ")");
}

}  // namespace detail

/// S(xi) = -ln(1 - xi) - xi/(1 - xi) ln xi, in nats.
inline double mode_entropy(double xi) {
  detail::require_xi(xi);
  if (xi == 0.0) return 0.0;
  const double lx = std::log(xi);
  if (xi < 1e-12) return xi * (1.0 - lx) + xi * xi * (0.5 - lx);
  return -std::log1p(-xi) - xi / (1.0 - xi) * lx;
}

/// -ln(1 - xi): minus the log of the largest eigenvalue.
inline double mode_single_copy(double xi) {
  detail::require_xi(xi);
  return -std::log1p(-xi);
}

}  // namespace geoent
