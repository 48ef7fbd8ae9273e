#pragma once

// Large-l behaviour: closed-form xi of the dominant mode for l >> N from
// perturbation theory in the off-diagonal couplings of K, and resummation of
// the l -> infinity tails of the entropy and single-copy entanglement sums.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geoent/errors.hpp"
#include "geoent/lattice.hpp"
#include "geoent/mode.hpp"
#include "geoent/summation.hpp"
#include "geoent/zeta.hpp"

namespace geoent {

/// Ingredients of the perturbative beta' for a cut after site n:
///
///   beta' ~ [[a + c, d], [d, e]]  (leading 2x2 block, higher rows vanish)
///
/// evaluated with frequencies Omega_j = sqrt(K_jj) and first-order couplings
/// eps_j = K_{j,j+1} / (Omega_j + Omega_{j+1}).
struct PerturbativeMode {
  int first_site = 0;                  // site index of omega_site[0] (n - 1)
  std::array<double, 4> omega_site{};  // Omega_{n-1} .. Omega_{n+2}; Omega_0 reported as 0
  std::array<double, 3> epsilon_site{};  // eps_{n-1} .. eps_{n+1}; eps_0 = 0
  double a_n = 0.0;
  double c_n = 0.0;
  double d_n = 0.0;
  double e_n = 0.0;
  double v1 = 0.0;  // a + c + d^2 / a
  double xi = 0.0;
};

/// All ingredients of the perturbative xi for angular momentum l and cut n.
///
/// a_n and d_n follow the standard expressions. The fourth-order diagonal
/// correction c_n is the (1,1) entry of gamma_D^{-1/2} V beta V^T gamma_D^{-1/2}
/// expanded to fourth order in the couplings: it collects the third-order
/// Omega entry at the cut, the second-order corrections to A^{-1}, the
/// two-step couplings eps~_{n-1,n+1}, eps~_{n,n+2}, the rotation V to second
/// order and the shift of the first gamma eigenvalue.
namespace detail {

// Also covers the cut at the outer edge, n = N - 1: there site n + 1 = N is the
// only kept site, eps_{n+1} and every term through site n + 2 vanish, and the
// expansion is as accurate as in the bulk.
inline PerturbativeMode perturbative_mode_any(const ModelParams& params, std::int64_t l, int n) {
  params.validate();
  if (l < 0) throw DomainError("angular momentum must be non-negative");
  if (n < 1) throw DomainError("perturbative xi: need n >= 1");
  if (n >= params.sites) throw DomainError("perturbative xi: need n <= N - 1");
  const bool edge = n + 1 == params.sites;

  const auto omega = [&](int j) { return std::sqrt(coupling_diagonal(params, l, j)); };
  const double w_prev = n >= 2 ? omega(n - 1) : 0.0;
  const double w_n = omega(n);
  const double w_a = omega(n + 1);
  const double w_b = edge ? 0.0 : omega(n + 2);

  const double e_prev = n >= 2 ? coupling_link(params, n - 1) / (w_prev + w_n) : 0.0;
  const double e_n = coupling_link(params, n) / (w_n + w_a);
  const double e_next = edge ? 0.0 : coupling_link(params, n + 1) / (w_a + w_b);

  // second-order Omega entries
  const double diag_n = -(e_n * e_n + e_prev * e_prev) / (2.0 * w_n);
  const double e_nn1 = n + 3 <= params.sites ? coupling_link(params, n + 2) / (w_b + omega(n + 3)) : 0.0;
  (void)e_nn1;  // enters only at sixth order
  const double diag_a = -(e_next * e_next + e_n * e_n) / (2.0 * w_a);
  const double skip_prev = n >= 2 ? -e_prev * e_n / (w_prev + w_a) : 0.0;  // Omega_{n-1,n+1}
  const double skip_n = edge ? 0.0 : -e_n * e_next / (w_n + w_b);           // Omega_{n,n+2}
  // third-order Omega_{n,n+1}
  const double third = -(e_prev * skip_prev + e_n * diag_a + diag_n * e_n + skip_n * e_next) / (w_n + w_a);

  // beta = B^T A^{-1} B / 2 in kept coordinates (site n+1 -> 1, n+2 -> 2)
  const double beta11_2 = e_n * e_n / (2.0 * w_n);
  double beta11_4 = e_n * third / w_n - 0.5 * e_n * e_n * diag_n / (w_n * w_n);
  if (n >= 2) {
    beta11_4 += 0.5 * e_n * e_n * e_prev * e_prev / (w_n * w_n * w_prev) -
                e_n * e_prev * skip_prev / (w_n * w_prev) + 0.5 * skip_prev * skip_prev / w_prev;
  }
  const double beta12 = 0.5 * e_n * skip_n / w_n;
  const double beta22 = 0.5 * skip_n * skip_n / w_n;

  // gamma = C - beta: rotation angle and first eigenvalue
  const double t = edge ? 0.0 : e_next / (w_a - w_b);
  const double w1_shift = diag_a - beta11_2 + t * e_next;

  PerturbativeMode m;
  m.first_site = n - 1;
  m.omega_site = {w_prev, w_n, w_a, w_b};
  m.epsilon_site = {e_prev, e_n, e_next};
  m.a_n = beta11_2 / w_a;
  m.c_n = (beta11_4 - t * t * beta11_2 + 2.0 * t * beta12) / w_a - beta11_2 * w1_shift / (w_a * w_a);
  if (!edge) {
    m.d_n = m.a_n * std::sqrt(w_a / w_b) * e_next * (1.0 / (w_a - w_b) + 1.0 / (w_n + w_b));
    m.e_n = (t * t * beta11_2 - 2.0 * t * beta12 + beta22) / w_b;
  }
  m.v1 = m.a_n == 0.0 ? 0.0 : m.a_n + m.c_n + m.d_n * m.d_n / m.a_n;
  if (!(m.v1 < 1.0) || m.v1 < 0.0)
    throw DomainError("perturbative xi: v1 = " + std::to_string(m.v1) + " outside [0, 1); l too small for perturbation theory");
  m.xi = m.v1 / (1.0 + std::sqrt((1.0 - m.v1) * (1.0 + m.v1)));
  return m;
}

inline double tail_xi(const ModelParams& params, std::int64_t l, int n) { return perturbative_mode_any(params, l, n).xi; }

}  // namespace detail

inline PerturbativeMode perturbative_mode(const ModelParams& params, std::int64_t l, int n) {
  if (n + 2 > params.sites)
    throw DomainError("perturbative xi undefined for n + 2 > N (d_n needs site n + 2); use the exact path");
  return detail::perturbative_mode_any(params, l, n);
}

inline double perturbative_xi(const ModelParams& params, std::int64_t l, int n) { return perturbative_mode(params, l, n).xi; }

// ---------------------------------------------------------------------------
// Tails of the angular-momentum sums

enum class TailMethod { DirectSum, ZetaAccelerated };

inline std::string to_string(TailMethod m) { return m == TailMethod::DirectSum ? "direct" : "zeta"; }

inline TailMethod parse_tail_method(const std::string& s) {
  if (s == "direct") return TailMethod::DirectSum;
  if (s == "zeta") return TailMethod::ZetaAccelerated;
  throw UsageError("unknown tail method '" + s + "' (expected direct|zeta)");
}

struct TailResult {
  double delta_S = 0.0;
  double delta_E1 = 0.0;
  std::int64_t terms = 0;  // explicit terms summed (direct) or fit samples (zeta)
  TailMethod method = TailMethod::DirectSum;
};

struct TailOptions {
  double rel_tol = 1e-10;
  std::int64_t term_budget = 200'000'000;
};

namespace detail {

// sum_{l > last} of f(l) = l^{-q} (alpha + beta log l), with alpha, beta matched
// to f at two abscissae.
inline double log_power_remainder(double q, double l1, double f1, double l2, double f2) {
  const double g1 = f1 * std::pow(l1, q);
  const double g2 = f2 * std::pow(l2, q);
  const double beta = (g2 - g1) / (std::log(l2) - std::log(l1));
  const double alpha = g2 - beta * std::log(l2);
  return alpha * zeta_remainder(q, l2 + 1.0) + beta * zeta_log_remainder(q, l2 + 1.0);
}

}  // namespace detail

/// sum_{l >= l_start} nu(l, D) [S(xi(l)), E1(xi(l))] with the perturbative xi,
/// stopping once the current term drops below rel_tol times the accumulated
/// tail. Beyond the last term the summands behave as l^{D-6} (alpha + beta log l);
/// that remainder is matched at the last term and at the last power of two.
inline TailResult tail_direct(const ModelParams& params, int n, int l_start, const TailOptions& opt = {}) {
  params.validate_summable();
  if (l_start < 1) throw DomainError("tail_direct: l_start must be >= 1");
  const double q = 6.0 - params.dim;
  CompensatedSum s_sum, e_sum;
  double l_mark = 0.0, s_mark = 0.0, e_mark = 0.0;
  std::int64_t terms = 0;
  for (std::int64_t l = l_start;; ++l) {
    if (terms >= opt.term_budget)
      throw ConvergenceError("tail_direct: no convergence within " + std::to_string(opt.term_budget) + " terms");
    const double xi = detail::tail_xi(params, l, n);
    const double nu = degeneracy(l, params.dim);
    const double s_term = nu * mode_entropy(xi);
    const double e_term = nu * mode_single_copy(xi);
    s_sum += s_term;
    e_sum += e_term;
    ++terms;
    const double ld = static_cast<double>(l);
    if (terms >= 8 && ld >= 2.0 * l_mark && s_term <= opt.rel_tol * s_sum.value() &&
        e_term <= opt.rel_tol * e_sum.value() && l_mark > 0.0) {
      if (s_term > 0.0) s_sum += detail::log_power_remainder(q, l_mark, s_mark, ld, s_term);
      if (e_term > 0.0) e_sum += detail::log_power_remainder(q, l_mark, e_mark, ld, e_term);
      break;
    }
    if ((l & (l - 1)) == 0 || l == l_start) {
      l_mark = ld;
      s_mark = s_term;
      e_mark = e_term;
    }
  }
  return {s_sum.value(), e_sum.value(), terms, TailMethod::DirectSum};
}

// ---------------------------------------------------------------------------
// Power series in u = 1/l, truncated at a fixed order.

namespace series {

using Coeffs = std::vector<double>;

inline Coeffs mul(const Coeffs& a, const Coeffs& b, std::size_t order) {
  Coeffs r(order + 1, 0.0);
  for (std::size_t i = 0; i < a.size() && i <= order; ++i)
    for (std::size_t j = 0; j < b.size() && i + j <= order; ++j) r[i + j] += a[i] * b[j];
  return r;
}

/// log(a(u)) for a(0) > 0.
inline Coeffs log(const Coeffs& a, std::size_t order) {
  Coeffs r(order + 1, 0.0);
  r[0] = std::log(a[0]);
  // a' = a r'  =>  k a0 r_k = k a_k - sum_{j=1}^{k-1} j r_j a_{k-j}
  for (std::size_t k = 1; k <= order; ++k) {
    double acc = k < a.size() ? k * a[k] : 0.0;
    for (std::size_t j = 1; j < k; ++j) acc -= j * r[j] * (k - j < a.size() ? a[k - j] : 0.0);
    r[k] = acc / (k * a[0]);
  }
  return r;
}

inline Coeffs exp(const Coeffs& a, std::size_t order) {
  Coeffs r(order + 1, 0.0);
  r[0] = std::exp(a[0]);
  // r' = a' r  =>  k r_k = sum_{j=1}^{k} j a_j r_{k-j}
  for (std::size_t k = 1; k <= order; ++k) {
    double acc = 0.0;
    for (std::size_t j = 1; j <= k && j < a.size(); ++j) acc += j * a[j] * r[k - j];
    r[k] = acc / k;
  }
  return r;
}

}  // namespace series

/// Coefficients nu_k(D) of nu(l, D) = l^{D-2} sum_k nu_k(D) l^{-k}.
///
/// nu = (2l + a) Gamma(l + a) / (Gamma(l + 1) Gamma(a + 1)) with a = D - 2; the
/// Gamma ratio follows from Stirling's series with Bernoulli polynomials.
inline series::Coeffs degeneracy_series(double dim, std::size_t order) {
  if (order > 10) throw DomainError("degeneracy_series: order too large");
  const double a = dim - 2.0;
  series::Coeffs log_ratio(order + 1, 0.0);
  for (std::size_t k = 1; k <= order; ++k) {
    log_ratio[k] = detail::gamma_ratio_coeff(static_cast<int>(k), a);
  }
  series::Coeffs ratio = series::exp(log_ratio, order);
  series::Coeffs lead = {2.0, a};
  series::Coeffs out = series::mul(lead, ratio, order);
  const double norm = std::exp(-std::lgamma(a + 1.0));
  for (double& c : out) c *= norm;
  return out;
}

/// Fitted large-l representation xi(l) ~ l^{-4} sum_k xi_coeffs[k] l^{-k}.
struct TailSeries {
  std::vector<double> xi_coeffs;
  int l_start = 0;
  TailMethod method = TailMethod::ZetaAccelerated;
  double condition = 0.0;     // of the scaled least-squares design matrix
  double max_rel_residual = 0.0;
};

struct FitOptions {
  int samples = 48;
  double span = 1e4;              // sample l in [l0, span * l0]
  double max_condition = 1e10;
};

/// Least-squares polynomial in 1/l for y(l) = xi(l) l^4 sampled at the given l.
/// Fitting uses x = l0 / l to keep the design matrix well scaled.
inline TailSeries fit_xi_series(const std::vector<double>& ls, const std::vector<double>& xi, int degree, double l0,
                                double max_condition = 1e10) {
  if (degree < 0 || degree > 5) throw DomainError("tail fit degree must lie in [0, 5]");
  if (ls.size() != xi.size() || ls.size() < static_cast<std::size_t>(degree + 2))
    throw DomainError("tail fit needs more samples than coefficients");
  const auto rows = static_cast<Eigen::Index>(ls.size());
  Eigen::MatrixXd design(rows, degree + 1);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double l = ls[static_cast<std::size_t>(i)];
    const double x = l0 / l;
    double p = 1.0;
    for (int k = 0; k <= degree; ++k, p *= x) design(i, k) = p;
    y[i] = xi[static_cast<std::size_t>(i)] * l * l * l * l;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design);
  const auto& sv = svd.singularValues();
  const double cond = sv[0] / sv[sv.size() - 1];
  if (!(cond < max_condition))
    throw ConvergenceError("tail fit ill-conditioned (condition " + std::to_string(cond) +
                           "); use a larger l0 or lower fit degree");
  const Eigen::VectorXd b = design.colPivHouseholderQr().solve(y);
  TailSeries ts;
  ts.condition = cond;
  ts.xi_coeffs.resize(static_cast<std::size_t>(degree) + 1);
  double scale = 1.0;
  for (int k = 0; k <= degree; ++k, scale *= l0) ts.xi_coeffs[static_cast<std::size_t>(k)] = b[k] * scale;
  const Eigen::VectorXd resid = design * b - y;
  for (Eigen::Index i = 0; i < rows; ++i)
    ts.max_rel_residual = std::max(ts.max_rel_residual, std::abs(resid[i]) / std::abs(y[i]));
  ts.l_start = static_cast<int>(l0);
  return ts;
}

/// Per-mode large-l expansions built from a fitted xi series:
///   S_l  = l^{-4} sum_k (s_k + t_k log l) l^{-k}
///   E1_l = l^{-4} sum_k kappa_k l^{-k}
struct ModeSeries {
  series::Coeffs s, t, kappa;
};

inline ModeSeries mode_series(const std::vector<double>& xi_coeffs, std::size_t order = 5) {
  if (xi_coeffs.empty() || !(xi_coeffs[0] > 0.0)) throw ConvergenceError("tail fit: leading coefficient must be positive");
  series::Coeffs x(xi_coeffs.begin(), xi_coeffs.end());
  x.resize(std::max(x.size(), order + 1), 0.0);
  x.resize(order + 1);
  // S = sum_k (1/k - log xi) xi^k; with xi = u^4 X(u) only k = 1, 2 survive to u^{4+5}.
  const series::Coeffs x2 = series::mul(x, x, order);
  series::Coeffs p = x, q = x;
  for (std::size_t k = 4; k <= order; ++k) {
    p[k] += 0.5 * x2[k - 4];
    q[k] += x2[k - 4];
  }
  const series::Coeffs log_x = series::log(x, order);
  const series::Coeffs lq = series::mul(log_x, q, order);
  ModeSeries ms;
  ms.s.resize(order + 1);
  ms.t.resize(order + 1);
  for (std::size_t k = 0; k <= order; ++k) {
    ms.s[k] = p[k] - lq[k];
    ms.t[k] = 4.0 * q[k];
  }
  ms.kappa = p;
  return ms;
}

/// Zeta-accelerated tails: fit xi(l) l^4 over l >= l0, expand S and E1 in 1/l,
/// multiply by the degeneracy series and sum each power of l in closed form.
/// sum_{l >= l0} l^{-s} and sum_{l >= l0} log(l) l^{-s} are the zeta(s) and
/// -zeta'(s) closed forms minus their first l0 - 1 terms, evaluated as Hurwitz
/// remainders so the subtraction does not cancel.
inline TailResult tail_zeta(const ModelParams& params, int n, int l0, int fit_degree, const FitOptions& opt = {},
                            TailSeries* fitted = nullptr) {
  params.validate_summable();
  if (l0 < 1) throw DomainError("tail_zeta: l0 must be >= 1");
  std::vector<double> ls, xs;
  ls.reserve(static_cast<std::size_t>(opt.samples));
  for (int i = 0; i < opt.samples; ++i) {
    const double l = std::round(l0 * std::pow(opt.span, static_cast<double>(i) / (opt.samples - 1)));
    if (!ls.empty() && l <= ls.back()) continue;
    ls.push_back(l);
    xs.push_back(detail::tail_xi(params, static_cast<std::int64_t>(l), n));
  }
  TailSeries ts = fit_xi_series(ls, xs, fit_degree, static_cast<double>(l0), opt.max_condition);
  constexpr std::size_t order = 5;
  const ModeSeries ms = mode_series(ts.xi_coeffs, order);
  const series::Coeffs nu = degeneracy_series(params.dim, order);
  const series::Coeffs sigma = series::mul(nu, ms.s, order);
  const series::Coeffs tau = series::mul(nu, ms.t, order);
  const series::Coeffs lambda = series::mul(nu, ms.kappa, order);
  CompensatedSum ds, de;
  for (std::size_t k = 0; k <= order; ++k) {
    const double s = 6.0 - params.dim + static_cast<double>(k);
    const double plain = zeta_remainder(s, l0);
    const double logged = zeta_log_remainder(s, l0);
    ds += sigma[k] * plain + tau[k] * logged;
    de += lambda[k] * plain;
  }
  if (fitted) *fitted = ts;
  return {ds.value(), de.value(), static_cast<std::int64_t>(ls.size()), TailMethod::ZetaAccelerated};
}

/// Tail from l_start with either method. The large-l series of xi converges
/// for l >> max(1, mu) (n + 2), so below that (and below fit_start) terms are
/// summed explicitly; the fit start moves out further while the fit residual
/// exceeds 1e-10.
inline TailResult tail_sum(const ModelParams& params, int n, int l_start, TailMethod method, int fit_degree = 5,
                           const TailOptions& opt = {}, int fit_start = 1000) {
  if (method == TailMethod::DirectSum) return tail_direct(params, n, l_start, opt);
  params.validate_summable();
  const double scale = 100.0 * std::max(1.0, params.mass) * (n + 2);
  std::int64_t l_fit = std::max<std::int64_t>({l_start, fit_start, static_cast<std::int64_t>(std::ceil(scale))});
  CompensatedSum s, e;
  std::int64_t l = l_start;
  for (;;) {
    if (l_fit - l_start > opt.term_budget)
      throw ConvergenceError("tail_sum: series fit needs l >= " + std::to_string(l_fit) + ", beyond the term budget");
    for (; l < l_fit; ++l) {
      const double xi = detail::tail_xi(params, l, n);
      const double nu = degeneracy(l, params.dim);
      s += nu * mode_entropy(xi);
      e += nu * mode_single_copy(xi);
    }
    TailSeries ts;
    const TailResult z = tail_zeta(params, n, static_cast<int>(l_fit), fit_degree, {}, &ts);
    if (ts.max_rel_residual <= 1e-10) {
      s += z.delta_S;
      e += z.delta_E1;
      return {s.value(), e.value(), z.terms + (l_fit - l_start), TailMethod::ZetaAccelerated};
    }
    l_fit *= 4;
  }
}

}  // namespace geoent
