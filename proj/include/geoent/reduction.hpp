#pragma once

// Gaussian block reduction: Omega = sqrt(K), partition into traced/kept blocks,
// and the xi parameters of the reduced state of the kept block.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <lapacke.h>

#include "geoent/errors.hpp"
#include "geoent/lattice.hpp"

namespace geoent {

enum class TracedRegion { Inner, Outer };

/// Cut after site n. By default the inner ball (sites 1..n) is traced out.
struct Partition {
  int traced_sites = 1;  // n
  TracedRegion traced = TracedRegion::Inner;

  /// Reporting radius R = (n + 1/2) a.
  double radius(double spacing = 1.0) const { return (traced_sites + 0.5) * spacing; }

  void validate(int sites) const {
    if (traced_sites < 1 || traced_sites > sites - 1)
      throw DomainError("traced sites n must satisfy 1 <= n <= N-1 (n=" + std::to_string(traced_sites) +
                        ", N=" + std::to_string(sites) + ")");
  }

  /// Number of oscillators left in the reduced state.
  int kept(int sites) const { return traced == TracedRegion::Inner ? sites - traced_sites : traced_sites; }

  friend bool operator==(const Partition&, const Partition&) = default;
};

struct XiSpectrum {
  std::vector<double> xi;  // descending, each in [0, 1), zeros retained
  int l = 0;
  Partition partition;
  ModelParams params;
};

/// Intermediate matrices of the reduction (kept-block coordinates).
struct ReductionTrace {
  Eigen::MatrixXd omega;
  Eigen::MatrixXd beta;
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd beta_prime;
};

/// Number of reductions performed in this process (instrumentation only).
inline std::atomic<std::uint64_t>& reduction_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

namespace detail {

inline Eigen::MatrixXd sqrt_from_eigen(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es, double rel_tol) {
  if (es.info() != Eigen::Success) throw NotPositiveDefiniteError("eigendecomposition failed");
  const Eigen::VectorXd& w = es.eigenvalues();
  const double norm = std::max(std::abs(w[0]), std::abs(w[w.size() - 1]));
  if (!(w[0] > rel_tol * norm))
    throw NotPositiveDefiniteError("matrix not positive definite (zero mode or unstable discretization)");
  const Eigen::MatrixXd& v = es.eigenvectors();
  return v * w.cwiseSqrt().asDiagonal() * v.transpose();
}

inline double xi_from_beta_prime(double b) { return b / (1.0 + std::sqrt((1.0 - b) * (1.0 + b))); }

// beta' eigenvalues -> sorted xi, with the clamping rules.
inline std::vector<double> xi_from_eigenvalues(const Eigen::VectorXd& bp, int kept) {
  std::vector<double> xi(static_cast<std::size_t>(kept), 0.0);
  for (Eigen::Index i = 0; i < bp.size(); ++i) {
    double b = bp[i];
    if (b < 0.0) {
      if (b < -1e-12) throw NotPositiveDefiniteError("reduced state has negative beta' eigenvalue (numerical failure)");
      b = 0.0;
    }
    if (b >= 1.0) throw NotPositiveDefiniteError("reduced state unnormalizable (numerical failure)");
    xi[static_cast<std::size_t>(i)] = xi_from_beta_prime(b);
  }
  std::sort(xi.begin(), xi.end(), std::greater<>());
  return xi;
}

struct Blocks {
  Eigen::MatrixXd traced;  // A
  Eigen::MatrixXd cross;   // B: traced rows x kept columns
  Eigen::MatrixXd kept;    // C
};

inline Blocks split(const Eigen::MatrixXd& omega, const Partition& p) {
  const auto big = omega.rows();
  const Eigen::Index n = p.traced_sites;
  const Eigen::Index m = big - n;
  if (p.traced == TracedRegion::Inner)
    return {omega.topLeftCorner(n, n), omega.topRightCorner(n, m), omega.bottomRightCorner(m, m)};
  return {omega.bottomRightCorner(m, m), omega.topRightCorner(n, m).transpose(), omega.topLeftCorner(n, n)};
}

}  // namespace detail

/// Omega with Omega^2 = K via orthogonal eigendecomposition.
inline Eigen::MatrixXd matrix_sqrt_spd(const Eigen::MatrixXd& k, double rel_tol = 1e-12) {
  if (k.rows() != k.cols()) throw DomainError("matrix_sqrt_spd: matrix must be square");
  if (!k.isApprox(k.transpose(), 1e-14)) throw DomainError("matrix_sqrt_spd: matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  return detail::sqrt_from_eigen(es, rel_tol);
}

/// Omega and Omega^{-1} of a coupling matrix from one tridiagonal
/// eigendecomposition (LAPACK dstemr).
struct OmegaPair {
  Eigen::MatrixXd omega;
  Eigen::MatrixXd inverse;
};

inline OmegaPair matrix_sqrt_pair(const CouplingMatrix& k, double rel_tol = 1e-12) {
  const lapack_int n = k.size();
  Eigen::VectorXd d = k.diagonal;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e.head(n - 1) = k.off_diagonal;
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, n);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  lapack_logical tryrac = 1;
  const lapack_int info = LAPACKE_dstemr(LAPACK_COL_MAJOR, 'V', 'A', n, d.data(), e.data(), 0.0, 0.0, 0, 0, &found,
                                         w.data(), z.data(), n, n, support.data(), &tryrac);
  if (info != 0 || found != n) throw NotPositiveDefiniteError("tridiagonal eigendecomposition failed");
  const double norm = std::max(std::abs(w[0]), std::abs(w[n - 1]));
  if (!(w[0] > rel_tol * norm))
    throw NotPositiveDefiniteError("matrix not positive definite (zero mode or unstable discretization)");
  const Eigen::MatrixXd root4 = z * w.cwiseSqrt().cwiseSqrt().asDiagonal();
  const Eigen::MatrixXd inv_root4 = z * w.cwiseSqrt().cwiseSqrt().cwiseInverse().asDiagonal();
  OmegaPair out;
  out.omega = root4 * root4.transpose();
  out.inverse = inv_root4 * inv_root4.transpose();
  return out;
}

inline Eigen::MatrixXd matrix_sqrt_spd(const CouplingMatrix& k, double rel_tol = 1e-12) {
  return matrix_sqrt_pair(k, rel_tol).omega;
}

/// Full reduction chain, keeping every intermediate matrix:
/// beta = B^T A^{-1} B / 2, gamma = C - beta = V^T gamma_D V,
/// beta' = gamma_D^{-1/2} V beta V^T gamma_D^{-1/2}.
inline ReductionTrace reduction_trace(const Eigen::MatrixXd& omega, const Partition& partition) {
  partition.validate(static_cast<int>(omega.rows()));
  auto [a, b, c] = detail::split(omega, partition);
  ReductionTrace t;
  t.omega = omega;
  Eigen::LDLT<Eigen::MatrixXd> a_fact(a);
  t.beta = 0.5 * b.transpose() * a_fact.solve(b);
  t.beta = 0.5 * (t.beta + t.beta.transpose()).eval();
  t.gamma = c - t.beta;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.gamma);
  if (es.info() != Eigen::Success || !(es.eigenvalues()[0] > 0.0))
    throw NotPositiveDefiniteError("gamma not positive definite");
  // Eigen returns gamma = W diag W^T, so V = W^T.
  const Eigen::MatrixXd v = es.eigenvectors().transpose();
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  t.beta_prime = inv_sqrt.asDiagonal() * (v * t.beta * v.transpose()) * inv_sqrt.asDiagonal();
  t.beta_prime = 0.5 * (t.beta_prime + t.beta_prime.transpose()).eval();
  return t;
}

inline std::vector<double> xi_from_trace(const ReductionTrace& t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.beta_prime, Eigen::EigenvaluesOnly);
  return detail::xi_from_eigenvalues(es.eigenvalues(), static_cast<int>(t.beta_prime.rows()));
}

/// xi spectrum of the kept block, given Omega and its inverse Q.
///
/// With A = L L^T and X = L^{-1} B, the Schur-complement identity
/// B Q_CC = -A Q_AC turns the beta' eigenproblem into one on the traced block:
/// beta' eigenvalues are t / (2 + t) where t runs over the eigenvalues of the
/// symmetric positive semidefinite T = -L^T Q_AC X^T. Both factors of T are
/// off-diagonal blocks, so small xi keep their relative accuracy.
inline std::vector<double> reduce_xi(const Eigen::MatrixXd& omega, const Eigen::MatrixXd& omega_inv,
                                     const Partition& partition) {
  partition.validate(static_cast<int>(omega.rows()));
  reduction_counter().fetch_add(1, std::memory_order_relaxed);
  const Eigen::Index sites = omega.rows();
  const Eigen::Index n = partition.traced_sites;
  const Eigen::Index m = sites - n;
  const bool inner = partition.traced == TracedRegion::Inner;
  const Eigen::Index t0 = inner ? 0 : n;   // traced block offset
  const Eigen::Index k0 = inner ? n : 0;   // kept block offset
  const Eigen::Index nt = inner ? n : m;   // traced size
  const Eigen::Index nk = inner ? m : n;   // kept size

  Eigen::LLT<Eigen::MatrixXd> a_fact(omega.block(t0, t0, nt, nt));
  if (a_fact.info() != Eigen::Success) throw NotPositiveDefiniteError("traced block of Omega not positive definite");
  const Eigen::MatrixXd x = a_fact.matrixL().solve(omega.block(t0, k0, nt, nk));  // traced x kept
  Eigen::MatrixXd t = omega_inv.block(t0, k0, nt, nk) * x.transpose();
  t = -(a_fact.matrixU() * t).eval();
  t = 0.5 * (t + t.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NotPositiveDefiniteError("beta' eigenvalue computation failed");
  Eigen::VectorXd bp = es.eigenvalues();
  for (Eigen::Index i = 0; i < bp.size(); ++i) {
    const double ti = bp[i];
    if (ti < 0.0 && ti >= -1e-12) bp[i] = 0.0;
    else bp[i] = ti / (2.0 + ti);
  }
  if (bp.size() > nk) {
    // more traced than kept sites: the surplus eigenvalues are zero up to round-off
    std::sort(bp.data(), bp.data() + bp.size(), std::greater<>());
    bp.conservativeResize(nk);
  }
  return detail::xi_from_eigenvalues(bp, static_cast<int>(nk));
}

inline std::vector<double> reduce_xi(const Eigen::MatrixXd& omega, const Partition& partition) {
  Eigen::LLT<Eigen::MatrixXd> fact(omega);
  if (fact.info() != Eigen::Success) throw NotPositiveDefiniteError("Omega not positive definite");
  const Eigen::MatrixXd inv = fact.solve(Eigen::MatrixXd::Identity(omega.rows(), omega.cols()));
  return reduce_xi(omega, inv, partition);
}

inline XiSpectrum reduce_mode(const Eigen::MatrixXd& omega, const Partition& partition, int l = 0,
                              const ModelParams& params = {}) {
  return XiSpectrum{reduce_xi(omega, partition), l, partition, params};
}

/// Exact xi spectra of one angular momentum for several partitions sharing Omega.
inline std::vector<XiSpectrum> exact_modes(const ModelParams& params, int l, std::span<const Partition> partitions) {
  const OmegaPair roots = matrix_sqrt_pair(build_coupling_matrix(params, l));
  std::vector<XiSpectrum> out;
  out.reserve(partitions.size());
  for (const auto& p : partitions) out.push_back(XiSpectrum{reduce_xi(roots.omega, roots.inverse, p), l, p, params});
  return out;
}

}  // namespace geoent
