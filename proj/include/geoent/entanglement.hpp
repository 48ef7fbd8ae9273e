#pragma once

// From xi spectra to entropies: per-mode S and E1, probability spectra of the
// reduced density matrix, majorization, and the total sum over angular momenta.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "geoent/errors.hpp"
#include "geoent/lattice.hpp"
#include "geoent/mode.hpp"
#include "geoent/perturbative.hpp"
#include "geoent/reduction.hpp"
#include "geoent/summation.hpp"

namespace geoent {

// ---------------------------------------------------------------------------
// Probability spectra

/// Descending eigenvalues of a (truncated) reduced density matrix. log_probs
/// is authoritative; probs may underflow to zero for strongly entangled states.
struct ProbabilitySpectrum {
  std::vector<double> probs;
  std::vector<double> log_probs;
  double mass = 0.0;                // sum of probs
  double truncation_deficit = 0.0;  // 1 - mass
  double mode_deficit = 0.0;        // upper bound on probability lost to dropped modes

  std::size_t size() const { return log_probs.size(); }
};

namespace detail {

inline ProbabilitySpectrum from_logs(std::vector<double> logs, double mode_deficit = 0.0) {
  ProbabilitySpectrum s;
  s.log_probs = std::move(logs);
  s.probs.reserve(s.log_probs.size());
  CompensatedSum mass;
  for (double lp : s.log_probs) {
    s.probs.push_back(std::exp(lp));
    mass += s.probs.back();
  }
  s.mass = mass.value();
  s.truncation_deficit = 1.0 - s.mass;
  s.mode_deficit = mode_deficit;
  return s;
}

}  // namespace detail

/// p_k = (1 - xi) xi^k for k < cutoff.
inline ProbabilitySpectrum geometric_spectrum(double xi, int cutoff) {
  detail::require_xi(xi);
  if (cutoff < 1) throw DomainError("geometric_spectrum: cutoff must be >= 1");
  std::vector<double> logs;
  const double l0 = std::log1p(-xi);
  const double lx = xi > 0.0 ? std::log(xi) : 0.0;
  for (int k = 0; k < cutoff; ++k) {
    if (k > 0 && xi == 0.0) break;
    logs.push_back(l0 + k * lx);
  }
  ProbabilitySpectrum s = detail::from_logs(std::move(logs));
  s.truncation_deficit = xi == 0.0 ? 0.0 : std::pow(xi, cutoff);
  return s;
}

/// Mode with its multiplicity (e.g. the nu(l, D) copies of one radial mode).
struct WeightedMode {
  double xi = 0.0;
  double multiplicity = 1.0;
};

struct TopKOptions {
  double xi_floor = 1e-16;            // modes below this are dropped (counted in mode_deficit)
  std::int64_t budget = 10'000'000;   // max k
};

/// k largest eigenvalues of the product state prod_m [(1 - xi_m) xi_m^{n_m}].
///
/// Only the k largest modes (with multiplicity) can be excited in the top k,
/// so those are expanded and enumerated best-first. Occupations are walked as
/// non-decreasing index sequences into the descending mode list; each sequence
/// has one parent (drop or decrement the last index), so no state is visited
/// twice and no duplicate set is needed. Ties are broken lexicographically.
inline ProbabilitySpectrum top_k_product_spectrum(std::span<const WeightedMode> modes, std::int64_t k,
                                                  const TopKOptions& opt = {}) {
  if (k < 1) throw DomainError("top_k_product_spectrum: k must be >= 1");
  if (k > opt.budget)
    throw ConvergenceError("top_k_product_spectrum: k = " + std::to_string(k) + " exceeds enumeration budget " +
                           std::to_string(opt.budget) + "; lower k_max");
  CompensatedSum log_ground, dropped_e1;
  std::vector<WeightedMode> kept;
  for (const auto& m : modes) {
    detail::require_xi(m.xi);
    if (m.multiplicity <= 0.0) continue;
    if (m.xi < opt.xi_floor) {
      dropped_e1 += m.multiplicity * mode_single_copy(m.xi);
      continue;
    }
    log_ground += m.multiplicity * std::log1p(-m.xi);
    kept.push_back(m);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.xi > b.xi; });

  // expand multiplicities, only as far as k copies overall
  std::vector<double> log_x;
  for (const auto& m : kept) {
    const auto copies = static_cast<std::int64_t>(std::llround(m.multiplicity));
    for (std::int64_t c = 0; c < copies && static_cast<std::int64_t>(log_x.size()) < k; ++c)
      log_x.push_back(std::log(m.xi));
    if (static_cast<std::int64_t>(log_x.size()) >= k) break;
  }

  struct Node {
    double log_w;
    std::vector<std::int32_t> seq;
  };
  const auto worse = [](const Node& a, const Node& b) {
    if (a.log_w != b.log_w) return a.log_w < b.log_w;
    return a.seq > b.seq;  // lexicographically smaller sequence first
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> heap(worse);
  const double lg = log_ground.value();
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(k));
  logs.push_back(lg);
  if (!log_x.empty()) heap.push({lg + log_x[0], {0}});
  const auto m = static_cast<std::int32_t>(log_x.size());
  while (static_cast<std::int64_t>(logs.size()) < k && !heap.empty()) {
    Node top = heap.top();
    heap.pop();
    logs.push_back(top.log_w);
    const std::int32_t last = top.seq.back();
    Node again{top.log_w + log_x[static_cast<std::size_t>(last)], top.seq};
    again.seq.push_back(last);
    heap.push(std::move(again));
    if (last + 1 < m) {
      Node next{top.log_w - log_x[static_cast<std::size_t>(last)] + log_x[static_cast<std::size_t>(last) + 1],
                std::move(top.seq)};
      next.seq.back() = last + 1;
      heap.push(std::move(next));
    }
  }
  return detail::from_logs(std::move(logs), -std::expm1(-dropped_e1.value()));
}

inline ProbabilitySpectrum top_k_product_spectrum(std::span<const double> xis, std::int64_t k,
                                                  const TopKOptions& opt = {}) {
  std::vector<WeightedMode> modes;
  modes.reserve(xis.size());
  for (double x : xis) modes.push_back({x, 1.0});
  return top_k_product_spectrum(std::span<const WeightedMode>(modes), k, opt);
}

struct MajorizationReport {
  bool holds = true;                           // q_k-sums <= p_k-sums + abs_tol for all k
  std::optional<int> first_violation;          // 1-based k
  std::vector<double> margins;                 // P_k - Q_k
  std::vector<double> relative_margins;        // 1 - Q_k / P_k
  double min_relative_margin = 1.0;
  double deficit = 0.0;                        // mode deficit of p
  bool certified = true;                       // relative margins >= deficit for all k
};

/// Does p majorize q on the first k_max partial sums?
inline MajorizationReport majorizes(const ProbabilitySpectrum& p, const ProbabilitySpectrum& q, int k_max,
                                    double abs_tol = 1e-12) {
  if (k_max < 1) throw DomainError("majorizes: k_max must be >= 1");
  MajorizationReport r;
  r.deficit = p.mode_deficit;
  double log_p = -std::numeric_limits<double>::infinity();
  double log_q = log_p;
  const auto log_add = [](double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == -std::numeric_limits<double>::infinity()) return a;
    return a + std::log1p(std::exp(b - a));
  };
  CompensatedSum ps, qs;
  for (int k = 0; k < k_max; ++k) {
    const auto i = static_cast<std::size_t>(k);
    if (i < p.size()) {
      log_p = log_add(log_p, p.log_probs[i]);
      ps += p.probs[i];
    }
    if (i < q.size()) {
      log_q = log_add(log_q, q.log_probs[i]);
      qs += q.probs[i];
    }
    const double margin = ps.value() - qs.value();
    const double rel = -std::expm1(log_q - log_p);
    r.margins.push_back(margin);
    r.relative_margins.push_back(rel);
    r.min_relative_margin = std::min(r.min_relative_margin, rel);
    if (margin < -abs_tol && r.holds) {
      r.holds = false;
      r.first_violation = k + 1;
    }
    if (rel < r.deficit) r.certified = false;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Total entanglement

/// Source of exact xi spectra for one l and several partitions; the default
/// computes them, the CLI substitutes a cached version.
using ModeProvider =
    std::function<std::vector<XiSpectrum>(const ModelParams&, int l, std::span<const Partition>)>;

struct EntanglementConfig {
  std::optional<int> l_switch;  // empty: automatic crossover
  double crossover_tol = 1e-6;
  int crossover_cap_factor = 20;  // l_switch <= factor * N
  double rel_tol = 1e-10;
  TailMethod tail_method = TailMethod::ZetaAccelerated;
  int fit_degree = 5;
  std::int64_t term_budget = 200'000'000;
  unsigned threads = 0;  // 0: hardware concurrency
  bool keep_modes = false;
  ModeProvider provider;
};

struct LTerm {
  int l = 0;
  double nu = 0.0;
  double S = 0.0;   // sum_i S(xi_i) for one copy
  double E1 = 0.0;
};

struct EntanglementResult {
  ModelParams params;
  Partition partition;
  double S = 0.0;
  double E1 = 0.0;
  std::vector<LTerm> per_l;
  double tail_S = 0.0;
  double tail_E1 = 0.0;
  int l_switch = 0;  // last l treated exactly
  bool converged = false;
  double crossover_error = 0.0;  // |xi_pert - xi_exact| / xi_exact at l_switch
  std::int64_t tail_terms = 0;
  TailMethod tail_method = TailMethod::ZetaAccelerated;
  std::vector<XiSpectrum> modes;  // exact spectra l = 0..l_switch when requested
};

inline double spectrum_entropy(std::span<const double> xi) {
  CompensatedSum s;
  for (double x : xi) s += mode_entropy(x);
  return s.value();
}

inline double spectrum_single_copy(std::span<const double> xi) {
  CompensatedSum s;
  for (double x : xi) s += mode_single_copy(x);
  return s.value();
}

namespace detail {

struct Accumulator {
  CompensatedSum s, e;
  bool done = false;
};

inline std::vector<std::vector<XiSpectrum>> compute_chunk(const ModelParams& params, int l_begin, int l_end,
                                                          std::span<const Partition> parts,
                                                          const ModeProvider& provider, unsigned threads) {
  std::vector<std::vector<XiSpectrum>> out(static_cast<std::size_t>(l_end - l_begin));
  const auto work = [&](int l) { out[static_cast<std::size_t>(l - l_begin)] = provider(params, l, parts); };
  if (threads <= 1 || l_end - l_begin <= 1) {
    for (int l = l_begin; l < l_end; ++l) work(l);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (int l = l_begin + static_cast<int>(t); l < l_end; l += static_cast<int>(threads)) work(l);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace detail

/// S and E1 for several partitions of the same lattice, sharing Omega per l.
///
/// Exact spectra are summed in ascending l. For each partition the exact loop
/// stops at the first l where the perturbative xi matches the exact largest xi
/// to crossover_tol (or at the configured l_switch); the remainder comes from
/// the perturbative tail. Cuts at the outer edge (n + 2 > N) have no
/// perturbative form and keep summing exact terms down to rel_tol.
inline std::vector<EntanglementResult> total_entanglement_batch(const ModelParams& params,
                                                                std::span<const Partition> partitions,
                                                                const EntanglementConfig& cfg = {}) {
  params.validate_summable();
  if (!(cfg.rel_tol > 0.0)) throw UsageError("rel_tol must be positive");
  if (cfg.l_switch && *cfg.l_switch < 0) throw UsageError("l_switch must be non-negative");
  for (const auto& p : partitions) p.validate(params.sites);

  const ModeProvider provider =
      cfg.provider ? cfg.provider : ModeProvider([](const ModelParams& mp, int l, std::span<const Partition> ps) {
        return exact_modes(mp, l, ps);
      });
  const unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  const int cap = cfg.crossover_cap_factor * params.sites;

  const std::size_t np = partitions.size();
  std::vector<EntanglementResult> results(np);
  std::vector<detail::Accumulator> acc(np);
  for (std::size_t i = 0; i < np; ++i) {
    results[i].params = params;
    results[i].partition = partitions[i];
    results[i].tail_method = cfg.tail_method;
  }

  std::vector<std::size_t> active(np);
  for (std::size_t i = 0; i < np; ++i) active[i] = i;
  const int chunk = static_cast<int>(threads) * 2;
  for (int l_begin = 0; !active.empty(); l_begin += chunk) {
    std::vector<Partition> parts;
    for (auto i : active) parts.push_back(partitions[i]);
    const auto spectra =
        detail::compute_chunk(params, l_begin, l_begin + chunk, std::span<const Partition>(parts), provider, threads);
    for (int l = l_begin; l < l_begin + chunk && !active.empty(); ++l) {
      const auto& row = spectra[static_cast<std::size_t>(l - l_begin)];
      const double nu = degeneracy(l, params.dim);
      std::vector<std::size_t> still;
      for (std::size_t a = 0; a < active.size(); ++a) {
        const std::size_t i = active[a];
        const auto& spec = row[static_cast<std::size_t>(
            std::find(parts.begin(), parts.end(), partitions[i]) - parts.begin())];
        auto& res = results[i];
        auto& ac = acc[i];
        if (ac.done) continue;
        const LTerm term{l, nu, spectrum_entropy(spec.xi), spectrum_single_copy(spec.xi)};
        res.per_l.push_back(term);
        ac.s += nu * term.S;
        ac.e += nu * term.E1;
        if (cfg.keep_modes) res.modes.push_back(spec);
        res.l_switch = l;

        bool stop = false;
        if (cfg.l_switch) {
          stop = l >= *cfg.l_switch;
          if (stop && l >= 1 && !spec.xi.empty() && spec.xi[0] > 0.0) {
            try {
              const double xp = detail::tail_xi(params, l, partitions[i].traced_sites);
              res.crossover_error = std::abs(xp - spec.xi[0]) / spec.xi[0];
            } catch (const DomainError&) {
              res.crossover_error = std::numeric_limits<double>::infinity();
            }
          }
          res.converged = true;
        } else if (l >= 1 && !spec.xi.empty() && spec.xi[0] > 0.0) {
          double err = std::numeric_limits<double>::infinity();
          try {
            const double xp = detail::tail_xi(params, l, partitions[i].traced_sites);
            err = std::abs(xp - spec.xi[0]) / spec.xi[0];
          } catch (const DomainError&) {
          }
          res.crossover_error = err;
          if (err < cfg.crossover_tol || l >= cap) {
            res.converged = err < cfg.crossover_tol;
            stop = true;
          }
        }
        if (stop) ac.done = true;
        else still.push_back(i);
      }
      active = std::move(still);
    }
  }

  for (std::size_t i = 0; i < np; ++i) {
    auto& res = results[i];
    const TailResult tail = tail_sum(params, partitions[i].traced_sites, res.l_switch + 1, cfg.tail_method,
                                     cfg.fit_degree, TailOptions{cfg.rel_tol, cfg.term_budget});
    res.tail_S = tail.delta_S;
    res.tail_E1 = tail.delta_E1;
    res.tail_terms = tail.terms;
    res.S = acc[i].s.value() + res.tail_S;
    res.E1 = acc[i].e.value() + res.tail_E1;
  }
  return results;
}

inline EntanglementResult total_entanglement(const ModelParams& params, const Partition& partition,
                                             const EntanglementConfig& cfg = {}) {
  return total_entanglement_batch(params, std::span<const Partition>(&partition, 1), cfg).front();
}

/// All exact modes l <= l_switch of a result, with multiplicity nu(l, D).
inline std::vector<WeightedMode> weighted_modes(const EntanglementResult& r) {
  std::vector<WeightedMode> out;
  for (const auto& spec : r.modes) {
    const double nu = degeneracy(spec.l, r.params.dim);
    for (double x : spec.xi)
      if (x > 0.0) out.push_back({x, nu});
  }
  return out;
}

/// Top-k spectrum of the full reduced state of a result computed with keep_modes.
/// Exact modes up to l_switch, then the perturbative largest mode of each
/// higher l until it falls below the floor; what is left enters the mode deficit.
inline ProbabilitySpectrum reduced_spectrum(const EntanglementResult& r, std::int64_t k, const TopKOptions& opt = {}) {
  if (r.modes.empty()) throw UsageError("reduced_spectrum needs a result computed with keep_modes");
  std::vector<WeightedMode> modes = weighted_modes(r);
  CompensatedSum enumerated_tail;
  for (std::int64_t l = r.l_switch + 1;; ++l) {
    const double xi = detail::tail_xi(r.params, l, r.partition.traced_sites);
    if (xi < opt.xi_floor) break;
    const double nu = degeneracy(l, r.params.dim);
    modes.push_back({xi, nu});
    enumerated_tail += nu * mode_single_copy(xi);
  }
  ProbabilitySpectrum s = top_k_product_spectrum(std::span<const WeightedMode>(modes), k, opt);
  const double rest = std::max(0.0, r.tail_E1 - enumerated_tail.value());
  s.mode_deficit = -std::expm1(std::log1p(-s.mode_deficit) - rest);
  return s;
}

}  // namespace geoent
