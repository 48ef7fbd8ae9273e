#pragma once

// Sweeps over radius, mass and dimension; area-law fits; RG and majorization
// reports built on top of total_entanglement.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "geoent/entanglement.hpp"
#include "geoent/errors.hpp"
#include "geoent/lattice.hpp"
#include "geoent/reduction.hpp"

namespace geoent {

struct AreaLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<double> residuals;
  double exponent_used = 0.0;
};

/// Least squares of value against R^exponent with a free intercept.
inline AreaLawFit fit_area_law(std::span<const std::pair<double, double>> points, double exponent) {
  if (points.size() < 3) throw DomainError("area-law fit needs at least 3 points");
  if (!(exponent > 0.0)) throw DomainError("area-law exponent must be positive");
  const double m = static_cast<double>(points.size());
  CompensatedSum sx, sy;
  for (const auto& [r, v] : points) {
    sx += std::pow(r, exponent);
    sy += v;
  }
  const double mx = sx.value() / m, my = sy.value() / m;
  CompensatedSum sxx, sxy, syy;
  for (const auto& [r, v] : points) {
    const double dx = std::pow(r, exponent) - mx, dy = v - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx.value() > 0.0)) throw DomainError("area-law fit: degenerate abscissae");
  AreaLawFit f;
  f.exponent_used = exponent;
  f.slope = sxy.value() / sxx.value();
  f.intercept = my - f.slope * mx;
  CompensatedSum ssr;
  for (const auto& [r, v] : points) {
    const double res = v - (f.intercept + f.slope * std::pow(r, exponent));
    f.residuals.push_back(res);
    ssr += res * res;
  }
  f.r_squared = syy.value() > 0.0 ? std::clamp(1.0 - ssr.value() / syy.value(), 0.0, 1.0) : 1.0;
  return f;
}

enum class SweepAxis { Radius, Mass, Dimension };

inline std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Radius: return "radius";
    case SweepAxis::Mass: return "mass";
    case SweepAxis::Dimension: return "dimension";
  }
  return "?";
}

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "radius") return SweepAxis::Radius;
  if (s == "mass") return SweepAxis::Mass;
  if (s == "dimension") return SweepAxis::Dimension;
  throw UsageError("unknown axis '" + s + "' (expected radius|mass|dimension)");
}

struct SweepPoint {
  double axis_value = 0.0;
  EntanglementResult result;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::Radius;
  std::vector<SweepPoint> points;  // by axis value, then n
  ModelParams params_base;
};

/// In-process memo of exact spectra keyed by (params, l, partition); repeated
/// sweep points over the same lattice reuse them. Safe for concurrent use.
class ModeMemo {
 public:
  explicit ModeMemo(ModeProvider inner = {}) : inner_(std::move(inner)) {}

  std::vector<XiSpectrum> operator()(const ModelParams& p, int l, std::span<const Partition> parts) {
    std::vector<XiSpectrum> out(parts.size());
    std::vector<Partition> missing;
    std::vector<std::size_t> where;
    {
      std::lock_guard lock(mutex_);
      for (std::size_t i = 0; i < parts.size(); ++i) {
        auto it = memo_.find(key(p, l, parts[i]));
        if (it != memo_.end()) out[i] = it->second;
        else {
          missing.push_back(parts[i]);
          where.push_back(i);
        }
      }
    }
    if (missing.empty()) return out;
    auto fresh = inner_ ? inner_(p, l, missing) : exact_modes(p, l, missing);
    std::lock_guard lock(mutex_);
    for (std::size_t j = 0; j < missing.size(); ++j) {
      memo_[key(p, l, missing[j])] = fresh[j];
      out[where[j]] = std::move(fresh[j]);
    }
    return out;
  }

  ModeProvider provider() {
    return [this](const ModelParams& p, int l, std::span<const Partition> parts) { return (*this)(p, l, parts); };
  }

 private:
  using Key = std::tuple<double, double, int, double, int, int, int, int>;
  static Key key(const ModelParams& p, int l, const Partition& part) {
    return {p.dim, p.mass, p.sites, p.spacing, static_cast<int>(p.boundary), l, part.traced_sites,
            static_cast<int>(part.traced)};
  }
  ModeProvider inner_;
  std::mutex mutex_;
  std::map<Key, XiSpectrum> memo_;
};

namespace detail {

inline void require_increasing(std::span<const double> values, const char* what) {
  if (values.empty()) throw DomainError(std::string(what) + ": no values given");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1])) throw DomainError(std::string(what) + " values must be strictly increasing");
}

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace detail

/// Default fit window n in [N/12, N/2].
inline std::vector<Partition> default_fit_partitions(int sites) {
  std::vector<Partition> out;
  const int lo = std::max(1, sites / 12), hi = std::max(lo, std::min(sites / 2, sites - 1));
  for (int n = lo; n <= hi; ++n) out.push_back(Partition{n});
  return out;
}

/// total_entanglement at every (axis value, partition). For the radius axis the
/// values are the traced site counts and `partitions` is ignored.
inline SweepResult sweep(const ModelParams& base, SweepAxis axis, std::span<const double> values,
                         std::span<const Partition> partitions, const EntanglementConfig& cfg = {}) {
  detail::require_increasing(values, "sweep");
  SweepResult out;
  out.axis = axis;
  out.params_base = base;
  const auto annotate = [&](double v, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      const std::string msg = "at " + to_string(axis) + " = " + detail::fmt(v) + ": " + e.what();
      switch (e.kind()) {
        case ErrorKind::Divergence: throw DivergenceError(msg);
        case ErrorKind::Convergence: throw ConvergenceError(msg);
        case ErrorKind::NotPositiveDefinite: throw NotPositiveDefiniteError(msg);
        case ErrorKind::Io: throw IoError(msg);
        case ErrorKind::Usage: throw UsageError(msg);
        default: throw DomainError(msg);
      }
    }
  };
  if (axis == SweepAxis::Radius) {
    std::vector<Partition> parts;
    for (double v : values) {
      if (v != std::floor(v)) throw DomainError("radius sweep values must be integer site counts");
      parts.push_back(Partition{static_cast<int>(v)});
    }
    auto results = annotate(values.front(), [&] { return total_entanglement_batch(base, parts, cfg); });
    for (std::size_t i = 0; i < results.size(); ++i) out.points.push_back({values[i], std::move(results[i])});
    return out;
  }
  if (partitions.empty()) throw UsageError("mass and dimension sweeps need at least one partition");
  for (double v : values) {
    ModelParams p = base;
    if (axis == SweepAxis::Mass) p.mass = v;
    else p.dim = v;
    auto results = annotate(v, [&] {
      p.validate_summable();
      return total_entanglement_batch(p, partitions, cfg);
    });
    for (auto& r : results) out.points.push_back({v, std::move(r)});
  }
  return out;
}

/// Area-law fit of S and E1 over a set of results sharing D.
struct SlopePoint {
  double axis_value = 0.0;
  ModelParams params;
  AreaLawFit fit_S;
  AreaLawFit fit_E1;
  double ratio = 0.0;  // k_S / k_E
};

inline SlopePoint fit_results(double axis_value, std::span<const EntanglementResult> rs) {
  if (rs.empty()) throw DomainError("no results to fit");
  std::vector<std::pair<double, double>> s, e;
  for (const auto& r : rs) {
    const double radius = r.partition.radius(r.params.spacing);
    s.emplace_back(radius, r.S);
    e.emplace_back(radius, r.E1);
  }
  const double exponent = rs.front().params.dim - 1.0;
  SlopePoint sp;
  sp.axis_value = axis_value;
  sp.params = rs.front().params;
  sp.fit_S = fit_area_law(s, exponent);
  sp.fit_E1 = fit_area_law(e, exponent);
  sp.ratio = sp.fit_S.slope / sp.fit_E1.slope;
  return sp;
}

/// One area-law fit per axis value of a mass/dimension sweep (or a single fit
/// of a radius sweep).
inline std::vector<SlopePoint> slope_scan(const SweepResult& sw) {
  std::vector<SlopePoint> out;
  std::size_t i = 0;
  while (i < sw.points.size()) {
    std::size_t j = i;
    std::vector<EntanglementResult> group;
    const double v = sw.axis == SweepAxis::Radius ? 0.0 : sw.points[i].axis_value;
    while (j < sw.points.size() && (sw.axis == SweepAxis::Radius || sw.points[j].axis_value == v))
      group.push_back(sw.points[j++].result);
    out.push_back(fit_results(v, group));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

struct ModewiseCheck {
  bool holds = true;
  double worst_excess = -std::numeric_limits<double>::infinity();  // max (xi' - xi) / xi over compared modes
  std::size_t compared = 0;
};

/// xi'(l, i) <= xi(l, i) over the common exact l range. Entries of one spectrum
/// carry absolute round-off of order eps * xi_max(l), so the comparison allows
/// rel_tol relative slack plus abs_tol * xi_max(l).
inline ModewiseCheck modewise_decrease(const EntanglementResult& lo, const EntanglementResult& hi,
                                       double rel_tol = 1e-9, double abs_tol = 1e-12) {
  ModewiseCheck c;
  const std::size_t nl = std::min(lo.modes.size(), hi.modes.size());
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& a = lo.modes[l].xi;
    const auto& b = hi.modes[l].xi;
    const double scale = std::max(a.empty() ? 0.0 : a[0], b.empty() ? 0.0 : b[0]);
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      const double floor = abs_tol * scale;
      if (a[i] <= floor && b[i] <= floor) continue;
      ++c.compared;
      c.worst_excess = std::max(c.worst_excess, (b[i] - a[i]) / std::max(a[i], floor));
      if (b[i] > a[i] * (1.0 + rel_tol) + floor) c.holds = false;
    }
  }
  return c;
}

struct PairMajorization {
  double lo = 0.0, hi = 0.0;  // axis values (n or mass) of the majorizing and majorized state
  MajorizationReport report;
};

struct RgReport {
  std::vector<SlopePoint> slopes;
  bool slopes_decreasing = true;
  bool modewise_monotone = true;
  double worst_modewise_excess = -std::numeric_limits<double>::infinity();
  std::size_t modes_compared = 0;
  std::vector<PairMajorization> majorization;
  bool majorization_holds = true;
  bool majorization_certified = true;
  double worst_relative_margin = 1.0;
  bool passed() const { return slopes_decreasing && modewise_monotone && majorization_holds; }
};

/// Entanglement loss along the mass flow: slopes k_S(mu) over fit_partitions,
/// modewise xi decrease over all fitted partitions, and top-k majorization
/// rho(mu) < rho(mu') at `partition`.
inline RgReport rg_report(const ModelParams& base, std::span<const double> masses, const Partition& partition,
                          std::span<const Partition> fit_partitions, const EntanglementConfig& cfg_in = {},
                          int k_max = 50) {
  if (masses.size() < 2) throw DomainError("rg_report needs at least two masses");
  detail::require_increasing(masses, "mass");
  EntanglementConfig cfg = cfg_in;
  cfg.keep_modes = true;
  std::vector<Partition> parts(fit_partitions.begin(), fit_partitions.end());
  if (std::find(parts.begin(), parts.end(), partition) == parts.end()) parts.push_back(partition);
  std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.traced_sites < b.traced_sites; });

  std::vector<std::vector<EntanglementResult>> per_mass;
  for (double mu : masses) {
    ModelParams p = base;
    p.mass = mu;
    per_mass.push_back(total_entanglement_batch(p, parts, cfg));
  }
  RgReport rep;
  for (std::size_t m = 0; m < masses.size(); ++m) {
    std::vector<EntanglementResult> fit;
    for (const auto& r : per_mass[m])
      if (std::find(fit_partitions.begin(), fit_partitions.end(), r.partition) != fit_partitions.end())
        fit.push_back(r);
    rep.slopes.push_back(fit_results(masses[m], fit));
    if (m > 0 && !(rep.slopes[m].fit_S.slope < rep.slopes[m - 1].fit_S.slope)) rep.slopes_decreasing = false;
  }
  for (std::size_t m = 1; m < masses.size(); ++m) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto c = modewise_decrease(per_mass[m - 1][i], per_mass[m][i]);
      rep.modewise_monotone = rep.modewise_monotone && c.holds;
      rep.worst_modewise_excess = std::max(rep.worst_modewise_excess, c.worst_excess);
      rep.modes_compared += c.compared;
    }
    const auto idx = static_cast<std::size_t>(std::find(parts.begin(), parts.end(), partition) - parts.begin());
    const auto p_hi = reduced_spectrum(per_mass[m][idx], k_max);
    const auto p_lo = reduced_spectrum(per_mass[m - 1][idx], k_max);
    PairMajorization pm{masses[m], masses[m - 1], majorizes(p_hi, p_lo, k_max)};
    rep.majorization_holds = rep.majorization_holds && pm.report.holds;
    rep.majorization_certified = rep.majorization_certified && pm.report.certified;
    rep.worst_relative_margin = std::min(rep.worst_relative_margin, pm.report.min_relative_margin);
    rep.majorization.push_back(std::move(pm));
  }
  return rep;
}

struct MajorizationSummary {
  std::vector<PairMajorization> pairs;  // lo = n, hi = n'
  bool holds = true;
  bool certified = true;
  double worst_relative_margin = 1.0;
  double worst_deficit = 0.0;
};

/// For consecutive partitions n < n', checks rho(R') < rho(R) on the top k_max
/// eigenvalues of the full product spectra.
inline MajorizationSummary majorization_report(const ModelParams& params, std::span<const Partition> partitions,
                                               int k_max = 50, const EntanglementConfig& cfg_in = {}) {
  if (partitions.empty()) throw DomainError("majorization_report: no partitions");
  for (std::size_t i = 1; i < partitions.size(); ++i)
    if (partitions[i].traced_sites < partitions[i - 1].traced_sites)
      throw DomainError("majorization_report: partitions must be sorted by n");
  EntanglementConfig cfg = cfg_in;
  cfg.keep_modes = true;
  const auto results = total_entanglement_batch(params, partitions, cfg);
  std::vector<ProbabilitySpectrum> spectra;
  for (const auto& r : results) spectra.push_back(reduced_spectrum(r, k_max));
  MajorizationSummary out;
  for (std::size_t i = 0; i + 1 < results.size(); ++i) {
    PairMajorization pm{static_cast<double>(partitions[i].traced_sites),
                        static_cast<double>(partitions[i + 1].traced_sites),
                        majorizes(spectra[i], spectra[i + 1], k_max)};
    out.holds = out.holds && pm.report.holds;
    out.certified = out.certified && pm.report.certified;
    out.worst_relative_margin = std::min(out.worst_relative_margin, pm.report.min_relative_margin);
    out.worst_deficit = std::max(out.worst_deficit, pm.report.deficit);
    out.pairs.push_back(std::move(pm));
  }
  return out;
}

}  // namespace geoent
