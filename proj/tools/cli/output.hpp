#pragma once

// Artifact emission: CSV rows and JSON documents with numbers fixed at 12
// significant digits, independent of the C++ and C locales.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoent/analysis.hpp"
#include "geoent/entanglement.hpp"
#include "geoent/errors.hpp"

namespace geoent::cli {

using json = nlohmann::ordered_json;

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 12);
  return std::string(buf, r.ptr);
}

/// x rounded to 12 significant digits; non-finite values become null.
inline json jnum(double x) {
  if (!std::isfinite(x)) return nullptr;
  double y = 0.0;
  const std::string s = num(x);
  std::from_chars(s.data(), s.data() + s.size(), y);
  return y;
}

inline const char* kSweepHeader = "D,mu,N,n,R,S,E1,S_tail,E1_tail,l_switch,converged";

inline std::string csv_row(const EntanglementResult& r) {
  std::string s;
  s += num(r.params.dim) + ",";
  s += num(r.params.mass) + ",";
  s += std::to_string(r.params.sites) + ",";
  s += std::to_string(r.partition.traced_sites) + ",";
  s += num(r.partition.radius(r.params.spacing)) + ",";
  s += num(r.S) + ",";
  s += num(r.E1) + ",";
  s += num(r.tail_S) + ",";
  s += num(r.tail_E1) + ",";
  s += std::to_string(r.l_switch) + ",";
  s += r.converged ? "true" : "false";
  return s;
}

inline std::string sweep_csv(const SweepResult& sw) {
  std::string out = std::string(kSweepHeader) + "\n";
  for (const auto& p : sw.points) out += csv_row(p.result) + "\n";
  return out;
}

inline json params_json(const ModelParams& p) {
  json j;
  j["D"] = jnum(p.dim);
  j["mu"] = jnum(p.mass);
  j["N"] = p.sites;
  j["spacing"] = jnum(p.spacing);
  j["boundary"] = to_string(p.boundary);
  return j;
}

inline json result_json(const EntanglementResult& r, bool per_l = true) {
  json j;
  j["params"] = params_json(r.params);
  j["n"] = r.partition.traced_sites;
  j["traced"] = r.partition.traced == TracedRegion::Inner ? "inner" : "outer";
  j["R"] = jnum(r.partition.radius(r.params.spacing));
  j["S"] = jnum(r.S);
  j["E1"] = jnum(r.E1);
  if (per_l) {
    json rows = json::array();
    for (const auto& t : r.per_l) rows.push_back({{"l", t.l}, {"nu", jnum(t.nu)}, {"S_l", jnum(t.S)}, {"E1_l", jnum(t.E1)}});
    j["per_l"] = std::move(rows);
  }
  j["tail_S"] = jnum(r.tail_S);
  j["tail_E1"] = jnum(r.tail_E1);
  j["l_switch"] = r.l_switch;
  j["converged"] = r.converged;
  j["crossover_error"] = jnum(r.crossover_error);
  j["tail_method"] = to_string(r.tail_method);
  j["tail_terms"] = r.tail_terms;
  return j;
}

inline json fit_json(const AreaLawFit& f) {
  json j;
  j["slope"] = jnum(f.slope);
  j["intercept"] = jnum(f.intercept);
  j["r_squared"] = jnum(f.r_squared);
  j["exponent"] = jnum(f.exponent_used);
  json res = json::array();
  for (double r : f.residuals) res.push_back(jnum(r));
  j["residuals"] = std::move(res);
  return j;
}

inline json slope_json(const SlopePoint& s) {
  json j;
  j["axis_value"] = jnum(s.axis_value);
  j["params"] = params_json(s.params);
  j["k_S"] = fit_json(s.fit_S);
  j["k_E"] = fit_json(s.fit_E1);
  j["ratio"] = jnum(s.ratio);
  return j;
}

inline json majorization_json(const PairMajorization& p) {
  json j;
  j["majorizing"] = jnum(p.lo);
  j["majorized"] = jnum(p.hi);
  j["holds"] = p.report.holds;
  j["certified"] = p.report.certified;
  j["first_violation"] = p.report.first_violation ? json(*p.report.first_violation) : json(nullptr);
  j["min_relative_margin"] = jnum(p.report.min_relative_margin);
  j["deficit"] = jnum(p.report.deficit);
  json m = json::array(), rm = json::array();
  for (double x : p.report.margins) m.push_back(jnum(x));
  for (double x : p.report.relative_margins) rm.push_back(jnum(x));
  j["margins"] = std::move(m);
  j["relative_margins"] = std::move(rm);
  return j;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace geoent::cli
