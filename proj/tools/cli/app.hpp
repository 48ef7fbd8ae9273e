#pragma once

// geoent command line: entropy | sweep | fit | rg | majorization | selftest.
//
// Every option lives on the top-level app and falls through from the
// subcommands, so a config file can set any of them as `key = value`.
//
// Exit codes:
//   0 success            4 matrix not positive definite
//   1 check failed       5 divergent sum (D >= 5)
//   2 usage error        6 convergence failure
//   3 domain error       7 I/O error

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli/cache.hpp"
#include "cli/output.hpp"
#include "cli/selftest.hpp"
#include "geoent/analysis.hpp"
#include "geoent/entanglement.hpp"
#include "geoent/errors.hpp"

namespace geoent::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsage = 2,
  kDomain = 3,
  kNotPositiveDefinite = 4,
  kDivergence = 5,
  kConvergence = 6,
  kIo = 7,
};

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Domain: return kDomain;
    case ErrorKind::NotPositiveDefinite: return kNotPositiveDefinite;
    case ErrorKind::Divergence: return kDivergence;
    case ErrorKind::Convergence: return kConvergence;
    case ErrorKind::Io: return kIo;
    case ErrorKind::Usage: return kUsage;
  }
  return kDomain;
}

struct RunConfig {
  std::string command;
  ModelParams params;
  std::optional<int> trace;
  std::string side = "inner";
  std::string trace_range;
  int stride = 1;
  std::vector<int> traces;
  std::string axis = "radius";
  std::vector<double> values;
  std::vector<double> mass_squared;
  std::string boundary = "dirichlet";
  std::string tail = "zeta";
  double rel_tol = 1e-10;
  std::string lswitch = "auto";
  std::string emit;
  std::string out;
  std::string cache;
  bool no_cache = false;
  std::string from;
  std::string exponent = "auto";
  int k_max = 50;
  unsigned threads = 0;
};

namespace detail {

inline std::pair<int, int> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("--trace-range expects a:b (got '" + s + "')");
  int a = 0, b = 0;
  const auto ra = std::from_chars(s.data(), s.data() + colon, a);
  const auto rb = std::from_chars(s.data() + colon + 1, s.data() + s.size(), b);
  if (ra.ec != std::errc{} || rb.ec != std::errc{} || ra.ptr != s.data() + colon || rb.ptr != s.data() + s.size())
    throw UsageError("--trace-range expects integers a:b (got '" + s + "')");
  if (b < a) throw UsageError("--trace-range a:b needs a <= b");
  return {a, b};
}

inline TracedRegion parse_side(const std::string& s) {
  if (s == "inner") return TracedRegion::Inner;
  if (s == "outer") return TracedRegion::Outer;
  throw UsageError("unknown --side '" + s + "' (expected inner|outer)");
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw UsageError("CSV lacks column '" + name + "'");
    return static_cast<int>(it - header.begin());
  }
};

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  Csv csv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (csv.header.empty()) csv.header = split(line);
    else csv.rows.push_back(split(line));
  }
  if (csv.header.empty()) throw UsageError("'" + path + "' is empty");
  return csv;
}

inline double to_double(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw UsageError("bad number '" + s + "' in CSV");
  return v;
}

}  // namespace detail

/// Runs one command. Artifacts go to --out (or stdout); the one-line summary
/// goes to `out` when artifacts are files and to `err` otherwise.
class App {
 public:
  App(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(int argc, const char* const* argv) {
    CLI::App app{"Geometric entanglement of a radially discretized free scalar field", "geoent"};
    RunConfig c;
    build(app, c);
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out_, err_);
      return code == 0 ? kOk : kUsage;
    }
    for (auto* sub : app.get_subcommands()) c.command = sub->get_name();
    try {
      return dispatch(app, c);
    } catch (const Error& e) {
      err_ << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
      return exit_code(e.kind());
    } catch (const std::exception& e) {
      err_ << "error [internal]: " << e.what() << "\n";
      return kDomain;
    }
  }

 private:
  void build(CLI::App& app, RunConfig& c) {
    app.set_config("--config", "", "Config file with one `key = value` per line, # comments");
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--dim", c.params.dim, "Dimension D (real, 1 < D < 5 for summed quantities)");
    app.add_option("--mass", c.params.mass, "Mass mu in units of 1/a");
    app.add_option("--sites", c.params.sites, "Radial sites N");
    app.add_option("--boundary", c.boundary, "dirichlet|free-printed");
    app.add_option("--trace", c.trace, "Traced sites n");
    app.add_option("--side", c.side, "Traced region: inner|outer");
    app.add_option("--trace-range", c.trace_range, "Range a:b of traced sites");
    app.add_option("--stride", c.stride, "Stride through --trace-range");
    app.add_option("--traces", c.traces, "Explicit list of traced sites")->delimiter(',');
    app.add_option("--axis", c.axis, "Sweep axis: radius|mass|dimension");
    app.add_option("--values", c.values, "Axis values (mass or dimension sweeps; masses for rg)")->delimiter(',');
    app.add_option("--mass-squared", c.mass_squared, "Axis values given as mu^2 (mass sweeps, rg)")->delimiter(',');
    app.add_option("--tail", c.tail, "Tail method: direct|zeta");
    app.add_option("--rel-tol", c.rel_tol, "Relative tolerance of tail summation");
    app.add_option("--lswitch", c.lswitch, "Exact/perturbative crossover: auto|<int>");
    app.add_option("--emit", c.emit, "csv|json|both");
    app.add_option("--out", c.out, "Output path (stdout when absent)");
    app.add_option("--cache", c.cache, "Mode cache directory")->envname("GEOENT_CACHE_DIR");
    app.add_flag("--no-cache", c.no_cache, "Disable the mode cache");
    app.add_option("--from", c.from, "fit: sweep CSV to fit");
    app.add_option("--exponent", c.exponent, "fit: auto (D-1) or a real exponent");
    app.add_option("--kmax", c.k_max, "Eigenvalues compared in majorization checks");
    app.add_option("--threads", c.threads, "Worker threads (0: all cores)");
    app.add_subcommand("entropy", "S and E1 for one partition");
    app.add_subcommand("sweep", "S and E1 along radius, mass or dimension");
    app.add_subcommand("fit", "Area-law fit of a sweep");
    app.add_subcommand("rg", "Entanglement loss along the mass flow");
    app.add_subcommand("majorization", "Majorization between radii");
    app.add_subcommand("selftest", "Oracle suite");
  }

  bool given(const CLI::App& app, const std::string& name) const { return app.count(name) > 0; }

  void forbid(const CLI::App& app, const RunConfig& c, std::initializer_list<const char*> names) const {
    for (const char* n : names)
      if (given(app, n)) throw UsageError(std::string(n) + " is not used by '" + c.command + "'");
  }

  EntanglementConfig entanglement_config(const RunConfig& c) {
    EntanglementConfig ec;
    ec.tail_method = parse_tail_method(c.tail);
    if (!(c.rel_tol > 0.0)) throw UsageError("--rel-tol must be positive");
    ec.rel_tol = c.rel_tol;
    if (c.lswitch != "auto") {
      int v = 0;
      const auto r = std::from_chars(c.lswitch.data(), c.lswitch.data() + c.lswitch.size(), v);
      if (r.ec != std::errc{} || r.ptr != c.lswitch.data() + c.lswitch.size() || v < 0)
        throw UsageError("--lswitch expects auto or a non-negative integer");
      ec.l_switch = v;
    }
    ec.threads = c.threads;
    if (!c.no_cache && !c.cache.empty()) {
      cache_ = std::make_unique<DiskCache>(c.cache, kCodeVersion,
                                           [this](const std::string& m) { err_ << "warning: " << m << "\n"; });
      ec.provider = cache_->provider();
    }
    return ec;
  }

  std::vector<Partition> partitions(const CLI::App& app, const RunConfig& c, bool fallback_window) const {
    const TracedRegion side = detail::parse_side(c.side);
    std::vector<Partition> out;
    if (!c.traces.empty()) {
      for (int n : c.traces) out.push_back(Partition{n, side});
    } else if (given(app, "--trace-range")) {
      if (c.stride < 1) throw UsageError("--stride must be >= 1");
      const auto [a, b] = detail::parse_range(c.trace_range);
      for (int n = a; n <= b; n += c.stride) out.push_back(Partition{n, side});
    } else if (c.trace) {
      out.push_back(Partition{*c.trace, side});
    } else if (fallback_window) {
      out = default_fit_partitions(c.params.sites);
      for (auto& p : out) p.traced = side;
    }
    for (const auto& p : out) p.validate(c.params.sites);
    return out;
  }

  std::vector<double> masses(const RunConfig& c) const {
    if (!c.values.empty() && !c.mass_squared.empty()) throw UsageError("give either --values or --mass-squared");
    std::vector<double> m = c.values;
    for (double m2 : c.mass_squared) {
      if (m2 < 0.0) throw UsageError("--mass-squared values must be non-negative");
      m.push_back(std::sqrt(m2));
    }
    return m;
  }

  std::string emit_mode(const RunConfig& c, const char* fallback) const {
    const std::string e = c.emit.empty() ? fallback : c.emit;
    if (e != "csv" && e != "json" && e != "both") throw UsageError("--emit expects csv|json|both");
    if (e == "both" && c.out.empty()) throw UsageError("--emit both needs --out");
    return e;
  }

  void emit(const RunConfig& c, const std::string& mode, const std::string& csv, const std::string& js) {
    if (c.out.empty()) {
      out_ << (mode == "csv" ? csv : js);
      return;
    }
    std::filesystem::path base(c.out);
    if (mode == "both") {
      write_file(std::filesystem::path(base).replace_extension(".csv"), csv);
      write_file(std::filesystem::path(base).replace_extension(".json"), js);
    } else {
      write_file(base, mode == "csv" ? csv : js);
    }
  }

  void summary(const RunConfig& c, const std::string& line) {
    std::ostream& s = c.out.empty() ? err_ : out_;
    s << line << " reductions=" << reduction_counter().load() << " cache_hits=" << (cache_ ? cache_->hits() : 0)
      << "\n";
  }

  int dispatch(const CLI::App& app, RunConfig& c) {
    c.params.boundary = parse_boundary(c.boundary);
    if (c.command == "selftest") return cmd_selftest();
    if (c.command == "fit" && !c.from.empty()) return cmd_fit_csv(app, c);
    c.params.validate();
    if (c.command == "entropy") return cmd_entropy(app, c);
    if (c.command == "sweep") return cmd_sweep(app, c);
    if (c.command == "fit") return cmd_fit_run(app, c);
    if (c.command == "rg") return cmd_rg(app, c);
    if (c.command == "majorization") return cmd_majorization(app, c);
    throw UsageError("unknown command '" + c.command + "'");
  }

  int cmd_entropy(const CLI::App& app, RunConfig& c) {
    forbid(app, c, {"--trace-range", "--traces", "--axis", "--values", "--mass-squared", "--from", "--kmax"});
    if (!c.trace) throw UsageError("entropy needs --trace");
    const auto ec = entanglement_config(c);
    const Partition part{*c.trace, detail::parse_side(c.side)};
    const auto r = total_entanglement(c.params, part, ec);
    const std::string mode = emit_mode(c, "json");
    const std::string csv = std::string(kSweepHeader) + "\n" + csv_row(r) + "\n";
    emit(c, mode, csv, dump(result_json(r)));
    summary(c, "entropy n=" + std::to_string(part.traced_sites) + " S=" + num(r.S) + " E1=" + num(r.E1) +
                   " l_switch=" + std::to_string(r.l_switch) + " converged=" + (r.converged ? "true" : "false"));
    return kOk;
  }

  SweepResult run_sweep(const CLI::App& app, RunConfig& c, const EntanglementConfig& ec) {
    const SweepAxis axis = parse_axis(c.axis);
    if (axis == SweepAxis::Radius) {
      if (given(app, "--values") || given(app, "--mass-squared"))
        throw UsageError("radius sweeps take --trace-range or --traces, not --values");
      const auto parts = partitions(app, c, true);
      std::vector<double> ns;
      for (const auto& p : parts) ns.push_back(p.traced_sites);
      SweepResult sw;
      sw.axis = axis;
      sw.params_base = c.params;
      geoent::detail::require_increasing(ns, "radius sweep");
      auto results = total_entanglement_batch(c.params, parts, ec);
      for (std::size_t i = 0; i < results.size(); ++i) sw.points.push_back({ns[i], std::move(results[i])});
      return sw;
    }
    std::vector<double> values = axis == SweepAxis::Mass ? masses(c) : c.values;
    if (axis == SweepAxis::Dimension && !c.mass_squared.empty()) throw UsageError("--mass-squared is for mass sweeps");
    if (values.empty()) throw UsageError(to_string(axis) + " sweep needs --values");
    const auto parts = partitions(app, c, true);
    return sweep(c.params, axis, values, parts, ec);
  }

  int cmd_sweep(const CLI::App& app, RunConfig& c) {
    forbid(app, c, {"--from", "--kmax", "--exponent"});
    const auto ec = entanglement_config(c);
    const std::string mode = emit_mode(c, "csv");
    const SweepResult sw = run_sweep(app, c, ec);
    json j;
    j["axis"] = to_string(sw.axis);
    j["params"] = params_json(sw.params_base);
    json pts = json::array();
    for (const auto& p : sw.points) pts.push_back({{"axis_value", jnum(p.axis_value)}, {"result", result_json(p.result, false)}});
    j["points"] = std::move(pts);
    emit(c, mode, sweep_csv(sw), dump(j));
    std::size_t nonconv = 0;
    for (const auto& p : sw.points) nonconv += !p.result.converged;
    summary(c, "sweep axis=" + to_string(sw.axis) + " points=" + std::to_string(sw.points.size()) +
                   " unconverged=" + std::to_string(nonconv));
    return kOk;
  }

  static std::string fits_csv(const std::vector<SlopePoint>& fits, const std::vector<std::size_t>& counts) {
    std::string s = "D,mu,N,points,k_S,intercept_S,r2_S,k_E,intercept_E,r2_E,ratio\n";
    for (std::size_t i = 0; i < fits.size(); ++i) {
      const auto& f = fits[i];
      s += num(f.params.dim) + "," + num(f.params.mass) + "," + std::to_string(f.params.sites) + "," +
           std::to_string(counts[i]) + "," + num(f.fit_S.slope) + "," + num(f.fit_S.intercept) + "," +
           num(f.fit_S.r_squared) + "," + num(f.fit_E1.slope) + "," + num(f.fit_E1.intercept) + "," +
           num(f.fit_E1.r_squared) + "," + num(f.ratio) + "\n";
    }
    return s;
  }

  int report_fits(RunConfig& c, const std::vector<SlopePoint>& fits, const std::vector<std::size_t>& counts) {
    json arr = json::array();
    for (const auto& f : fits) arr.push_back(slope_json(f));
    const std::string mode = emit_mode(c, "json");
    if (!c.out.empty()) emit(c, mode, fits_csv(fits, counts), dump(arr));
    for (const auto& f : fits)
      out_ << "D=" << num(f.params.dim) << " mu=" << num(f.params.mass) << " N=" << f.params.sites
        << " slope=" << num(f.fit_S.slope) << " intercept=" << num(f.fit_S.intercept)
        << " R2=" << num(f.fit_S.r_squared) << " k_E=" << num(f.fit_E1.slope)
        << " R2_E=" << num(f.fit_E1.r_squared) << " ratio=" << num(f.ratio) << "\n";
    return kOk;
  }

  std::optional<double> fixed_exponent(const RunConfig& c) const {
    if (c.exponent == "auto") return std::nullopt;
    double e = 0.0;
    const auto r = std::from_chars(c.exponent.data(), c.exponent.data() + c.exponent.size(), e);
    if (r.ec != std::errc{} || r.ptr != c.exponent.data() + c.exponent.size())
      throw UsageError("--exponent expects auto or a real number");
    return e;
  }

  int cmd_fit_csv(const CLI::App& app, RunConfig& c) {
    forbid(app, c, {"--trace", "--trace-range", "--traces", "--values", "--mass-squared", "--axis", "--kmax"});
    const auto csv = detail::read_csv(c.from);
    const int cd = csv.column("D"), cm = csv.column("mu"), cn = csv.column("N"), cr = csv.column("R"),
              cs = csv.column("S"), ce = csv.column("E1");
    const auto exponent = fixed_exponent(c);
    // group rows by (D, mu, N) in order of first appearance
    std::vector<std::tuple<double, double, int>> keys;
    std::map<std::tuple<double, double, int>, std::pair<std::vector<std::pair<double, double>>,
                                                        std::vector<std::pair<double, double>>>>
        groups;
    for (const auto& row : csv.rows) {
      if (row.size() != csv.header.size()) throw UsageError("ragged CSV row in '" + c.from + "'");
      const auto key = std::make_tuple(detail::to_double(row[cd]), detail::to_double(row[cm]),
                                       static_cast<int>(detail::to_double(row[cn])));
      if (!groups.count(key)) keys.push_back(key);
      const double radius = detail::to_double(row[cr]);
      groups[key].first.emplace_back(radius, detail::to_double(row[cs]));
      groups[key].second.emplace_back(radius, detail::to_double(row[ce]));
    }
    std::vector<SlopePoint> fits;
    std::vector<std::size_t> counts;
    for (const auto& key : keys) {
      const auto& [s, e] = groups[key];
      SlopePoint sp;
      sp.params.dim = std::get<0>(key);
      sp.params.mass = std::get<1>(key);
      sp.params.sites = std::get<2>(key);
      const double ex = exponent.value_or(sp.params.dim - 1.0);
      sp.fit_S = fit_area_law(s, ex);
      sp.fit_E1 = fit_area_law(e, ex);
      sp.ratio = sp.fit_S.slope / sp.fit_E1.slope;
      fits.push_back(sp);
      counts.push_back(s.size());
    }
    return report_fits(c, fits, counts);
  }

  int cmd_fit_run(const CLI::App& app, RunConfig& c) {
    forbid(app, c, {"--kmax"});
    const auto ec = entanglement_config(c);
    const SweepResult sw = run_sweep(app, c, ec);
    auto fits = slope_scan(sw);
    std::vector<std::size_t> counts;
    const std::size_t per = sw.points.size() / std::max<std::size_t>(1, fits.size());
    const auto exponent = fixed_exponent(c);
    for (auto& f : fits) {
      counts.push_back(per);
      if (exponent) {
        std::vector<std::pair<double, double>> s, e;
        for (const auto& p : sw.points)
          if (sw.axis == SweepAxis::Radius || p.axis_value == f.axis_value) {
            s.emplace_back(p.result.partition.radius(c.params.spacing), p.result.S);
            e.emplace_back(p.result.partition.radius(c.params.spacing), p.result.E1);
          }
        f.fit_S = fit_area_law(s, *exponent);
        f.fit_E1 = fit_area_law(e, *exponent);
        f.ratio = f.fit_S.slope / f.fit_E1.slope;
      }
    }
    return report_fits(c, fits, counts);
  }

  int cmd_rg(const CLI::App& app, RunConfig& c) {
    forbid(app, c, {"--from", "--axis", "--exponent"});
    const auto ec = entanglement_config(c);
    const auto ms = masses(c);
    if (ms.size() < 2) throw UsageError("rg needs at least two masses (--values or --mass-squared)");
    const Partition part{c.trace.value_or(c.params.sites / 2), detail::parse_side(c.side)};
    RunConfig window = c;
    window.trace.reset();
    const auto fit_parts = partitions(app, window, true);
    const RgReport rep = rg_report(c.params, ms, part, fit_parts, ec, c.k_max);
    json j;
    j["params"] = params_json(c.params);
    json slopes = json::array();
    for (const auto& s : rep.slopes) slopes.push_back(slope_json(s));
    j["slopes"] = std::move(slopes);
    j["slopes_decreasing"] = rep.slopes_decreasing;
    j["modewise_monotone"] = rep.modewise_monotone;
    j["worst_modewise_excess"] = jnum(rep.worst_modewise_excess);
    j["modes_compared"] = rep.modes_compared;
    json maj = json::array();
    for (const auto& p : rep.majorization) maj.push_back(majorization_json(p));
    j["majorization"] = std::move(maj);
    j["majorization_holds"] = rep.majorization_holds;
    j["majorization_certified"] = rep.majorization_certified;
    j["passed"] = rep.passed();
    std::string csv = "mu,k_S,k_E,ratio\n";
    for (const auto& s : rep.slopes)
      csv += num(s.axis_value) + "," + num(s.fit_S.slope) + "," + num(s.fit_E1.slope) + "," + num(s.ratio) + "\n";
    emit(c, emit_mode(c, "json"), csv, dump(j));
    summary(c, std::string("rg slopes_decreasing=") + (rep.slopes_decreasing ? "true" : "false") +
                   " modewise=" + (rep.modewise_monotone ? "true" : "false") +
                   " majorization=" + (rep.majorization_holds ? "true" : "false") +
                   " certified=" + (rep.majorization_certified ? "true" : "false"));
    return rep.passed() ? kOk : kCheckFailed;
  }

  int cmd_majorization(const CLI::App& app, RunConfig& c) {
    forbid(app, c, {"--from", "--axis", "--values", "--mass-squared", "--exponent"});
    const auto ec = entanglement_config(c);
    auto parts = partitions(app, c, false);
    if (parts.size() < 2) throw UsageError("majorization needs at least two partitions (--traces or --trace-range)");
    std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.traced_sites < b.traced_sites; });
    const auto rep = majorization_report(c.params, parts, c.k_max, ec);
    json j;
    j["params"] = params_json(c.params);
    j["k_max"] = c.k_max;
    json pairs = json::array();
    std::string csv = "n,n_prime,holds,certified,min_relative_margin,deficit\n";
    for (const auto& p : rep.pairs) {
      pairs.push_back(majorization_json(p));
      csv += num(p.lo) + "," + num(p.hi) + "," + (p.report.holds ? "true" : "false") + "," +
             (p.report.certified ? "true" : "false") + "," + num(p.report.min_relative_margin) + "," +
             num(p.report.deficit) + "\n";
    }
    j["pairs"] = std::move(pairs);
    j["holds"] = rep.holds;
    j["certified"] = rep.certified;
    emit(c, emit_mode(c, "json"), csv, dump(j));
    summary(c, std::string("majorization holds=") + (rep.holds ? "true" : "false") +
                   " certified=" + (rep.certified ? "true" : "false") +
                   " worst_relative_margin=" + num(rep.worst_relative_margin));
    return rep.holds ? kOk : kCheckFailed;
  }

  int cmd_selftest() {
    bool ok = true;
    for (const auto& r : run_selftest()) {
      out_ << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
      ok = ok && r.passed;
    }
    return ok ? kOk : kCheckFailed;
  }

  std::ostream& out_;
  std::ostream& err_;
  std::unique_ptr<DiskCache> cache_;
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  App app(out, err);
  return app.run(argc, argv);
}

}  // namespace geoent::cli
