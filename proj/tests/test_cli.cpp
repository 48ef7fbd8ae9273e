#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli/app.hpp"

using namespace geoent;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "geoent");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("geoent_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("entropy emits JSON with the summed quantities") {
  const auto r = run({"entropy", "--sites", "20", "--trace", "8", "--no-cache"});
  REQUIRE(r.code == 0);
  const auto j = cli::json::parse(r.out);
  CHECK(j["S"].get<double>() > 0.0);
  CHECK(j["E1"].get<double>() < j["S"].get<double>());
  CHECK(j["converged"].get<bool>());
  CHECK(r.err.find("entropy n=8") != std::string::npos);
}

TEST_CASE("usage and domain errors map to exit codes") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"entropy", "--sites", "20"}).code == cli::kUsage);
  CHECK(run({"entropy", "--sites", "20", "--trace", "5", "--bogus"}).code == cli::kUsage);
  CHECK(run({"entropy", "--sites", "20", "--trace", "5", "--emit", "xml", "--no-cache"}).code == cli::kUsage);
  CHECK(run({"entropy", "--sites", "20", "--trace", "25", "--no-cache"}).code == cli::kDomain);
  CHECK(run({"entropy", "--sites", "20", "--trace", "5", "--dim", "0.5", "--no-cache"}).code == cli::kDomain);
  CHECK(run({"entropy", "--sites", "20", "--trace", "5", "--dim", "5", "--no-cache"}).code == cli::kDivergence);
  CHECK(run({"entropy", "--sites", "20", "--trace", "5", "--boundary", "free-printed", "--no-cache"}).code ==
        cli::kNotPositiveDefinite);
  CHECK(run({"fit", "--from", "/nonexistent/sweep.csv"}).code == cli::kIo);
  CHECK(run({"rg", "--sites", "20", "--values", "1", "--no-cache"}).code == cli::kUsage);
  CHECK(run({"sweep", "--axis", "radius", "--values", "1,2", "--no-cache"}).code == cli::kUsage);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("sweep CSV, fit from CSV, and determinism") {
  const auto dir = scratch("sweep");
  const auto a = dir / "a.csv", b = dir / "b.csv";
  const std::vector<std::string> base{"sweep", "--axis", "radius", "--sites", "60", "--trace-range", "5:30", "--no-cache"};
  auto args = base;
  args.insert(args.end(), {"--out", a.string()});
  const auto r1 = run(args);
  REQUIRE(r1.code == 0);
  args = base;
  args.insert(args.end(), {"--out", b.string(), "--threads", "2"});
  REQUIRE(run(args).code == 0);
  const auto csv = slurp(a);
  CHECK(csv == slurp(b));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 27);
  CHECK(csv.rfind(cli::kSweepHeader, 0) == 0);

  const auto f = run({"fit", "--from", a.string()});
  REQUIRE(f.code == 0);
  CHECK(f.out.find("D=3 mu=0 N=60") != std::string::npos);
  CHECK(f.out.find("slope=0.2952") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("options can come from a config file and flags override it") {
  const auto dir = scratch("config");
  const auto cfg = dir / "run.ini";
  std::ofstream(cfg) << "# lattice\nsites = 20\ntrace = 8\nno-cache = true\ndim = 3\n";
  const auto a = run({"entropy", "--config", cfg.string()});
  REQUIRE(a.code == 0);
  const auto b = run({"entropy", "--config", cfg.string(), "--trace", "6"});
  REQUIRE(b.code == 0);
  CHECK(cli::json::parse(a.out)["n"].get<int>() == 8);
  CHECK(cli::json::parse(b.out)["n"].get<int>() == 6);
  fs::remove_all(dir);
}

TEST_CASE("disk cache: warm runs skip reductions, corruption recomputes") {
  const auto dir = scratch("cache");
  const std::vector<std::string> args{"entropy", "--sites", "20", "--trace", "7", "--cache", dir.string()};
  const auto before = reduction_counter().load();
  const auto cold = run(args);
  REQUIRE(cold.code == 0);
  const auto mid = reduction_counter().load();
  CHECK(mid > before);
  const auto warm = run(args);
  REQUIRE(warm.code == 0);
  CHECK(reduction_counter().load() == mid);
  CHECK(warm.out == cold.out);

  // flip a byte in one record
  fs::path victim;
  for (const auto& e : fs::directory_iterator(dir)) victim = e.path();
  REQUIRE(!victim.empty());
  {
    std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(60);
    char c = 0;
    f.read(&c, 1);
    f.seekp(60);
    c = static_cast<char>(c ^ 0x5a);
    f.write(&c, 1);
  }
  const auto healed = run(args);
  REQUIRE(healed.code == 0);
  CHECK(healed.err.find("warning: discarding corrupt cache record") != std::string::npos);
  CHECK(healed.out == cold.out);
  CHECK(reduction_counter().load() > mid);
  fs::remove_all(dir);
}

TEST_CASE("cache records are keyed by code version and traced side") {
  const auto dir = scratch("version");
  ModelParams p;
  p.sites = 10;
  cli::DiskCache v1(dir, 1), v2(dir, 2);
  v1.put(p, 3, Partition{4}, {0.1, 0.01});
  REQUIRE(v1.get(p, 3, Partition{4}));
  CHECK((*v1.get(p, 3, Partition{4}) == std::vector<double>{0.1, 0.01}));
  CHECK_FALSE(v2.get(p, 3, Partition{4}));
  CHECK_FALSE(v1.get(p, 3, Partition{4, TracedRegion::Outer}));
  CHECK_FALSE(v1.get(p, 4, Partition{4}));
  fs::remove_all(dir);
}

TEST_CASE("record round trip and corruption detection") {
  cli::ModeCacheRecord rec;
  rec.key = cli::CacheKey::of(ModelParams{}, 2, Partition{3}, cli::kCodeVersion);
  rec.xi = {0.5, 0.25};
  rec.created_at = 1234;
  auto bytes = cli::encode_record(rec);
  cli::ModeCacheRecord back;
  REQUIRE(cli::decode_record(bytes, rec.key, back) == cli::DecodeStatus::Ok);
  CHECK(back.xi == rec.xi);
  CHECK(back.created_at == 1234);
  bytes[bytes.size() / 2] ^= 1;
  CHECK(cli::decode_record(bytes, rec.key, back) == cli::DecodeStatus::BadChecksum);
  CHECK(cli::decode_record(bytes.substr(0, 10), rec.key, back) == cli::DecodeStatus::Truncated);
}

TEST_CASE("selftest passes") {
  const auto r = run({"selftest"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
}
