#pragma once

// On-disk cache of exact xi spectra, one binary record per (lattice, l, cut).
//
// Record layout (little-endian as written by this machine):
//   8  magic "GEOENTXI"
//   4  format version
//   4  code version
//   8  key hash (FNV-1a 64 over the key fields below)
//   key fields: dim f64, mass f64, spacing f64, sites i32, n i32, side i32,
//               l i32, boundary i32
//   8  created_at (unix seconds)
//   8  count, then count f64
//   8  checksum (FNV-1a 64 over everything before it)

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "geoent/entanglement.hpp"
#include "geoent/errors.hpp"
#include "geoent/reduction.hpp"

namespace geoent::cli {

inline constexpr std::uint32_t kCacheFormatVersion = 1;
inline constexpr std::uint32_t kCodeVersion = 1;

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}
  template <class T>
  bool get(T& v) {
    if (pos_ + sizeof(T) > b_.size()) return false;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return true;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

struct CacheKey {
  double dim = 0.0, mass = 0.0, spacing = 1.0;
  std::int32_t sites = 0, traced_sites = 0, side = 0, l = 0, boundary = 0;
  std::uint32_t code_version = kCodeVersion;

  static CacheKey of(const ModelParams& p, int l, const Partition& part, std::uint32_t code_version) {
    return {p.dim,
            p.mass,
            p.spacing,
            p.sites,
            part.traced_sites,
            static_cast<std::int32_t>(part.traced),
            l,
            static_cast<std::int32_t>(p.boundary),
            code_version};
  }

  void write(detail::Writer& w) const {
    w.put(dim);
    w.put(mass);
    w.put(spacing);
    w.put(sites);
    w.put(traced_sites);
    w.put(side);
    w.put(l);
    w.put(boundary);
  }

  std::uint64_t hash() const {
    detail::Writer w;
    w.put(code_version);
    write(w);
    return detail::fnv1a(w.bytes().data(), w.bytes().size());
  }

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

struct ModeCacheRecord {
  CacheKey key;
  std::vector<double> xi;
  std::int64_t created_at = 0;
};

inline std::string encode_record(const ModeCacheRecord& r) {
  detail::Writer w;
  w.put(std::array<char, 8>{'G', 'E', 'O', 'E', 'N', 'T', 'X', 'I'});
  w.put(kCacheFormatVersion);
  w.put(r.key.code_version);
  w.put(r.key.hash());
  r.key.write(w);
  w.put(r.created_at);
  w.put(static_cast<std::uint64_t>(r.xi.size()));
  for (double x : r.xi) w.put(x);
  std::string bytes = w.bytes();
  const std::uint64_t sum = detail::fnv1a(bytes.data(), bytes.size());
  bytes.append(reinterpret_cast<const char*>(&sum), sizeof sum);
  return bytes;
}

enum class DecodeStatus { Ok, BadMagic, BadVersion, BadChecksum, KeyMismatch, Truncated };

inline DecodeStatus decode_record(std::string_view bytes, const CacheKey& expect, ModeCacheRecord& out) {
  if (bytes.size() < 16) return DecodeStatus::Truncated;
  if (std::memcmp(bytes.data(), "GEOENTXI", 8) != 0) return DecodeStatus::BadMagic;
  std::uint64_t stored_sum = 0;
  std::memcpy(&stored_sum, bytes.data() + bytes.size() - 8, 8);
  if (detail::fnv1a(bytes.data(), bytes.size() - 8) != stored_sum) return DecodeStatus::BadChecksum;
  detail::Reader rd(bytes.substr(8, bytes.size() - 16));
  std::uint32_t fmt = 0;
  std::uint64_t hash = 0, count = 0;
  CacheKey k;
  if (!rd.get(fmt)) return DecodeStatus::Truncated;
  if (fmt != kCacheFormatVersion) return DecodeStatus::BadVersion;
  if (!(rd.get(k.code_version) && rd.get(hash) && rd.get(k.dim) && rd.get(k.mass) && rd.get(k.spacing) &&
        rd.get(k.sites) && rd.get(k.traced_sites) && rd.get(k.side) && rd.get(k.l) && rd.get(k.boundary) &&
        rd.get(out.created_at) && rd.get(count)))
    return DecodeStatus::Truncated;
  if (!(k == expect) || hash != expect.hash()) return DecodeStatus::KeyMismatch;
  if (count > (bytes.size() / 8)) return DecodeStatus::Truncated;
  out.key = k;
  out.xi.resize(count);
  for (auto& x : out.xi)
    if (!rd.get(x)) return DecodeStatus::Truncated;
  return DecodeStatus::Ok;
}

/// Directory of records. Writes go to a unique temporary file and are renamed
/// into place, so concurrent processes sharing the directory never observe a
/// partial record.
class DiskCache {
 public:
  using Warn = std::function<void(const std::string&)>;

  explicit DiskCache(std::filesystem::path dir, std::uint32_t code_version = kCodeVersion, Warn warn = {})
      : dir_(std::move(dir)), code_version_(code_version), warn_(std::move(warn)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_))
      throw IoError("cannot create cache directory '" + dir_.string() + "': " + ec.message());
  }

  std::filesystem::path path_for(const CacheKey& k) const {
    char name[40];
    std::snprintf(name, sizeof name, "%016llx.xi", static_cast<unsigned long long>(k.hash()));
    return dir_ / name;
  }

  std::optional<std::vector<double>> get(const ModelParams& p, int l, const Partition& part) {
    const CacheKey key = CacheKey::of(p, l, part, code_version_);
    const auto path = path_for(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    ModeCacheRecord rec;
    const auto status = decode_record(ss.str(), key, rec);
    if (status == DecodeStatus::Ok) {
      ++hits_;
      return std::move(rec.xi);
    }
    if (status != DecodeStatus::KeyMismatch && warn_)
      warn_("discarding corrupt cache record " + path.string() + " (" + describe(status) + "); recomputing");
    return std::nullopt;
  }

  void put(const ModelParams& p, int l, const Partition& part, const std::vector<double>& xi) {
    ModeCacheRecord rec;
    rec.key = CacheKey::of(p, l, part, code_version_);
    rec.xi = xi;
    rec.created_at =
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
    const std::string bytes = encode_record(rec);
    const auto final_path = path_for(rec.key);
    const auto tmp = final_path.string() + ".tmp" + unique_suffix();
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write cache record " + tmp);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw IoError("short write to cache record " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, final_path, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      throw IoError("cannot move cache record into place: " + final_path.string());
    }
  }

  /// Mode provider backed by this cache: hits are read, misses computed together
  /// (one matrix square root per l) and stored.
  ModeProvider provider() {
    return [this](const ModelParams& p, int l, std::span<const Partition> parts) {
      std::vector<XiSpectrum> out(parts.size());
      std::vector<Partition> missing;
      std::vector<std::size_t> where;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (auto xi = get(p, l, parts[i])) out[i] = XiSpectrum{std::move(*xi), l, parts[i], p};
        else {
          missing.push_back(parts[i]);
          where.push_back(i);
        }
      }
      if (!missing.empty()) {
        auto fresh = exact_modes(p, l, missing);
        for (std::size_t j = 0; j < fresh.size(); ++j) {
          put(p, l, missing[j], fresh[j].xi);
          out[where[j]] = std::move(fresh[j]);
        }
      }
      return out;
    };
  }

  std::uint64_t hits() const { return hits_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  static std::string describe(DecodeStatus s) {
    switch (s) {
      case DecodeStatus::BadMagic: return "bad magic";
      case DecodeStatus::BadVersion: return "unknown format version";
      case DecodeStatus::BadChecksum: return "checksum mismatch";
      case DecodeStatus::Truncated: return "truncated";
      case DecodeStatus::KeyMismatch: return "key mismatch";
      case DecodeStatus::Ok: return "ok";
    }
    return "?";
  }

  static std::string unique_suffix() {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
  }

  std::filesystem::path dir_;
  std::uint32_t code_version_;
  Warn warn_;
  std::atomic<std::uint64_t> hits_{0};
};

}  // namespace geoent::cli
