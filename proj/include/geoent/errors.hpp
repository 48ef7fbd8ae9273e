#pragma once

#include <stdexcept>
#include <string>

namespace geoent {

/// Category used by the CLI to map failures onto exit codes.
enum class ErrorKind { Domain, NotPositiveDefinite, Divergence, Convergence, Io, Usage };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorKind::Domain, w) {}
};

struct NotPositiveDefiniteError : Error {
  explicit NotPositiveDefiniteError(const std::string& w) : Error(ErrorKind::NotPositiveDefinite, w) {}
};

struct DivergenceError : Error {
  explicit DivergenceError(const std::string& w) : Error(ErrorKind::Divergence, w) {}
};

struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& w) : Error(ErrorKind::Convergence, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorKind::Usage, w) {}
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::NotPositiveDefinite: return "not positive definite";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Convergence: return "convergence failure";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Usage: return "usage error";
  }
  return "error";
}

}  // namespace geoent
