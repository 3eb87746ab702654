#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace repobs {

enum class ErrorKind {
  dimension,
  symmetry,
  definiteness,
  convergence,
  rank,
  margin,
  degenerate,
  unsupported,
  out_of_regime,
  size_limit,
  insufficient_data,
  config,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::symmetry: return "symmetry";
    case ErrorKind::definiteness: return "definiteness";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::rank: return "rank";
    case ErrorKind::margin: return "margin";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::out_of_regime: return "out-of-regime";
    case ErrorKind::size_limit: return "size-limit";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

/// Single exception type for the library; `kind()` tells callers which
/// precondition or numerical step failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace repobs
