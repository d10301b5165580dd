#pragma once

#include <atomic>
#include <cstddef>
#include <iostream>
#include <stdexcept>
#include <string>

namespace sav {

// Precondition or shape contract broken by the caller.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf produced somewhere in a numerical pipeline.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file on disk (bad magic, CRC mismatch, truncation).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or unknown configuration key/value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) {
    throw ContractError(what);
  }
}

namespace detail {
inline std::atomic<std::size_t>& warning_counter() {
  static std::atomic<std::size_t> count{0};
  return count;
}
inline std::atomic<bool>& warnings_quiet() {
  static std::atomic<bool> quiet{false};
  return quiet;
}
}  // namespace detail

// Non-fatal numerical conventions (zero-norm cosine, clipped export) are
// flagged here instead of thrown.
inline void warn(const std::string& msg) {
  detail::warning_counter().fetch_add(1, std::memory_order_relaxed);
  if (!detail::warnings_quiet().load(std::memory_order_relaxed)) {
    std::cerr << "[sav warning] " << msg << '\n';
  }
}

inline std::size_t warning_count() { return detail::warning_counter().load(); }
inline void set_warnings_quiet(bool quiet) { detail::warnings_quiet().store(quiet); }

}  // namespace sav
