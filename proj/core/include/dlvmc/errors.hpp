#pragma once

#include <stdexcept>
#include <string>

namespace dlvmc {

/// Malformed input files or config values.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid or inconsistent configuration detected before a run starts.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Requested basis/integral feature outside the supported s/p minimal sets.
class UnsupportedBasisError : public std::runtime_error {
 public:
  explicit UnsupportedBasisError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure (singular overlap, non-converged prerequisites, NaNs).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Electron configuration rejected (particle coincidence, nodal-set evaluation).
class RejectedConfigurationError : public std::runtime_error {
 public:
  explicit RejectedConfigurationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dlvmc
