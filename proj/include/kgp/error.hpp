#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgp {

// Malformed input file. Carries the 1-based line number when known.
class LoadError : public std::runtime_error {
 public:
  LoadError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit LoadError(const std::string& what) : std::runtime_error(what), line_(0) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a structural invariant (ids out of range,
// overlapping splits, unknown nodes).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent shapes or out-of-domain hyperparameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf reached a gradient or a loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API called in the wrong state.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace kgp
