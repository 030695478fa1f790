#ifndef GRNN_ERROR_HPP
#define GRNN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace grnn {

// Base of every error thrown by the library. `kind()` is a stable
// machine-parseable tag, message() a human-readable one-liner.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Tensor shape / axis mismatches. Messages name the offending axis.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error("shape", msg) {}
};

// Bad argument values (non-positive sigma, even kernel, ...).
class ValueError : public Error {
 public:
  explicit ValueError(const std::string& msg) : Error("value", msg) {}
};

// File system / PNG decode problems.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

// Weight archive parsing (bad magic, version, offsets).
class ArchiveError : public Error {
 public:
  explicit ArchiveError(const std::string& msg) : Error("archive", msg) {}
};

// Run-config file problems (unknown keys, bad values).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

// Numerical failures at runtime (non-finite activations/loss).
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error("numeric", msg) {}
};

}  // namespace grnn

#endif  // GRNN_ERROR_HPP
