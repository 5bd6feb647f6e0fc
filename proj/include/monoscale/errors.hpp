#pragma once

#include <stdexcept>
#include <string>

namespace monoscale {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad feature space, out-of-range parameter, malformed file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An agent id, feature name, or feature value that does not exist.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Adding an agent whose id is already in the pool.
class ExpansionError : public Error {
 public:
  using Error::Error;
};

/// A memory that violates its own invariants (budget, duplicate ids, ranges).
class MemoryError : public Error {
 public:
  using Error::Error;
};

/// Every plan is forbidden at some context, so the policy has no support there.
class EmptySupport : public Error {
 public:
  explicit EmptySupport(std::string context)
      : Error("empty policy support at context {" + context + "}"), context_(std::move(context)) {}

  const std::string& context() const noexcept { return context_; }

 private:
  std::string context_;
};

/// A persisted document carries a schema version this build does not read.
class SchemaVersionError : public ConfigError {
 public:
  SchemaVersionError(int expected, int found)
      : ConfigError("schema version mismatch: expected " + std::to_string(expected) + ", found " +
                    std::to_string(found)),
        expected_(expected),
        found_(found) {}

  int expected() const noexcept { return expected_; }
  int found() const noexcept { return found_; }

 private:
  int expected_;
  int found_;
};

}  // namespace monoscale
