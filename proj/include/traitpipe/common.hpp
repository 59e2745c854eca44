#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace traitpipe {

/// A numeric-or-missing value. Missing is an explicit state, never 0.
using Cell = std::optional<double>;

inline bool is_missing(const Cell& c) { return !c.has_value(); }

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input data violates a documented value constraint (bad answer, bad code).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Input file or record does not match the documented schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Not enough observations to compute the requested statistic.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// A statistic is undefined for this input (constant vector, zero variance).
class UndefinedStatError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (empty grid, epochs < 1, bad scheme).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an API contract (feature name mismatch, version mismatch).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed; carries the stage name for diagnostics.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace traitpipe
