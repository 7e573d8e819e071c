#pragma once

#include <stdexcept>
#include <string>

namespace polylab {

enum class ErrorCode {
  InvalidArgument,
  OutsideHalfPlane,
  EmptySet,
  BrokenChain,
  DuplicateEdge,
  SwRuleViolation,
  DivergentTail,
  DecayViolation,
  BudgetExceeded,
  InsufficientRange,
  NoConvergence,
  CapTooSmall,
  WindowOverflow,
  ConfigError,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ContourError : public Error {
 public:
  ContourError(ErrorCode code, const std::string& what, std::size_t index)
      : Error(code, what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(ErrorCode::ConfigError, path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace polylab
