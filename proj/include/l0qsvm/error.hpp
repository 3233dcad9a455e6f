#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace l0qsvm {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidData,
  kInvalidLabel,
  kNumeric,
  kConvergence,
  kVersion,
  kParse,
  kConfig,
  kStratification,
  kSearchFailure,
  kDimension,
};

std::string_view to_string(ErrorKind kind);

/// Base class for every error thrown by the library. The kind decides the
/// process exit code in the command-line harness.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(ErrorKind::kConvergence, what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

/// Warning sink. Writes to stderr unless silenced.
void warn(std::string_view message);
void set_warnings_enabled(bool enabled);

}  // namespace l0qsvm
