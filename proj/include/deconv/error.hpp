#pragma once

#include <stdexcept>
#include <string>

namespace deconv {

enum class ErrorCode {
  InvalidArgument,
  MissingKappa,
  DivergentSolve,
  OutOfHorizon,
  ZeroDensity,
  NotConverged,
  PerturbationInfeasible,
  QuadratureFailure,
  Parse,
  Io,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (tests, the CLI exit-status mapping) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace deconv
