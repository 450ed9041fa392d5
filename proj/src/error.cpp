#include "deconv/error.hpp"

namespace deconv {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingKappa: return "MissingKappa";
    case ErrorCode::DivergentSolve: return "DivergentSolve";
    case ErrorCode::OutOfHorizon: return "OutOfHorizon";
    case ErrorCode::ZeroDensity: return "ZeroDensity";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::PerturbationInfeasible: return "PerturbationInfeasible";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace deconv
