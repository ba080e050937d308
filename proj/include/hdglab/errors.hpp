#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hdglab {

enum class ErrorCode {
  invalid_parameter,
  unresolved_interface,
  unsupported_degree,
  singular_matrix,
  iterative_failure,
  not_spd,
  degenerate_element,
  projection_failure,
  postprocess_failure,
  inconsistent_manufactured_data,
  invalid_config,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// iterative-failure carries the residual actually achieved so callers can report it.
class IterativeFailure : public Error {
public:
  IterativeFailure(const std::string& message, double achieved_residual, int iterations)
      : Error(ErrorCode::iterative_failure, message),
        achieved_residual_(achieved_residual),
        iterations_(iterations) {}

  double achieved_residual() const noexcept { return achieved_residual_; }
  int iterations() const noexcept { return iterations_; }

private:
  double achieved_residual_;
  int iterations_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::unresolved_interface: return "unresolved-interface";
    case ErrorCode::unsupported_degree: return "unsupported-degree";
    case ErrorCode::singular_matrix: return "singular-matrix";
    case ErrorCode::iterative_failure: return "iterative-failure";
    case ErrorCode::not_spd: return "not-SPD";
    case ErrorCode::degenerate_element: return "degenerate-element";
    case ErrorCode::projection_failure: return "projection-failure";
    case ErrorCode::postprocess_failure: return "postprocess-failure";
    case ErrorCode::inconsistent_manufactured_data: return "inconsistent-manufactured-data";
    case ErrorCode::invalid_config: return "invalid-config";
  }
  return "unknown-error";
}

}  // namespace hdglab
