#pragma once

#include <stdexcept>
#include <string>

namespace embedff {

enum class ErrorCode {
  InvalidArgument,
  NonRationalAngle,
  SelfIntersecting,
  DegenerateEdge,
  DomainError,
  OverdeterminedConstraints,
  CoincidentNodesWithoutDerivative,
  EmptyMesh,
  SingularSystem,
  PoleAtTheta,
  DoublePoleInSimpleBranch,
  PoleOnContour,
  NoConvergence,
  ZeroColumnEncountered,
  SingularSubmatrix,
  ConfigError,
  IOError,
};

const char* to_string(ErrorCode code);

/// Numerical failures (singular systems, non-converged iterations) as opposed
/// to bad input.
bool is_numerical_failure(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace embedff
