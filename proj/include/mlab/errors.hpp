#pragma once

#include <stdexcept>
#include <string>

namespace mlab {

// Two failure classes, mapped to process exit codes by the CLI:
// bad inputs / violated preconditions -> 1, numeric or budget failures -> 2.
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonRegular : PreconditionError {
  using PreconditionError::PreconditionError;
};
struct Disconnected : PreconditionError {
  using PreconditionError::PreconditionError;
};
struct LoopEdge : PreconditionError {
  using PreconditionError::PreconditionError;
};
struct UnknownFamily : PreconditionError {
  using PreconditionError::PreconditionError;
};
struct DimensionMismatch : PreconditionError {
  using PreconditionError::PreconditionError;
};
struct InsufficientTraces : PreconditionError {
  using PreconditionError::PreconditionError;
};
struct OutsideDomain : PreconditionError {
  using PreconditionError::PreconditionError;
};
struct PreconditionViolation : PreconditionError {
  using PreconditionError::PreconditionError;
};
struct UnknownCommand : PreconditionError {
  using PreconditionError::PreconditionError;
};

struct RejectionBudgetExceeded : NumericError {
  using NumericError::NumericError;
};
struct EigensolverFailure : NumericError {
  using NumericError::NumericError;
};
struct SolveFailure : NumericError {
  using NumericError::NumericError;
};
struct QuadratureNonconvergence : NumericError {
  using NumericError::NumericError;
};

}  // namespace mlab
