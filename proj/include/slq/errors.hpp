#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace slq {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input problems.
class ParseError : public Error {
  using Error::Error;
};
class DimensionError : public Error {
  using Error::Error;
};
class NonSymmetricWeight : public Error {
  using Error::Error;
};
class UnsupportedStochasticData : public Error {
  using Error::Error;
};

// Numerical problems.
class NonFiniteValue : public Error {
  using Error::Error;
};
class StepBudgetExceeded : public Error {
  using Error::Error;
};
class SingularFundamentalMatrix : public Error {
  using Error::Error;
};
class PreconditionError : public Error {
  using Error::Error;
};
/// The D = 0 Riccati route needs D = 0 and R uniformly positive definite.
class PreconditionD0 : public PreconditionError {
  using PreconditionError::PreconditionError;
};
/// A certificate weight Delta(s) is not uniformly positive definite.
class PreconditionDelta : public PreconditionError {
  using PreconditionError::PreconditionError;
};

/// Failures of the Riccati solvers. These carry mathematical meaning (a
/// non-convex cost, a missing strongly regular solution) and callers often
/// turn them into verdicts rather than propagate them.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, int iteration)
      : Error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Some Newton iterate has R + D'P_i D below the uniform positivity floor.
class NotUniformlyConvex : public SolverError {
  using SolverError::SolverError;
};
class NoConvergence : public SolverError {
  using SolverError::SolverError;
};
class MonotonicityViolation : public SolverError {
  using SolverError::SolverError;
};
/// The shifted problem R -> R + eps I still has no strongly regular solution.
class NotConvexAtEpsilon : public SolverError {
 public:
  NotConvexAtEpsilon(const std::string& what, int iteration, double eps)
      : SolverError(what, iteration), epsilon_(eps) {}
  double epsilon() const { return epsilon_; }

 private:
  double epsilon_;
};

}  // namespace slq
