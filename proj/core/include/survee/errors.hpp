#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace survee {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input file / column-mapping problems (missing column, unreadable file).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Data that parsed but violates a contract (non-binary event, time <= 0, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Dimension mismatches and other caller mistakes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A linear system or Jacobian was singular.  `indices` names the offending
/// parameter coordinates when they could be identified.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, std::vector<int> indices = {})
      : Error(what), indices(std::move(indices)) {}
  std::vector<int> indices;
};

/// Root finding or IRLS did not converge.  Carries the final residual norm
/// and iteration count so callers can report diagnostics.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int iterations = 0,
                   double final_norm = 0.0)
      : Error(what), iterations(iterations), final_norm(final_norm) {}
  int iterations;
  double final_norm;
};

}  // namespace survee
