#pragma once

#include <stdexcept>
#include <string>

namespace qpdec {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Incompatible matrix/vector dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Cholesky pivot was non-positive; `pivot` is the failing index.
class DefinitenessError : public Error {
 public:
  DefinitenessError(const std::string& what, int pivot) : Error(what), pivot(pivot) {}
  int pivot;
};

/// A pivot fell below the singularity threshold; `pivot` is the failing index.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, int pivot) : Error(what), pivot(pivot) {}
  int pivot;
};

/// Malformed input file; message names the offending key or position.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Structurally well-formed but invalid data (dimensions, non-finite entries, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its iteration cap; carries the best residual seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : Error(what), best_residual(best_residual) {}
  double best_residual;
};

/// A sensitivity was requested at a point whose KKT residual exceeds the allowed threshold.
class StalePointError : public Error {
 public:
  StalePointError(const std::string& what, double residual, double threshold)
      : Error(what), residual(residual), threshold(threshold) {}
  double residual;
  double threshold;
};

/// Backtracking exhausted its budget; carries the merit values of the rejected trials.
class LineSearchError : public Error {
 public:
  LineSearchError(const std::string& what, std::vector<double> trial_merits)
      : Error(what), trial_merits(std::move(trial_merits)) {}
  std::vector<double> trial_merits;
};

/// The constraint set admits no point (detected at setup or by a feasibility solve).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside a structured solve; message names the offending block.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace qpdec
