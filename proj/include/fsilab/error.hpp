#pragma once

#include <stdexcept>
#include <string>

namespace fsilab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed numeric input (empty vectors, NaN/Inf entries, bad lengths).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition between two otherwise valid objects.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A linear solve inside a subproblem driver hit a singular matrix.
class LinearSolveError : public Error {
 public:
  LinearSolveError(const std::string& detail, int iteration)
      : Error(detail + " (inner iteration " + std::to_string(iteration) + ")"),
        detail_(detail),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  int iteration_;
};

/// An inner iterate became non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& detail, int iteration)
      : Error(detail + " (inner iteration " + std::to_string(iteration) + ")"),
        detail_(detail),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  int iteration_;
};

/// Geometry of a testbed became invalid (e.g. non-positive tube area).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// The coupling loop of a time step did not converge.
class CouplingDiverged : public Error {
 public:
  CouplingDiverged(const std::string& what, int step)
      : Error(what + " (time step " + std::to_string(step) + ")"), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Least-squares design without full column rank.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace fsilab
