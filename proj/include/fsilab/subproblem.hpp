#pragma once

#include "fsilab/core.hpp"

#include <functional>
#include <variant>

namespace fsilab {

/// System matrix of a subproblem: either dense or diagonal (stored as its diagonal).
class SystemMatrix {
 public:
  SystemMatrix(Matrix dense) : storage_(std::move(dense)) {}  // NOLINT(implicit)
  static SystemMatrix diagonal(Vector diag) { return SystemMatrix(Diagonal{std::move(diag)}); }

  bool is_diagonal() const { return std::holds_alternative<Diagonal>(storage_); }
  Eigen::Index rows() const;

  Vector multiply(const Vector& x) const;
  Vector diagonal_entries() const;
  Matrix to_dense() const;

  /// Solves this * x = rhs. Throws LinearSolveError tagged with `iteration`
  /// when the matrix is singular to working precision.
  Vector solve(const Vector& rhs, int iteration, const char* what) const;

 private:
  struct Diagonal {
    Vector d;
  };
  explicit SystemMatrix(Diagonal d) : storage_(std::move(d)) {}

  std::variant<Matrix, Diagonal> storage_;
};

enum class Preconditioner { DiagonalOfA, FullA };

/// A(u) u = b for one solver call. The right-hand side is fixed for the call;
/// only the matrix follows the iterate.
struct NonlinearSystem {
  Eigen::Index dim = 0;
  std::function<SystemMatrix(const Vector&)> matrix;
  /// K(u) = A(u) + (dA/du) u; required by the Newton driver.
  std::function<SystemMatrix(const Vector&)> tangent;
  Vector rhs;
  Preconditioner preconditioner = Preconditioner::DiagonalOfA;
};

struct SolverCallInput {
  Vector u0;
  double eps = 1e-9;
  Cap n_max;
  int batch_size = 1;
};

/// Observer hook: (inner iteration i, iterate u^{i-1}, recorded residual norm, rhs b).
using IterationObserver =
    std::function<void(int, const Vector&, double, const Vector&)>;

/// Uncapped calls that have not met their tolerance after this many
/// iterations raise DivergenceError instead of looping on round-off.
inline constexpr int kUncappedSafetyLimit = 5000;

struct DriveResult {
  Vector u;
  SolverCallReport report;
};

/// Newton iterations K(u^{i-1}) du = b - A(u^{i-1}) u^{i-1}.
///
/// The residual is recorded before each update and the update is always
/// applied, so a call that converges still performs one more update. At
/// least one and at most n_max iterations run.
DriveResult newton_drive(const NonlinearSystem& system, const SolverCallInput& input,
                         const IterationObserver& observer = {});

/// Picard iterations M(u^{i-1}) (u^i - u^{i-1}) = b - A(u^{i-1}) u^{i-1}.
///
/// Same recording and stop-after-update rules as newton_drive. With a batch
/// size B > 1 the tolerance is only checked after every B-th iteration.
DriveResult picard_drive(const NonlinearSystem& system, const SolverCallInput& input,
                         const IterationObserver& observer = {});

enum class SolverId { Flow, Solid };
enum class DriverKind { Newton, Picard };

std::string to_string(SolverId id);
std::string to_string(DriverKind kind);
DriverKind parse_driver(const std::string& text);

/// A subproblem as seen by the coupling loop: it turns coupling input into a
/// nonlinear system and extracts interface output from a solution.
class Subproblem {
 public:
  virtual ~Subproblem() = default;

  virtual SolverId id() const = 0;
  virtual DriverKind driver() const = 0;
  virtual NonlinearSystem system(const InterfaceField& coupling_data) const = 0;
  virtual InterfaceField extract_output(const Vector& u) const = 0;
};

struct SolverCallResult {
  Vector u;
  InterfaceField output;
  SolverCallReport report;
};

/// Builds the system for `coupling_data`, runs the subproblem's driver and
/// extracts the interface output. Driver errors are rethrown prefixed with
/// the solver name.
SolverCallResult call_solver(const Subproblem& subproblem, const InterfaceField& coupling_data,
                             const SolverCallInput& input,
                             const IterationObserver& observer = {});

}  // namespace fsilab
