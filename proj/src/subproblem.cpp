#include "fsilab/subproblem.hpp"

#include "fsilab/error.hpp"

#include <Eigen/LU>

#include <chrono>
#include <cmath>
#include <limits>

namespace fsilab {

Eigen::Index SystemMatrix::rows() const {
  return std::visit(
      [](const auto& m) -> Eigen::Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, Matrix>) {
          return m.rows();
        } else {
          return m.d.size();
        }
      },
      storage_);
}

Vector SystemMatrix::multiply(const Vector& x) const {
  if (const auto* dense = std::get_if<Matrix>(&storage_)) return *dense * x;
  return std::get<Diagonal>(storage_).d.cwiseProduct(x);
}

Vector SystemMatrix::diagonal_entries() const {
  if (const auto* dense = std::get_if<Matrix>(&storage_)) return dense->diagonal();
  return std::get<Diagonal>(storage_).d;
}

Matrix SystemMatrix::to_dense() const {
  if (const auto* dense = std::get_if<Matrix>(&storage_)) return *dense;
  return std::get<Diagonal>(storage_).d.asDiagonal();
}

Vector SystemMatrix::solve(const Vector& rhs, int iteration, const char* what) const {
  if (const auto* dense = std::get_if<Matrix>(&storage_)) {
    Eigen::PartialPivLU<Matrix> lu(*dense);
    // rcond is an estimate; exact zero pivots give 0 and NaN-free inputs give a finite value.
    const double rcond = lu.rcond();
    if (!(rcond > std::numeric_limits<double>::epsilon())) {
      throw LinearSolveError(std::string(what) + " is singular", iteration);
    }
    return lu.solve(rhs);
  }
  const Vector& d = std::get<Diagonal>(storage_).d;
  if ((d.array() == 0.0).any() || !d.allFinite()) {
    throw LinearSolveError(std::string(what) + " is singular", iteration);
  }
  return rhs.cwiseQuotient(d);
}

namespace {

enum class Update { Newton, Picard };

DriveResult drive(const NonlinearSystem& system, const SolverCallInput& input,
                  const IterationObserver& observer, Update kind) {
  const Eigen::Index n = system.dim;
  if (input.u0.size() != n || system.rhs.size() != n) {
    throw ContractViolation("solver input and system dimensions differ");
  }
  if (!input.u0.allFinite()) throw InvalidInput("initial iterate is not finite");
  if (input.batch_size < 1) throw InvalidInput("batch size must be >= 1");
  if (kind == Update::Newton && !system.tangent) {
    throw ContractViolation("Newton driver needs a tangent");
  }

  const Vector& b = system.rhs;
  const int cap = input.n_max.limit();
  const int batch = kind == Update::Picard ? input.batch_size : 1;

  DriveResult out{input.u0, {}};
  SolverCallReport& report = out.report;
  Vector& u = out.u;

  for (int i = 1; i <= cap; ++i) {
    const SystemMatrix a = system.matrix(u);
    const Vector r = b - a.multiply(u);
    if (!r.allFinite()) throw DivergenceError("residual is not finite", i);
    const double norm = residual_norm(r, n);
    report.residual_history.push_back(norm);
    if (observer) observer(i, u, norm, b);

    Vector step;
    if (kind == Update::Newton) {
      step = system.tangent(u).solve(r, i, "tangent matrix");
    } else if (system.preconditioner == Preconditioner::FullA) {
      step = a.solve(r, i, "preconditioner");
    } else {
      step = SystemMatrix::diagonal(a.diagonal_entries()).solve(r, i, "preconditioner");
    }
    u += step;
    if (!u.allFinite()) throw DivergenceError("iterate is not finite", i);
    report.inner_iters = i;

    if (i % batch == 0 && norm < input.eps) {
      report.converged = true;
      break;
    }
    if (!input.n_max.bounded() && i >= kUncappedSafetyLimit) {
      throw DivergenceError("tolerance not reached by an uncapped call", i);
    }
  }

  report.final_residual = report.residual_history.back();
  report.converged_on_first = report.residual_history.front() < input.eps;
  return out;
}

}  // namespace

DriveResult newton_drive(const NonlinearSystem& system, const SolverCallInput& input,
                         const IterationObserver& observer) {
  return drive(system, input, observer, Update::Newton);
}

DriveResult picard_drive(const NonlinearSystem& system, const SolverCallInput& input,
                         const IterationObserver& observer) {
  return drive(system, input, observer, Update::Picard);
}

std::string to_string(SolverId id) { return id == SolverId::Flow ? "flow" : "solid"; }

std::string to_string(DriverKind kind) { return kind == DriverKind::Newton ? "newton" : "picard"; }

DriverKind parse_driver(const std::string& text) {
  if (text == "newton") return DriverKind::Newton;
  if (text == "picard") return DriverKind::Picard;
  throw InvalidInput("unknown driver '" + text + "'");
}

SolverCallResult call_solver(const Subproblem& subproblem, const InterfaceField& coupling_data,
                             const SolverCallInput& input, const IterationObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  const std::string name = to_string(subproblem.id()) + " solver: ";
  try {
    const NonlinearSystem system = subproblem.system(coupling_data);
    DriveResult result = subproblem.driver() == DriverKind::Newton
                             ? newton_drive(system, input, observer)
                             : picard_drive(system, input, observer);
    InterfaceField output = subproblem.extract_output(result.u);
    result.report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(result.u), std::move(output), std::move(result.report)};
  } catch (const LinearSolveError& e) {
    throw LinearSolveError(name + e.detail(), e.iteration());
  } catch (const DivergenceError& e) {
    throw DivergenceError(name + e.detail(), e.iteration());
  } catch (const GeometryError& e) {
    throw GeometryError(name + e.what());
  }
}

}  // namespace fsilab
