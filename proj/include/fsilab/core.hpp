#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace fsilab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Upper bound on inner iterations per solver call. Unbounded serializes as "inf".
class Cap {
 public:
  constexpr Cap() = default;  // unbounded
  constexpr explicit Cap(int limit) : limit_(limit) {}

  static constexpr Cap unbounded() { return Cap{}; }

  constexpr bool bounded() const { return limit_.has_value(); }
  /// Largest permitted count; INT_MAX-like sentinel when unbounded.
  int limit() const;

  std::string to_string() const;
  static Cap parse(const std::string& text);

  friend constexpr bool operator==(const Cap&, const Cap&) = default;

 private:
  std::optional<int> limit_;
};

enum class FieldRole { Displacement, Traction };

/// Dense real vector on the interface degrees of freedom.
///
/// Displacements are in meters, tractions in pascals. The constructor rejects
/// empty fields and non-finite entries, so every live object satisfies both.
class InterfaceField {
 public:
  InterfaceField(Vector values, FieldRole role);

  static InterfaceField zeros(Eigen::Index n, FieldRole role);

  const Vector& values() const { return values_; }
  FieldRole role() const { return role_; }
  Eigen::Index size() const { return values_.size(); }

 private:
  Vector values_;
  FieldRole role_;
};

/// Outcome of one black-box solver call.
struct SolverCallReport {
  int inner_iters = 0;
  /// Residual norm per inner iteration, evaluated before that iteration's update.
  std::vector<double> residual_history;
  bool converged_on_first = false;
  /// Whether the call stopped on its tolerance rather than on the cap.
  bool converged = false;
  /// Last recorded residual norm.
  double final_residual = 0.0;
  double wall_time = 0.0;  // seconds
};

struct StepCounts {
  int step = 0;
  long coupling = 0;
  long flow = 0;
  long solid = 0;
};

/// Totals N^c, N^f, N^s plus their per-time-step breakdown.
class IterationCounters {
 public:
  void add_step(const StepCounts& counts);

  long coupling_total() const { return coupling_; }
  long flow_total() const { return flow_; }
  long solid_total() const { return solid_; }
  const std::vector<StepCounts>& per_step() const { return per_step_; }

 private:
  long coupling_ = 0;
  long flow_ = 0;
  long solid_ = 0;
  std::vector<StepCounts> per_step_;
};

enum class Acceleration { Constant, Aitken, IQNILS };

enum class CriterionMode { FirstResidual, FixedPointNorm };

struct Criterion {
  CriterionMode mode = CriterionMode::FirstResidual;
  double eps_c = 1e-10;
  /// FixedPointNorm only: compare ||R^k|| / ||d^k|| instead of ||R^k||.
  bool relative = false;
};

struct CouplingConfig {
  Cap n_max_f;
  Cap n_max_s;
  double eps_f = 1e-9;
  double eps_s = 1e-9;
  double eps_fil = 1e-12;
  int reuse_q = 0;
  double omega0 = 0.1;
  Acceleration accel = Acceleration::IQNILS;
  Criterion criterion;
  int max_coupling_iters_per_step = 200;
  int batch_size_f = 1;
  /// Abort a step once ||R^k|| exceeds this multiple of ||R^1||.
  double divergence_growth = 1e6;

  /// Throws InvalidInput when an invariant is broken.
  void validate() const;
};

/// Coupling-side norms accepted at the end of a time step.
struct StepDiagnostics {
  double fixed_point_norm = 0.0;      // ||R^k||
  double relative_norm = 0.0;         // ||R^k|| / ||d^k||, +inf when d^k == 0
  double iqn_increment_norm = 0.0;    // ||W alpha|| of the last update
};

struct Timings {
  double flow = 0.0;
  double solid = 0.0;
  double coupling = 0.0;
};

struct RunRecord {
  IterationCounters counters;
  bool converged = false;
  std::optional<int> failed_step;
  std::string failure;
  Timings timings;
  /// Accepted interface displacement, one entry per converged time step.
  std::vector<Vector> snapshots;
  std::vector<StepDiagnostics> diagnostics;
};

/// ||r||_2 / sqrt(n).
double residual_norm(const Vector& r, Eigen::Index n);

/// R = d_tilde - d.
Vector fixed_point_residual(const InterfaceField& d_tilde, const InterfaceField& d);

/// ||d - d_ref||_2 / sqrt(n_Gamma).
double deviation_from_reference(const InterfaceField& d, const InterfaceField& d_ref);
double deviation_from_reference(const Vector& d, const Vector& d_ref);

std::string to_string(Acceleration accel);
Acceleration parse_acceleration(const std::string& text);

}  // namespace fsilab
