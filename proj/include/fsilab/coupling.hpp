#pragma once

#include "fsilab/error.hpp"
#include "fsilab/models.hpp"

#include <deque>
#include <vector>

namespace fsilab {

/// Input/output difference columns for IQN-ILS, newest first.
class IqnHistory {
 public:
  explicit IqnHistory(int reuse_q = 0);

  /// Drops columns recorded before time step `step - q`.
  void begin_step(int step);
  void push(Vector v, Vector w, int step);
  void clear();

  int reuse_q() const { return q_; }
  std::size_t columns() const { return v_.size(); }
  bool empty() const { return v_.empty(); }
  Matrix v_matrix() const;
  Matrix w_matrix() const;
  const std::deque<int>& ages() const { return ages_; }

 private:
  int q_;
  std::deque<Vector> v_, w_;
  std::deque<int> ages_;
};

struct AitkenResult {
  double omega = 0.0;
  bool stagnated = false;
};

inline constexpr double kOmegaMin = 0.01;
inline constexpr double kOmegaMax = 2.0;

/// Secant update -w * <R_{k-1}, R_k - R_{k-1}> / ||R_k - R_{k-1}||^2, clamped to [0.01, 2].
/// A zero denominator keeps `omega_prev` and sets `stagnated`.
AitkenResult aitken_omega(const Vector& r_k, const Vector& r_km1, double omega_prev);

/// Householder QR over the columns of `v` in order (column 0 is the newest).
/// A column is dropped when its new diagonal entry falls below eps_fil * ||v_j||.
std::vector<int> qr_filter(const Matrix& v, double eps_fil);

struct IqnUpdate {
  Vector d_next;
  double increment_norm = 0.0;  // ||W alpha||_2
  std::vector<int> retained;
  /// True when no usable column was left and constant relaxation was applied.
  bool fallback = false;
};

/// d_next = d_tilde + W alpha with alpha = argmin ||V alpha + R_k||. Falls back to
/// d_tilde - (1 - omega_fallback) R_k when the filtered history is empty.
IqnUpdate iqn_ils_update(const IqnHistory& hist, const Vector& r_k, const Vector& d_tilde,
                         double eps_fil, double omega_fallback);

/// FirstResidual: both calls converged on their first inner iteration.
/// FixedPointNorm: ||R_k||_2 < eps_c, or ||R_k|| / ||d_k|| < eps_c when relative.
bool check_convergence(const SolverCallReport& flow, const SolverCallReport& solid,
                       const Criterion& criterion, const Vector& r_k, const Vector& d_k);

/// Carried between coupling iterations and time steps.
struct CouplingState {
  InterfaceField displacement;  // d at the start of the next coupling iteration
  Vector u_flow;
  Vector u_solid;

  static CouplingState initial(const CoupledProblem& problem);
};

struct TimeStepRecord {
  int step = 0;
  int coupling_iters = 0;
  long flow_iters = 0;
  long solid_iters = 0;
  bool converged = false;
  StepDiagnostics accepted;
  /// ||R^k||_2 for every coupling iteration of the step.
  std::vector<double> residual_norms;
  std::vector<int> flow_iters_per_call;
  std::vector<int> solid_iters_per_call;
  double flow_time = 0.0;
  double solid_time = 0.0;
  int iqn_fallbacks = 0;
  int aitken_stagnations = 0;
  /// Filled only when auditing: first residuals of a repeated call with the accepted data.
  double audit_flow_first = 0.0;
  double audit_solid_first = 0.0;
};

/// Raised by run_time_step; carries the counts accumulated up to the abort.
class StepDiverged : public CouplingDiverged {
 public:
  StepDiverged(const std::string& what, TimeStepRecord partial)
      : CouplingDiverged(what, partial.step), partial_(std::move(partial)) {}
  const TimeStepRecord& partial() const { return partial_; }

 private:
  TimeStepRecord partial_;
};

/// One Gauss-Seidel time step: flow(d) -> traction -> solid -> d~, then the
/// configured update, until the criterion holds. Advances `problem` and `state`
/// to the accepted solution. With `audit`, both solvers are re-called with the
/// accepted data before the state advances.
TimeStepRecord run_time_step(CoupledProblem& problem, const CouplingConfig& config,
                             CouplingState& state, IqnHistory& hist, int step,
                             bool audit = false);

struct SimulationResult {
  RunRecord record;
  std::vector<TimeStepRecord> steps;
};

/// Runs every time step of `problem`. A diverged step stops the run and is
/// reported through record.converged / failed_step rather than thrown.
SimulationResult run_simulation(CoupledProblem& problem, const CouplingConfig& config,
                                bool audit = false);

}  // namespace fsilab
