#pragma once

#include "fsilab/subproblem.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace fsilab {

/// A coupled problem as driven by the coupling engine: two subproblems plus
/// the time-level state they advance between steps.
class CoupledProblem {
 public:
  virtual ~CoupledProblem() = default;

  virtual std::string name() const = 0;
  virtual int num_steps() const = 0;
  virtual Eigen::Index interface_size() const = 0;
  virtual InterfaceField initial_displacement() const = 0;
  virtual Vector initial_flow_state() const = 0;
  virtual Vector initial_solid_state() const = 0;

  /// Prepares boundary data for time step `step` (0-based).
  virtual void begin_step(int step) = 0;
  virtual const Subproblem& flow() const = 0;
  virtual const Subproblem& solid() const = 0;
  /// Advances the time-level state after the coupling loop converged.
  virtual void accept_step(const Vector& u_flow, const Vector& u_solid,
                           const InterfaceField& displacement) = 0;
};

// ---------------------------------------------------------------------------
// Reduced 1-D flexible tube

struct Tube1DParams {
  double length = 0.05;        // m
  double radius = 0.005;       // r0, m
  double thickness = 0.001;    // h, m
  double rho_f = 1000.0;       // kg/m^3
  double mu_f = 0.003;         // Pa s
  double rho_s = 1200.0;       // kg/m^3
  double youngs = 3.0e5;       // E, N/m^2
  double poisson = 0.3;
  int cells = 100;
  double dt = 1e-4;            // s
  int steps = 100;
  double pulse_pressure = 1333.2;   // Pa
  double pulse_duration = 0.003;    // s
  double outlet_pressure = 0.0;     // Pa
  double kappa3 = 0.0;              // cubic ring stiffening, Pa/m^3
  /// Face-flux pressure stabilization as a fraction of dt / (rho_f dx).
  double stabilization = 0.25;
  /// Drops wall inertia (static ring); used by closed-form checks.
  bool quasi_static = false;
  DriverKind flow_driver = DriverKind::Newton;
  Preconditioner flow_preconditioner = Preconditioner::FullA;

  void validate() const;

  int nodes() const { return cells + 1; }
  double dx() const { return length / cells; }
  /// Linear ring stiffness k1 = E h / (r0^2 (1 - nu^2)).
  double ring_stiffness() const;
  /// Inlet pressure applied at the end of step `step` (time (step + 1) dt).
  double inlet_pressure(int step) const;
};

/// Time-level state of the tube. Flow quantities live on cells, wall
/// quantities on nodes; both tube ends are clamped nodes.
struct TubeState {
  Vector area;           // m^2, per cell
  Vector velocity;       // m/s, per cell
  Vector pressure;       // Pa, per cell
  Vector displacement;   // m, per node
  Vector wall_velocity;  // m/s, per node

  static TubeState at_rest(const Tube1DParams& params);
};

/// Cell areas pi (r0 + d_cell)^2 with d_cell the mean of the two bounding nodes.
/// Throws GeometryError on a non-positive radius.
Vector tube_cell_areas(const Tube1DParams& params, const Vector& node_displacement);

/// Flow system with unknowns interleaved as (v_0, p_0, v_1, p_1, ...).
///
/// Backward Euler mass and momentum balances with first-order upwind
/// convection and Poiseuille friction. The area is frozen from `displacement`
/// for the whole call. Continuity and momentum rows are scaled to pascals.
NonlinearSystem tube_flow_system(const Tube1DParams& params, const TubeState& old,
                                 const InterfaceField& displacement, double inlet_pressure);

/// Nodal wall pressure from a flow solution; end nodes take the boundary values.
InterfaceField tube_traction(const Tube1DParams& params, const Vector& flow_solution,
                             double inlet_pressure);

/// Independent-ring wall: rho_s h d'' + k1 d + kappa3 d^3 = p per interior node,
/// backward Euler in time. Unknowns are the nodal radial displacements.
NonlinearSystem tube_solid_system(const Tube1DParams& params, const TubeState& old,
                                  const InterfaceField& traction);

/// Volume fluxes through the inlet and outlet faces of a flow solution.
struct TubeBoundaryFlux {
  double inflow = 0.0;   // m^3/s
  double outflow = 0.0;  // m^3/s
};
TubeBoundaryFlux tube_boundary_flux(const Tube1DParams& params, const Vector& flow_solution,
                                    const InterfaceField& displacement, double inlet_pressure);

/// Discrete ring energy 1/2 rho_s h w^2 + 1/2 k1 d^2 summed over nodes (kappa3 = 0 form).
double tube_ring_energy(const Tube1DParams& params, const TubeState& state);

class TubeProblem final : public CoupledProblem {
 public:
  explicit TubeProblem(Tube1DParams params);
  TubeProblem(const TubeProblem&) = delete;
  TubeProblem& operator=(const TubeProblem&) = delete;

  std::string name() const override { return "tube1d"; }
  int num_steps() const override { return params_.steps; }
  Eigen::Index interface_size() const override { return params_.nodes(); }
  InterfaceField initial_displacement() const override;
  Vector initial_flow_state() const override;
  Vector initial_solid_state() const override;
  void begin_step(int step) override;
  const Subproblem& flow() const override { return flow_; }
  const Subproblem& solid() const override { return solid_; }
  void accept_step(const Vector& u_flow, const Vector& u_solid,
                   const InterfaceField& displacement) override;

  const Tube1DParams& params() const { return params_; }
  const TubeState& state() const { return state_; }
  double current_inlet_pressure() const { return inlet_pressure_; }

 private:
  class Flow final : public Subproblem {
   public:
    explicit Flow(const TubeProblem& owner) : owner_(owner) {}
    SolverId id() const override { return SolverId::Flow; }
    DriverKind driver() const override { return owner_.params_.flow_driver; }
    NonlinearSystem system(const InterfaceField& displacement) const override;
    InterfaceField extract_output(const Vector& u) const override;

   private:
    const TubeProblem& owner_;
  };
  class Solid final : public Subproblem {
   public:
    explicit Solid(const TubeProblem& owner) : owner_(owner) {}
    SolverId id() const override { return SolverId::Solid; }
    DriverKind driver() const override { return DriverKind::Newton; }
    NonlinearSystem system(const InterfaceField& traction) const override;
    InterfaceField extract_output(const Vector& u) const override;

   private:
    const TubeProblem& owner_;
  };

  Tube1DParams params_;
  TubeState state_;
  double inlet_pressure_ = 0.0;
  Flow flow_{*this};
  Solid solid_{*this};
};

// ---------------------------------------------------------------------------
// Coupled linear toy with a monolithic oracle

/// Flow:  A_f u_f = f_f - g T^T d,  traction t = T u_f
/// Solid: A_s d   = f_s + g t
///
/// The Gauss-Seidel interface map d -> d~ has Jacobian -g^2 A_s^-1 T A_f^-1 T^T,
/// whose eigenvalues are real and non-positive; g is chosen so that its
/// spectral radius equals the requested value.
class LinearToy final : public CoupledProblem {
 public:
  /// `spectral_radius` == 0 decouples the subproblems entirely.
  LinearToy(int dim_f, int dim_s, double spectral_radius, int steps = 1,
            std::uint64_t seed = 7);

  LinearToy(const LinearToy& other);
  LinearToy& operator=(const LinearToy&) = delete;

  /// "decoupled" (radius 0), "stable" (0.5) or "unstable" (2.0, added-mass-like).
  static LinearToy preset(const std::string& name, int dim_f = 4, int dim_s = 4);
  static double preset_radius(const std::string& name);

  std::string name() const override { return "linear_toy"; }
  int num_steps() const override { return steps_; }
  Eigen::Index interface_size() const override { return a_s_.rows(); }
  InterfaceField initial_displacement() const override;
  Vector initial_flow_state() const override;
  Vector initial_solid_state() const override;
  void begin_step(int) override {}
  const Subproblem& flow() const override { return flow_; }
  const Subproblem& solid() const override { return solid_; }
  void accept_step(const Vector&, const Vector&, const InterfaceField&) override {}

  double coupling_gain() const { return gain_; }
  /// Spectral radius of the Gauss-Seidel interface map.
  double spectral_radius() const;
  /// Interface displacement of the monolithic system, solved directly.
  Vector monolithic_displacement() const;
  Vector monolithic_flow() const;
  /// Flow solution for a given interface displacement (direct solve).
  Vector direct_flow_solve(const Vector& displacement) const;

 private:
  class Flow final : public Subproblem {
   public:
    explicit Flow(const LinearToy& owner) : owner_(owner) {}
    SolverId id() const override { return SolverId::Flow; }
    DriverKind driver() const override { return DriverKind::Newton; }
    NonlinearSystem system(const InterfaceField& displacement) const override;
    InterfaceField extract_output(const Vector& u) const override;

   private:
    const LinearToy& owner_;
  };
  class Solid final : public Subproblem {
   public:
    explicit Solid(const LinearToy& owner) : owner_(owner) {}
    SolverId id() const override { return SolverId::Solid; }
    DriverKind driver() const override { return DriverKind::Newton; }
    NonlinearSystem system(const InterfaceField& traction) const override;
    InterfaceField extract_output(const Vector& u) const override;

   private:
    const LinearToy& owner_;
  };

  Matrix monolithic_matrix() const;

  Matrix a_f_, a_s_, t_;
  Vector f_f_, f_s_;
  double gain_ = 0.0;
  int steps_ = 1;
  Flow flow_{*this};
  Solid solid_{*this};
};

// ---------------------------------------------------------------------------
// Scalar nonlinear toy

/// Flow: u^2 = 4 + d (traction t = u); solid: 2 d = t.
/// The coupled fixed point is d = (1 + sqrt(65)) / 8.
class ScalarToy final : public CoupledProblem {
 public:
  explicit ScalarToy(int steps = 1) : steps_(steps) {}

  static double exact_displacement();

  std::string name() const override { return "scalar_toy"; }
  int num_steps() const override { return steps_; }
  Eigen::Index interface_size() const override { return 1; }
  InterfaceField initial_displacement() const override;
  Vector initial_flow_state() const override;
  Vector initial_solid_state() const override;
  void begin_step(int) override {}
  const Subproblem& flow() const override { return flow_; }
  const Subproblem& solid() const override { return solid_; }
  void accept_step(const Vector&, const Vector&, const InterfaceField&) override {}

 private:
  class Flow final : public Subproblem {
   public:
    SolverId id() const override { return SolverId::Flow; }
    DriverKind driver() const override { return DriverKind::Newton; }
    NonlinearSystem system(const InterfaceField& displacement) const override;
    InterfaceField extract_output(const Vector& u) const override;
  };
  class Solid final : public Subproblem {
   public:
    SolverId id() const override { return SolverId::Solid; }
    DriverKind driver() const override { return DriverKind::Newton; }
    NonlinearSystem system(const InterfaceField& traction) const override;
    InterfaceField extract_output(const Vector& u) const override;
  };

  int steps_;
  Flow flow_;
  Solid solid_;
};

}  // namespace fsilab
