#include "fsilab/models.hpp"

#include "fsilab/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <random>

namespace fsilab {

// ---------------------------------------------------------------------------
// Tube

void Tube1DParams::validate() const {
  const bool positive = length > 0 && radius > 0 && thickness > 0 && rho_f > 0 && mu_f > 0 &&
                        rho_s > 0 && youngs > 0 && dt > 0 && cells > 0 && steps > 0 &&
                        stabilization > 0;
  if (!positive) throw InvalidInput("tube parameters must be strictly positive");
  if (kappa3 < 0) throw InvalidInput("kappa3 must be non-negative");
  if (poisson < 0 || poisson >= 0.5) throw InvalidInput("poisson ratio must lie in [0, 0.5)");
  if (pulse_duration < 0) throw InvalidInput("pulse duration must be non-negative");
}

double Tube1DParams::ring_stiffness() const {
  return youngs * thickness / (radius * radius * (1.0 - poisson * poisson));
}

double Tube1DParams::inlet_pressure(int step) const {
  // Compare in units of dt so that t = 0.003 with dt = 1e-4 is not inside the pulse.
  const double t_over_dt = static_cast<double>(step + 1);
  return t_over_dt < pulse_duration / dt - 1e-9 ? pulse_pressure : 0.0;
}

TubeState TubeState::at_rest(const Tube1DParams& params) {
  TubeState s;
  const double a0 = std::numbers::pi * params.radius * params.radius;
  s.area = Vector::Constant(params.cells, a0);
  s.velocity = Vector::Zero(params.cells);
  s.pressure = Vector::Zero(params.cells);
  s.displacement = Vector::Zero(params.nodes());
  s.wall_velocity = Vector::Zero(params.nodes());
  return s;
}

Vector tube_cell_areas(const Tube1DParams& params, const Vector& d) {
  if (d.size() != params.nodes()) {
    throw ContractViolation("tube displacement must have one entry per node");
  }
  Vector area(params.cells);
  for (int i = 0; i < params.cells; ++i) {
    const double r = params.radius + 0.5 * (d[i] + d[i + 1]);
    if (!(r > 0)) throw GeometryError("non-positive tube radius in cell " + std::to_string(i));
    area[i] = std::numbers::pi * r * r;
  }
  return area;
}

namespace {

Vector face_areas(const Tube1DParams& params, const Vector& d) {
  Vector area(params.nodes());
  for (int j = 0; j < params.nodes(); ++j) {
    const double r = params.radius + d[j];
    if (!(r > 0)) throw GeometryError("non-positive tube radius at node " + std::to_string(j));
    area[j] = std::numbers::pi * r * r;
  }
  return area;
}

/// Linear face-velocity stencil v_f = c0 + sum coeff * u[index].
struct FaceStencil {
  int idx[4] = {-1, -1, -1, -1};
  double coeff[4] = {0, 0, 0, 0};
  double constant = 0.0;
  int upwind_left = -1;   // velocity index used when v_f >= 0
  int upwind_right = -1;  // velocity index used when v_f < 0

  double eval(const Vector& u) const {
    double v = constant;
    for (int k = 0; k < 4; ++k) {
      if (idx[k] >= 0) v += coeff[k] * u[idx[k]];
    }
    return v;
  }
};

int vel(int cell) { return 2 * cell; }
int pre(int cell) { return 2 * cell + 1; }

/// Everything the flow assembly needs, captured by value in the system closures.
struct FlowAssembly {
  int n = 0;
  double dx = 0, dt = 0, rho = 0, friction = 0;
  double scale_c = 0, scale_m = 0;
  double p_in = 0, p_out = 0;
  Vector cell_area, face_area;
  std::vector<FaceStencil> faces;  // n + 1 faces

  FlowAssembly(const Tube1DParams& params, const Vector& d, double inlet_pressure)
      : n(params.cells),
        dx(params.dx()),
        dt(params.dt),
        rho(params.rho_f),
        friction(8.0 * std::numbers::pi * params.mu_f / params.rho_f),
        p_in(inlet_pressure),
        p_out(params.outlet_pressure),
        cell_area(tube_cell_areas(params, d)),
        face_area(face_areas(params, d)),
        faces(params.cells + 1) {
    const double a0 = std::numbers::pi * params.radius * params.radius;
    scale_c = rho * dx / (a0 * dt);
    scale_m = rho / a0;
    const double beta = params.stabilization * dt / (rho * dx);

    FaceStencil& inlet = faces[0];
    inlet.idx[0] = vel(0);
    inlet.coeff[0] = 1.0;
    inlet.idx[1] = pre(0);
    inlet.coeff[1] = -2.0 * beta;
    inlet.constant = 2.0 * beta * p_in;
    inlet.upwind_left = inlet.upwind_right = vel(0);

    for (int j = 1; j < n; ++j) {
      FaceStencil& f = faces[j];
      f.idx[0] = vel(j - 1);
      f.coeff[0] = 0.5;
      f.idx[1] = vel(j);
      f.coeff[1] = 0.5;
      f.idx[2] = pre(j);
      f.coeff[2] = -beta;
      f.idx[3] = pre(j - 1);
      f.coeff[3] = beta;
      f.upwind_left = vel(j - 1);
      f.upwind_right = vel(j);
    }
    FaceStencil& outlet = faces[n];
    outlet.idx[0] = vel(n - 1);
    outlet.coeff[0] = 1.0;
    outlet.idx[1] = pre(n - 1);
    outlet.coeff[1] = 2.0 * beta;
    outlet.constant = -2.0 * beta * p_out;
    outlet.upwind_left = outlet.upwind_right = vel(n - 1);
  }

  double face_velocity(int j, const Vector& u) const { return faces[j].eval(u); }

  /// Adds d(face velocity)/du * weight to row `row` of `m`.
  void add_face_gradient(Matrix& m, int row, int j, double weight) const {
    const FaceStencil& f = faces[j];
    for (int k = 0; k < 4; ++k) {
      if (f.idx[k] >= 0) m(row, f.idx[k]) += weight * f.coeff[k];
    }
  }

  int upwind_index(int j, const Vector& u) const {
    return face_velocity(j, u) >= 0 ? faces[j].upwind_left : faces[j].upwind_right;
  }

  /// Interior face pressure is the mean of its neighbours; boundary values live in b.
  void add_face_pressure(Matrix& m, int row, int j, double weight) const {
    if (j == 0 || j == n) return;  // boundary face pressure is a constant
    m(row, pre(j - 1)) += 0.5 * weight;
    m(row, pre(j)) += 0.5 * weight;
  }

  /// A(u): every term linear in u given the mass fluxes evaluated at u.
  Matrix matrix(const Vector& u) const {
    Matrix m = Matrix::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
      const int rc = pre(i);  // continuity row
      const int rm = vel(i);  // momentum row
      // Continuity: face volume fluxes A_j v_f (constant parts live in b).
      add_face_gradient(m, rc, i + 1, scale_c * face_area[i + 1]);
      add_face_gradient(m, rc, i, -scale_c * face_area[i]);
      // Momentum: storage, friction, convection, pressure gradient.
      m(rm, vel(i)) += scale_m * dx * (cell_area[i] / dt + friction);
      for (int side = 0; side < 2; ++side) {
        const int j = i + side;
        const double sign = side == 0 ? -1.0 : 1.0;
        const double mass_flux = face_area[j] * face_velocity(j, u);
        m(rm, upwind_index(j, u)) += sign * scale_m * mass_flux;
        add_face_pressure(m, rm, j, sign * scale_m * cell_area[i] / rho);
      }
    }
    return m;
  }

  /// K(u) = A(u) + (dA/du) u: adds the derivative of the mass flux in the convective term.
  Matrix tangent(const Vector& u) const {
    Matrix k = matrix(u);
    for (int i = 0; i < n; ++i) {
      const int rm = vel(i);
      for (int side = 0; side < 2; ++side) {
        const int j = i + side;
        const double sign = side == 0 ? -1.0 : 1.0;
        const double v_up = u[upwind_index(j, u)];
        add_face_gradient(k, rm, j, sign * scale_m * face_area[j] * v_up);
      }
    }
    return k;
  }

  Vector rhs(const Vector& old_area, const Vector& old_velocity) const {
    Vector b = Vector::Zero(2 * n);
    for (int i = 0; i < n; ++i) {
      const int rc = pre(i);
      const int rm = vel(i);
      b[rc] -= scale_c * dx * (cell_area[i] - old_area[i]) / dt;
      b[rc] -= scale_c * (face_area[i + 1] * faces[i + 1].constant -
                          face_area[i] * faces[i].constant);
      b[rm] += scale_m * dx * old_area[i] * old_velocity[i] / dt;
      if (i == 0) b[rm] += scale_m * cell_area[i] / rho * p_in;
      if (i == n - 1) b[rm] -= scale_m * cell_area[i] / rho * p_out;
    }
    return b;
  }
};

}  // namespace

NonlinearSystem tube_flow_system(const Tube1DParams& params, const TubeState& old,
                                 const InterfaceField& displacement, double inlet_pressure) {
  if (displacement.role() != FieldRole::Displacement) {
    throw ContractViolation("flow input must be a displacement field");
  }
  auto assembly =
      std::make_shared<const FlowAssembly>(params, displacement.values(), inlet_pressure);
  NonlinearSystem system;
  system.dim = 2 * params.cells;
  system.rhs = assembly->rhs(old.area, old.velocity);
  system.matrix = [assembly](const Vector& u) { return SystemMatrix(assembly->matrix(u)); };
  system.tangent = [assembly](const Vector& u) { return SystemMatrix(assembly->tangent(u)); };
  system.preconditioner = params.flow_preconditioner;
  return system;
}

InterfaceField tube_traction(const Tube1DParams& params, const Vector& u, double inlet_pressure) {
  const int n = params.cells;
  if (u.size() != 2 * n) throw ContractViolation("flow solution has the wrong size");
  Vector t(params.nodes());
  t[0] = inlet_pressure;
  t[n] = params.outlet_pressure;
  for (int j = 1; j < n; ++j) t[j] = 0.5 * (u[pre(j - 1)] + u[pre(j)]);
  return InterfaceField(std::move(t), FieldRole::Traction);
}

TubeBoundaryFlux tube_boundary_flux(const Tube1DParams& params, const Vector& u,
                                    const InterfaceField& displacement, double inlet_pressure) {
  const FlowAssembly assembly(params, displacement.values(), inlet_pressure);
  const int n = params.cells;
  return {assembly.face_area[0] * assembly.face_velocity(0, u),
          assembly.face_area[n] * assembly.face_velocity(n, u)};
}

NonlinearSystem tube_solid_system(const Tube1DParams& params, const TubeState& old,
                                  const InterfaceField& traction) {
  if (traction.role() != FieldRole::Traction || traction.size() != params.nodes()) {
    throw ContractViolation("solid input must be a traction field with one entry per node");
  }
  const int nodes = params.nodes();
  const double mass = params.quasi_static ? 0.0 : params.rho_s * params.thickness;
  const double inertia = mass / (params.dt * params.dt);
  const double k1 = params.ring_stiffness();
  const double k3 = params.kappa3;

  NonlinearSystem system;
  system.dim = nodes;
  system.rhs = Vector::Zero(nodes);
  for (int j = 1; j < nodes - 1; ++j) {
    system.rhs[j] = traction.values()[j] +
                    inertia * (old.displacement[j] + params.dt * old.wall_velocity[j]);
  }
  auto diag = [=](const Vector& d, double cubic_factor) {
    Vector out = Vector::Ones(nodes);  // clamped end rows: d = 0
    for (int j = 1; j < nodes - 1; ++j) out[j] = inertia + k1 + cubic_factor * k3 * d[j] * d[j];
    return out;
  };
  system.matrix = [diag](const Vector& d) { return SystemMatrix::diagonal(diag(d, 1.0)); };
  system.tangent = [diag](const Vector& d) { return SystemMatrix::diagonal(diag(d, 3.0)); };
  system.preconditioner = Preconditioner::DiagonalOfA;
  return system;
}

double tube_ring_energy(const Tube1DParams& params, const TubeState& state) {
  const double mass = params.rho_s * params.thickness;
  const double k1 = params.ring_stiffness();
  return 0.5 * mass * state.wall_velocity.squaredNorm() +
         0.5 * k1 * state.displacement.squaredNorm();
}

TubeProblem::TubeProblem(Tube1DParams params)
    : params_(std::move(params)), state_((params_.validate(), TubeState::at_rest(params_))) {}

InterfaceField TubeProblem::initial_displacement() const {
  return InterfaceField::zeros(params_.nodes(), FieldRole::Displacement);
}

Vector TubeProblem::initial_flow_state() const { return Vector::Zero(2 * params_.cells); }

Vector TubeProblem::initial_solid_state() const { return Vector::Zero(params_.nodes()); }

void TubeProblem::begin_step(int step) { inlet_pressure_ = params_.inlet_pressure(step); }

void TubeProblem::accept_step(const Vector& u_flow, const Vector& u_solid,
                              const InterfaceField& displacement) {
  const int n = params_.cells;
  state_.area = tube_cell_areas(params_, displacement.values());
  for (int i = 0; i < n; ++i) {
    state_.velocity[i] = u_flow[vel(i)];
    state_.pressure[i] = u_flow[pre(i)];
  }
  state_.wall_velocity = (u_solid - state_.displacement) / params_.dt;
  state_.displacement = u_solid;
}

NonlinearSystem TubeProblem::Flow::system(const InterfaceField& displacement) const {
  return tube_flow_system(owner_.params_, owner_.state_, displacement, owner_.inlet_pressure_);
}

InterfaceField TubeProblem::Flow::extract_output(const Vector& u) const {
  return tube_traction(owner_.params_, u, owner_.inlet_pressure_);
}

NonlinearSystem TubeProblem::Solid::system(const InterfaceField& traction) const {
  return tube_solid_system(owner_.params_, owner_.state_, traction);
}

InterfaceField TubeProblem::Solid::extract_output(const Vector& u) const {
  return InterfaceField(u, FieldRole::Displacement);
}

// ---------------------------------------------------------------------------
// Linear toy

namespace {

Matrix random_spd(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix q(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) q(i, j) = dist(rng);
  return q * q.transpose() / n + Matrix::Identity(n, n);
}

Vector random_vector(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace

LinearToy::LinearToy(int dim_f, int dim_s, double spectral_radius, int steps, std::uint64_t seed)
    : steps_(steps) {
  if (dim_f < 1 || dim_s < 1 || dim_s > dim_f) {
    throw InvalidInput("linear toy needs 1 <= dim_s <= dim_f");
  }
  if (spectral_radius < 0) throw InvalidInput("spectral radius must be non-negative");
  if (steps < 1) throw InvalidInput("linear toy needs at least one step");
  std::mt19937_64 rng(seed);
  a_f_ = random_spd(dim_f, rng);
  a_s_ = random_spd(dim_s, rng);
  t_ = Matrix(dim_s, dim_f);
  for (int i = 0; i < dim_s; ++i) t_.row(i) = random_vector(dim_f, rng).transpose();
  f_f_ = random_vector(dim_f, rng);
  f_s_ = random_vector(dim_s, rng);

  gain_ = 1.0;
  const double unit_radius = this->spectral_radius();
  if (!(unit_radius > 0)) throw Error("linear toy: degenerate interface map");
  gain_ = std::sqrt(spectral_radius / unit_radius);

  Eigen::PartialPivLU<Matrix> lu(monolithic_matrix());
  if (!(lu.rcond() > 1e-12)) throw Error("linear toy: monolithic matrix is singular");
}

LinearToy::LinearToy(const LinearToy& other)
    : a_f_(other.a_f_),
      a_s_(other.a_s_),
      t_(other.t_),
      f_f_(other.f_f_),
      f_s_(other.f_s_),
      gain_(other.gain_),
      steps_(other.steps_) {}

double LinearToy::preset_radius(const std::string& name) {
  if (name == "decoupled") return 0.0;
  if (name == "stable") return 0.5;
  if (name == "unstable") return 2.0;
  throw InvalidInput("unknown linear toy preset '" + name + "'");
}

LinearToy LinearToy::preset(const std::string& name, int dim_f, int dim_s) {
  return LinearToy(dim_f, dim_s, preset_radius(name));
}

double LinearToy::spectral_radius() const {
  const Matrix jac = -gain_ * gain_ * a_s_.lu().solve(t_ * a_f_.lu().solve(t_.transpose()));
  Eigen::EigenSolver<Matrix> eig(jac, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix LinearToy::monolithic_matrix() const {
  const auto nf = a_f_.rows();
  const auto ns = a_s_.rows();
  Matrix m = Matrix::Zero(nf + ns, nf + ns);
  m.topLeftCorner(nf, nf) = a_f_;
  m.topRightCorner(nf, ns) = gain_ * t_.transpose();
  m.bottomLeftCorner(ns, nf) = -gain_ * t_;
  m.bottomRightCorner(ns, ns) = a_s_;
  return m;
}

Vector LinearToy::monolithic_displacement() const {
  Vector rhs(f_f_.size() + f_s_.size());
  rhs << f_f_, f_s_;
  const Vector sol = monolithic_matrix().partialPivLu().solve(rhs);
  return sol.tail(f_s_.size());
}

Vector LinearToy::monolithic_flow() const {
  Vector rhs(f_f_.size() + f_s_.size());
  rhs << f_f_, f_s_;
  const Vector sol = monolithic_matrix().partialPivLu().solve(rhs);
  return sol.head(f_f_.size());
}

Vector LinearToy::direct_flow_solve(const Vector& displacement) const {
  return a_f_.partialPivLu().solve(f_f_ - gain_ * t_.transpose() * displacement);
}

InterfaceField LinearToy::initial_displacement() const {
  return InterfaceField(initial_solid_state(), FieldRole::Displacement);
}

Vector LinearToy::initial_flow_state() const { return a_f_.partialPivLu().solve(f_f_); }

Vector LinearToy::initial_solid_state() const { return a_s_.partialPivLu().solve(f_s_); }

NonlinearSystem LinearToy::Flow::system(const InterfaceField& displacement) const {
  if (displacement.size() != owner_.a_s_.rows()) {
    throw ContractViolation("linear toy: displacement has the wrong size");
  }
  NonlinearSystem s;
  s.dim = owner_.a_f_.rows();
  s.rhs = owner_.f_f_ - owner_.gain_ * owner_.t_.transpose() * displacement.values();
  const Matrix a = owner_.a_f_;
  s.matrix = [a](const Vector&) { return SystemMatrix(a); };
  s.tangent = s.matrix;
  s.preconditioner = Preconditioner::FullA;
  return s;
}

InterfaceField LinearToy::Flow::extract_output(const Vector& u) const {
  return InterfaceField(owner_.t_ * u, FieldRole::Traction);
}

NonlinearSystem LinearToy::Solid::system(const InterfaceField& traction) const {
  if (traction.size() != owner_.a_s_.rows()) {
    throw ContractViolation("linear toy: traction has the wrong size");
  }
  NonlinearSystem s;
  s.dim = owner_.a_s_.rows();
  s.rhs = owner_.f_s_ + owner_.gain_ * traction.values();
  const Matrix a = owner_.a_s_;
  s.matrix = [a](const Vector&) { return SystemMatrix(a); };
  s.tangent = s.matrix;
  s.preconditioner = Preconditioner::FullA;
  return s;
}

InterfaceField LinearToy::Solid::extract_output(const Vector& u) const {
  return InterfaceField(u, FieldRole::Displacement);
}

// ---------------------------------------------------------------------------
// Scalar toy

double ScalarToy::exact_displacement() { return (1.0 + std::sqrt(65.0)) / 8.0; }

InterfaceField ScalarToy::initial_displacement() const {
  return InterfaceField::zeros(1, FieldRole::Displacement);
}

Vector ScalarToy::initial_flow_state() const { return Vector::Constant(1, 2.0); }

Vector ScalarToy::initial_solid_state() const { return Vector::Zero(1); }

NonlinearSystem ScalarToy::Flow::system(const InterfaceField& displacement) const {
  NonlinearSystem s;
  s.dim = 1;
  s.rhs = Vector::Constant(1, 4.0 + displacement.values()[0]);
  s.matrix = [](const Vector& u) { return SystemMatrix::diagonal(u); };
  s.tangent = [](const Vector& u) { return SystemMatrix::diagonal(2.0 * u); };
  return s;
}

InterfaceField ScalarToy::Flow::extract_output(const Vector& u) const {
  return InterfaceField(u, FieldRole::Traction);
}

NonlinearSystem ScalarToy::Solid::system(const InterfaceField& traction) const {
  NonlinearSystem s;
  s.dim = 1;
  s.rhs = traction.values();
  s.matrix = [](const Vector&) { return SystemMatrix::diagonal(Vector::Constant(1, 2.0)); };
  s.tangent = s.matrix;
  return s;
}

InterfaceField ScalarToy::Solid::extract_output(const Vector& u) const {
  return InterfaceField(u, FieldRole::Displacement);
}

}  // namespace fsilab
