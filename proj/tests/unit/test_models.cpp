#include "fsilab/coupling.hpp"
#include "fsilab/models.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace fsilab;

namespace {

SolverCallInput input(Vector u0, double eps, Cap cap = Cap()) { return {std::move(u0), eps, cap, 1}; }

// Real root of k1 x + k3 x^3 = p by bisection.
double bisect_ring(double k1, double k3, double p) {
  double lo = 0.0, hi = p / k1;  // k3 >= 0 puts the root in [0, p/k1]
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (k1 * mid + k3 * mid * mid * mid < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CouplingConfig toy_config(Acceleration accel, double omega0) {
  CouplingConfig c;
  c.eps_f = c.eps_s = 1e-12;
  c.accel = accel;
  c.omega0 = omega0;
  return c;
}

}  // namespace

TEST_CASE("tube parameters") {
  Tube1DParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.nodes() == 101);
  CHECK(p.dx() == doctest::Approx(5e-4));
  CHECK(p.ring_stiffness() == doctest::Approx(3e5 * 1e-3 / (2.5e-5 * 0.91)).epsilon(1e-14));
  CHECK(p.inlet_pressure(0) == 1333.2);
  CHECK(p.inlet_pressure(28) == 1333.2);
  CHECK(p.inlet_pressure(29) == 0.0);  // t = 0.003 is no longer inside the pulse
  CHECK(p.inlet_pressure(99) == 0.0);
  auto bad = [](auto mutate) {
    Tube1DParams x;
    mutate(x);
    CHECK_THROWS_AS(x.validate(), InvalidInput);
  };
  bad([](Tube1DParams& x) { x.radius = 0; });
  bad([](Tube1DParams& x) { x.cells = 0; });
  bad([](Tube1DParams& x) { x.kappa3 = -1; });
  bad([](Tube1DParams& x) { x.poisson = 0.5; });
  bad([](Tube1DParams& x) { x.dt = -1e-4; });
  CHECK_THROWS_AS(TubeProblem(Tube1DParams{.youngs = 0}), InvalidInput);
}

TEST_CASE("tube flow at rest stays at rest") {
  Tube1DParams p;
  p.flow_driver = DriverKind::Picard;
  TubeProblem tube(p);
  tube.begin_step(50);
  const auto out = call_solver(tube.flow(), tube.initial_displacement(),
                               input(tube.initial_flow_state(), 1e-12));
  CHECK(out.u.isZero(0.0));
  CHECK(out.report.converged_on_first);
  CHECK(out.report.inner_iters == 1);
}

TEST_CASE("rigid tube under uniform pressure has uniform velocity") {
  Tube1DParams p;
  p.pulse_pressure = 500.0;
  p.outlet_pressure = 500.0;
  TubeProblem tube(p);
  tube.begin_step(0);
  const auto out = call_solver(tube.flow(), tube.initial_displacement(),
                               input(tube.initial_flow_state(), 1e-10));
  CHECK(out.report.converged);
  for (int i = 0; i < p.cells; ++i) {
    CHECK(out.u[2 * i] == doctest::Approx(out.u[0]).epsilon(1e-12).scale(1.0));
    CHECK(out.u[2 * i + 1] == doctest::Approx(500.0).epsilon(1e-10));
  }
}

TEST_CASE("inlet traction passes the pulse through") {
  Tube1DParams p;
  TubeProblem tube(p);
  tube.begin_step(0);
  const NonlinearSystem sys =
      tube_flow_system(p, tube.state(), tube.initial_displacement(), 1333.2);
  const auto out = call_solver(tube.flow(), tube.initial_displacement(),
                               input(tube.initial_flow_state(), 1e-8));
  CHECK(out.report.converged);
  CHECK(out.output.values()[0] == 1333.2);
  CHECK(out.output.values()[p.cells] == 0.0);
  // The first momentum row carries the inlet pressure in b: (a_0 / a0) * p_in with a_0 == a0.
  CHECK(sys.rhs[0] == doctest::Approx(1333.2).epsilon(1e-14));
  // Nodal tractions interpolate a monotone pressure drop from inlet to outlet.
  const Vector& t = out.output.values();
  for (int j = 1; j <= p.cells; ++j) CHECK(t[j] <= t[j - 1] + 1e-9);
}

TEST_CASE("flow tangent matches finite differences") {
  Tube1DParams p;
  TubeProblem tube(p);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  Vector d(p.nodes()), state(2 * p.cells);
  for (int j = 0; j < p.nodes(); ++j) d[j] = 2e-5 * u(rng);
  for (int i = 0; i < 2 * p.cells; ++i) state[i] = i % 2 ? 1000 * u(rng) : 0.5 * u(rng);
  const NonlinearSystem sys =
      tube_flow_system(p, tube.state(), InterfaceField(d, FieldRole::Displacement), 1333.2);
  const Matrix k = sys.tangent(state).to_dense();
  auto residual = [&](const Vector& x) -> Vector { return sys.matrix(x).multiply(x); };
  const double h = 1e-7;
  double worst = 0.0;
  for (int c = 0; c < 2 * p.cells; c += 7) {
    Vector xp = state, xm = state;
    xp[c] += h;
    xm[c] -= h;
    const Vector fd = (residual(xp) - residual(xm)) / (2 * h);
    worst = std::max(worst, (fd - k.col(c)).norm() / (1.0 + k.col(c).norm()));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("ring solid examples") {
  Tube1DParams p;
  const double k1 = p.ring_stiffness();
  SUBCASE("zero load, zero state") {
    const TubeState rest = TubeState::at_rest(p);
    const NonlinearSystem sys =
        tube_solid_system(p, rest, InterfaceField::zeros(p.nodes(), FieldRole::Traction));
    const DriveResult r = newton_drive(sys, input(Vector::Zero(p.nodes()), 1e-12));
    CHECK(r.u.isZero(0.0));
  }
  SUBCASE("static linear ring") {
    p.quasi_static = true;
    const TubeState rest = TubeState::at_rest(p);
    const NonlinearSystem sys = tube_solid_system(
        p, rest, InterfaceField(Vector::Constant(p.nodes(), 1333.2), FieldRole::Traction));
    const DriveResult r = newton_drive(sys, input(Vector::Zero(p.nodes()), 1e-9));
    const double expected = 1333.2 * 0.005 * 0.005 * (1 - 0.09) / (3e5 * 1e-3);
    CHECK(expected == doctest::Approx(1.0110e-4).epsilon(1e-4));
    for (int j = 1; j < p.cells; ++j) CHECK(r.u[j] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.u[0] == 0.0);
    CHECK(r.u[p.cells] == 0.0);
  }
  SUBCASE("static cubic ring matches bisection") {
    p.quasi_static = true;
    for (double k3 : {1e12, 1e14, 1e16}) {
      p.kappa3 = k3;
      const TubeState rest = TubeState::at_rest(p);
      const NonlinearSystem sys = tube_solid_system(
          p, rest, InterfaceField(Vector::Constant(p.nodes(), 1333.2), FieldRole::Traction));
      const DriveResult r = newton_drive(sys, input(Vector::Zero(p.nodes()), 1e-10));
      const double root = bisect_ring(k1, k3, 1333.2);
      CHECK(std::abs(r.u[p.cells / 2] - root) <= 1e-12);
    }
  }
  SUBCASE("wrong traction size") {
    CHECK_THROWS_AS(tube_solid_system(p, TubeState::at_rest(p),
                                      InterfaceField::zeros(3, FieldRole::Traction)),
                    ContractViolation);
  }
}

TEST_CASE("first solid call from rest needs three Newton iterations with the shipped kappa3") {
  Tube1DParams p;
  p.kappa3 = 1e13;
  TubeProblem tube(p);
  tube.begin_step(0);
  const auto flow = call_solver(tube.flow(), tube.initial_displacement(),
                                input(tube.initial_flow_state(), 1e-6));
  const auto solid = call_solver(tube.solid(), flow.output, input(tube.initial_solid_state(), 1e-6));
  CHECK(solid.report.inner_iters == 3);
  p.kappa3 = 0;
  TubeProblem linear(p);
  linear.begin_step(0);
  const auto solid0 =
      call_solver(linear.solid(), flow.output, input(linear.initial_solid_state(), 1e-6));
  CHECK(solid0.report.inner_iters == 2);
}

TEST_CASE("ring energy does not grow without load") {
  Tube1DParams p;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  TubeState s = TubeState::at_rest(p);
  for (int j = 1; j < p.cells; ++j) {
    s.displacement[j] = 1e-4 * u(rng);
    s.wall_velocity[j] = 0.1 * u(rng);
  }
  const InterfaceField zero = InterfaceField::zeros(p.nodes(), FieldRole::Traction);
  double energy = tube_ring_energy(p, s);
  for (int step = 0; step < 50; ++step) {
    const DriveResult r = newton_drive(tube_solid_system(p, s, zero), input(s.displacement, 1e-8));
    s.wall_velocity = (r.u - s.displacement) / p.dt;
    s.displacement = r.u;
    const double e = tube_ring_energy(p, s);
    CHECK(e <= energy * (1 + 1e-12));
    energy = e;
  }
}

TEST_CASE("tube steps conserve mass and keep geometry consistent") {
  Tube1DParams p;
  p.kappa3 = 1e13;
  p.steps = 40;
  TubeProblem tube(p);
  CouplingConfig cfg;
  cfg.eps_f = cfg.eps_s = 1e-6;
  cfg.reuse_q = 2;
  CouplingState state = CouplingState::initial(tube);
  IqnHistory hist(cfg.reuse_q);
  const double a0 = std::numbers::pi * p.radius * p.radius;
  const double s_c = p.rho_f * p.dx() / (a0 * p.dt);
  const double flux_scale = 2.0 * p.cells * p.dt / s_c;
  for (int step = 0; step < p.steps; ++step) {
    const double volume_before = tube.state().area.sum() * p.dx();
    const TimeStepRecord rec = run_time_step(tube, cfg, state, hist, step);
    REQUIRE(rec.converged);
    const double volume_after = tube.state().area.sum() * p.dx();
    const TubeBoundaryFlux flux =
        tube_boundary_flux(p, state.u_flow, state.displacement, tube.current_inlet_pressure());
    const double imbalance = volume_after - volume_before + p.dt * (flux.outflow - flux.inflow);
    CHECK(std::abs(imbalance) <= 10 * cfg.eps_f * flux_scale);
    const Vector areas = tube_cell_areas(p, state.displacement.values());
    CHECK((areas - tube.state().area).cwiseAbs().maxCoeff() <= 1e-14 * areas.maxCoeff());
    CHECK((tube.state().area.array() > 0).all());
  }
}

TEST_CASE("geometry error on a collapsed tube") {
  Tube1DParams p;
  Vector d = Vector::Zero(p.nodes());
  d[10] = d[11] = -p.radius;
  CHECK_THROWS_AS(tube_cell_areas(p, d), GeometryError);
  CHECK_THROWS_AS(tube_cell_areas(p, Vector::Zero(3)), ContractViolation);
}

TEST_CASE("linear toy construction") {
  CHECK(LinearToy::preset("decoupled").spectral_radius() == 0.0);
  CHECK(LinearToy::preset("stable").spectral_radius() == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(LinearToy::preset("unstable").spectral_radius() == doctest::Approx(2.0).epsilon(1e-10));
  CHECK_THROWS_AS(LinearToy::preset("weird"), InvalidInput);
  CHECK_THROWS_AS(LinearToy(0, 1, 0.5), InvalidInput);
  CHECK_THROWS_AS(LinearToy(2, 3, 0.5), InvalidInput);
  const LinearToy a = LinearToy::preset("stable");
  const LinearToy b = a;  // copies re-bind their subproblems
  CHECK(&b.flow() != &a.flow());
  CHECK(b.monolithic_displacement() == a.monolithic_displacement());
}

TEST_CASE("decoupled linear toy converges in one coupling iteration") {
  LinearToy toy = LinearToy::preset("decoupled");
  CouplingState state = CouplingState::initial(toy);
  IqnHistory hist;
  const TimeStepRecord rec = run_time_step(toy, toy_config(Acceleration::IQNILS, 0.1), state, hist, 0);
  CHECK(rec.converged);
  CHECK(rec.coupling_iters == 1);
  CHECK(rec.flow_iters_per_call == std::vector<int>{1});
  CHECK(rec.solid_iters_per_call == std::vector<int>{1});
  CHECK(deviation_from_reference(state.displacement.values(), toy.monolithic_displacement()) <= 1e-14);
}

TEST_CASE("stable linear toy: plain Gauss-Seidel reaches the monolithic solution") {
  LinearToy toy = LinearToy::preset("stable");
  CouplingState state = CouplingState::initial(toy);
  IqnHistory hist;
  const TimeStepRecord rec = run_time_step(toy, toy_config(Acceleration::Constant, 1.0), state, hist, 0);
  CHECK(rec.converged);
  CHECK(deviation_from_reference(state.displacement.values(), toy.monolithic_displacement()) <= 1e-12);
}

TEST_CASE("unstable linear toy diverges under plain relaxation, converges under IQN-ILS") {
  LinearToy toy = LinearToy::preset("unstable");
  {
    CouplingState state = CouplingState::initial(toy);
    IqnHistory hist;
    try {
      run_time_step(toy, toy_config(Acceleration::Constant, 1.0), state, hist, 0);
      FAIL("expected divergence");
    } catch (const StepDiverged& e) {
      const auto& norms = e.partial().residual_norms;
      int longest = 0, run = 0;
      for (std::size_t k = 1; k < norms.size(); ++k) {
        run = norms[k] > norms[k - 1] ? run + 1 : 0;
        longest = std::max(longest, run);
      }
      CHECK(longest >= 3);
      CHECK(e.step() == 0);
    }
  }
  CouplingState state = CouplingState::initial(toy);
  IqnHistory hist;
  const TimeStepRecord rec = run_time_step(toy, toy_config(Acceleration::IQNILS, 0.1), state, hist, 0);
  CHECK(rec.converged);
  CHECK(deviation_from_reference(state.displacement.values(), toy.monolithic_displacement()) <= 1e-9);
}

TEST_CASE("linear toy: uncapped runs match the monolithic oracle") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> radius(0.0, 0.9);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 24; ++trial) {
    const int ds = dim(rng);
    const int df = ds + dim(rng) - 1;
    LinearToy toy(df, ds, radius(rng), 1, rng());
    const Acceleration accel = std::array{Acceleration::Constant, Acceleration::Aitken,
                                          Acceleration::IQNILS}[trial % 3];
    const SimulationResult sim = run_simulation(toy, toy_config(accel, 1.0));
    REQUIRE(sim.record.converged);
    CHECK(deviation_from_reference(sim.record.snapshots.back(), toy.monolithic_displacement()) <=
          1e-9);
  }
}

TEST_CASE("scalar toy") {
  ScalarToy toy;
  CHECK(ScalarToy::exact_displacement() == doctest::Approx((1 + std::sqrt(65.0)) / 8).epsilon(1e-15));
  const SimulationResult sim = run_simulation(toy, toy_config(Acceleration::IQNILS, 0.5));
  REQUIRE(sim.record.converged);
  CHECK(std::abs(sim.record.snapshots.back()[0] - ScalarToy::exact_displacement()) <= 1e-10);
}
