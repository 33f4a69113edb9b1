#include "fsilab/error.hpp"
#include "fsilab/models.hpp"
#include "fsilab/subproblem.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <random>
#include <string_view>

using namespace fsilab;

namespace {

// u * u = b: A(u) = u, K(u) = 2u.
NonlinearSystem square_root_system(double b) {
  NonlinearSystem s;
  s.dim = 1;
  s.rhs = Vector::Constant(1, b);
  s.matrix = [](const Vector& u) { return SystemMatrix::diagonal(u); };
  s.tangent = [](const Vector& u) { return SystemMatrix::diagonal(2.0 * u); };
  return s;
}

// (1 + u) u = b
NonlinearSystem shifted_system(double b, Preconditioner m) {
  NonlinearSystem s;
  s.dim = 1;
  s.rhs = Vector::Constant(1, b);
  s.matrix = [](const Vector& u) { return SystemMatrix(Matrix::Constant(1, 1, 1.0 + u[0])); };
  s.tangent = [](const Vector& u) { return SystemMatrix(Matrix::Constant(1, 1, 1.0 + 2 * u[0])); };
  s.preconditioner = m;
  return s;
}

NonlinearSystem linear_system(const Matrix& a, const Vector& b, Preconditioner m) {
  NonlinearSystem s;
  s.dim = a.rows();
  s.rhs = b;
  s.matrix = [a](const Vector&) { return SystemMatrix(a); };
  s.tangent = s.matrix;
  s.preconditioner = m;
  return s;
}

SolverCallInput input(Vector u0, double eps, Cap cap = Cap(), int batch = 1) {
  return {std::move(u0), eps, cap, batch};
}

Vector scalar(double x) { return Vector::Constant(1, x); }

Matrix random_well_conditioned(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = u(rng);
  a += 2.0 * n * Matrix::Identity(n, n);
  return a;
}

std::size_t hash_vector(const Vector& v) {
  return std::hash<std::string_view>{}(
      std::string_view(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size()));
}

}  // namespace

TEST_CASE("newton: exact initial guess converges on first") {
  const DriveResult r = newton_drive(square_root_system(4), input(scalar(2), 1e-12));
  CHECK(r.report.residual_history.front() == 0.0);
  CHECK(r.report.converged_on_first);
  CHECK(r.report.inner_iters == 1);
  CHECK(r.u[0] == 2.0);
}

TEST_CASE("newton: converges to the root and takes the hand-computed first step") {
  const DriveResult r = newton_drive(square_root_system(4), input(scalar(3), 1e-10));
  CHECK(std::abs(r.u[0] - 2.0) < 1e-10);
  CHECK(r.report.converged);
  CHECK_FALSE(r.report.converged_on_first);
  CHECK(r.report.residual_history.front() == 5.0);

  const DriveResult one = newton_drive(square_root_system(4), input(scalar(3), 1e-10, Cap(1)));
  CHECK(one.report.inner_iters == 1);
  CHECK(std::abs(one.u[0] - 13.0 / 6.0) < 1e-12);
  CHECK_FALSE(one.report.converged_on_first);
  CHECK_FALSE(one.report.converged);
}

TEST_CASE("newton: one extra update after the tolerance is met") {
  // Residual drops below eps at iteration i; the update of iteration i is still applied.
  std::vector<Vector> seen;
  const DriveResult r = newton_drive(
      square_root_system(4), input(scalar(3), 1e-6),
      [&](int, const Vector& u, double, const Vector&) { seen.push_back(u); });
  const int n = r.report.inner_iters;
  CHECK(r.report.residual_history.back() < 1e-6);
  CHECK(r.report.residual_history[static_cast<std::size_t>(n - 2)] >= 1e-6);
  // The returned iterate is one Newton step beyond the last recorded one.
  const double last = seen.back()[0];
  CHECK(r.u[0] == doctest::Approx(last - (last * last - 4) / (2 * last)).epsilon(1e-15));
  CHECK(r.u[0] != last);
}

TEST_CASE("picard: hand iterates and convergence") {
  std::vector<double> iterates;
  const DriveResult r = picard_drive(
      shifted_system(6, Preconditioner::FullA), input(scalar(0), 1e-10),
      [&](int, const Vector& u, double, const Vector&) { iterates.push_back(u[0]); });
  REQUIRE(iterates.size() >= 4);
  CHECK(iterates[1] == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(iterates[2] == doctest::Approx(6.0 / 7.0).epsilon(1e-12));
  CHECK(iterates[3] == doctest::Approx(6.0 / (1.0 + 6.0 / 7.0)).epsilon(1e-12));
  CHECK(std::abs(r.u[0] - 2.0) < 1e-8);
  CHECK(r.report.converged);
}

TEST_CASE("picard: exact start and linear systems") {
  const DriveResult r = picard_drive(shifted_system(6, Preconditioner::FullA), input(scalar(2), 1e-12));
  CHECK(r.report.converged_on_first);
  CHECK(r.report.inner_iters == 1);

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 6;
    const Matrix a = random_well_conditioned(rng, n);
    const Vector b = Vector::Random(n), u0 = 100 * Vector::Random(n);
    const NonlinearSystem sys = linear_system(a, b, Preconditioner::FullA);
    const DriveResult one = picard_drive(sys, input(u0, 1e-300, Cap(1)));
    CHECK((a * one.u - b).norm() <= 1e-12 * (1 + b.norm() + a.norm() * one.u.norm()));
    const DriveResult two = picard_drive(sys, input(u0, 1e-9));
    CHECK(two.report.inner_iters == 2);
    CHECK(two.report.residual_history[1] < 1e-12);
  }
}

TEST_CASE("newton on a linear system: second residual vanishes") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 8;
    const Matrix a = random_well_conditioned(rng, n);
    const Vector b = Vector::Random(n), u0 = 1e3 * Vector::Random(n);
    const DriveResult r =
        newton_drive(linear_system(a, b, Preconditioner::FullA), input(u0, 1e-9, Cap(2)));
    REQUIRE(r.report.inner_iters == 2);
    CHECK(r.report.residual_history[1] <= 1e-12 * r.report.residual_history[0]);
  }
}

TEST_CASE("recorded residuals replay from the recorded iterates") {
  const NonlinearSystem sys = shifted_system(6, Preconditioner::DiagonalOfA);
  std::vector<Vector> iterates;
  std::vector<std::size_t> b_hashes;
  const std::size_t b0 = hash_vector(sys.rhs);
  const DriveResult r = picard_drive(sys, input(scalar(0.3), 1e-12),
                                     [&](int, const Vector& u, double, const Vector& b) {
                                       iterates.push_back(u);
                                       b_hashes.push_back(hash_vector(b));
                                     });
  REQUIRE(iterates.size() == r.report.residual_history.size());
  for (std::size_t i = 0; i < iterates.size(); ++i) {
    const Vector res = sys.rhs - sys.matrix(iterates[i]).multiply(iterates[i]);
    const double replay = residual_norm(res, 1);
    CHECK(replay == doctest::Approx(r.report.residual_history[i]).epsilon(1e-14));
    CHECK(b_hashes[i] == b0);
  }
}

TEST_CASE("cap and batch bookkeeping") {
  const NonlinearSystem sys = shifted_system(6, Preconditioner::DiagonalOfA);
  for (int cap = 1; cap <= 12; ++cap) {
    const DriveResult r = picard_drive(sys, input(scalar(0), 1e-12, Cap(cap)));
    CHECK(r.report.inner_iters >= 1);
    CHECK(r.report.inner_iters <= cap);
    CHECK(r.report.residual_history.size() == static_cast<std::size_t>(r.report.inner_iters));
    CHECK(r.report.final_residual == r.report.residual_history.back());
  }
  for (int batch = 1; batch <= 5; ++batch) {
    for (int cap : {1000, 7}) {
      const DriveResult r = picard_drive(sys, input(scalar(0), 1e-9, Cap(cap), batch));
      const bool truncated = r.report.inner_iters == cap && !r.report.converged;
      if (!truncated) CHECK(r.report.inner_iters % batch == 0);
      CHECK(r.report.inner_iters <= cap);
    }
  }
}

TEST_CASE("batch check is skipped between batch boundaries") {
  // Converged-on-first is still reported, but the call runs a full batch.
  const DriveResult r =
      picard_drive(shifted_system(6, Preconditioner::FullA), input(scalar(2), 1e-12, Cap(), 3));
  CHECK(r.report.converged_on_first);
  CHECK(r.report.inner_iters == 3);
}

TEST_CASE("driver errors") {
  NonlinearSystem singular = square_root_system(4);
  CHECK_THROWS_AS(newton_drive(singular, input(scalar(0), 1e-12)), LinearSolveError);
  try {
    newton_drive(singular, input(scalar(0), 1e-12));
  } catch (const LinearSolveError& e) {
    CHECK(e.iteration() == 1);
  }
  NonlinearSystem m0 = linear_system(Matrix::Zero(2, 2), Vector::Ones(2), Preconditioner::FullA);
  CHECK_THROWS_AS(picard_drive(m0, input(Vector::Zero(2), 1e-12)), LinearSolveError);
  m0.preconditioner = Preconditioner::DiagonalOfA;
  CHECK_THROWS_AS(picard_drive(m0, input(Vector::Zero(2), 1e-12)), LinearSolveError);

  // Picard on u^2 = b from a far start with M = diag(A) overshoots to infinity.
  NonlinearSystem blow;
  blow.dim = 1;
  blow.rhs = scalar(1e300);
  blow.matrix = [](const Vector& u) { return SystemMatrix::diagonal(Vector::Constant(1, 1e-300 + 0 * u[0])); };
  CHECK_THROWS_AS(picard_drive(blow, input(scalar(1e300), 1e-12)), DivergenceError);

  // A tangent 1e12 times too stiff barely moves: uncapped calls stop with an error.
  NonlinearSystem crawl;
  crawl.dim = 1;
  crawl.rhs = scalar(1.0);
  crawl.matrix = [](const Vector&) { return SystemMatrix::diagonal(scalar(1.0)); };
  crawl.tangent = [](const Vector&) { return SystemMatrix::diagonal(scalar(1e12)); };
  try {
    newton_drive(crawl, input(scalar(0), 1e-6));
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() == kUncappedSafetyLimit);
  }
  const DriveResult capped = newton_drive(crawl, input(scalar(0), 1e-6, Cap(7)));
  CHECK(capped.report.inner_iters == 7);
  CHECK_FALSE(capped.report.converged);

  CHECK_THROWS_AS(newton_drive(square_root_system(4), input(Vector::Zero(2), 1e-12)),
                  ContractViolation);
  CHECK_THROWS_AS(newton_drive(square_root_system(4), input(scalar(std::nan("")), 1e-12)),
                  InvalidInput);
  NonlinearSystem no_tangent = square_root_system(4);
  no_tangent.tangent = nullptr;
  CHECK_THROWS_AS(newton_drive(no_tangent, input(scalar(1), 1e-12)), ContractViolation);
}

TEST_CASE("call_solver on the testbeds") {
  SUBCASE("unloaded solid returns zero displacement on first") {
    TubeProblem tube(Tube1DParams{});
    tube.begin_step(40);  // after the pulse
    const auto out = call_solver(tube.solid(),
                                 InterfaceField::zeros(tube.interface_size(), FieldRole::Traction),
                                 input(tube.initial_solid_state(), 1e-9));
    CHECK(out.output.role() == FieldRole::Displacement);
    CHECK(out.output.values().isZero(0.0));
    CHECK(out.report.converged_on_first);
    CHECK(out.report.wall_time >= 0.0);
  }
  SUBCASE("capped flow still returns output") {
    TubeProblem tube(Tube1DParams{});
    tube.begin_step(0);
    const auto out = call_solver(tube.flow(), tube.initial_displacement(),
                                 input(tube.initial_flow_state(), 1e-9, Cap(1)));
    CHECK(out.report.inner_iters == 1);
    CHECK(out.report.final_residual >= 1e-9);
    CHECK(out.output.role() == FieldRole::Traction);
    CHECK(out.output.size() == tube.interface_size());
  }
  SUBCASE("flow on the linear toy equals a direct solve") {
    const LinearToy toy = LinearToy::preset("stable");
    const Vector d = Vector::LinSpaced(4, -0.3, 0.7);
    const auto out = call_solver(toy.flow(), InterfaceField(d, FieldRole::Displacement),
                                 input(toy.initial_flow_state(), 1e-12));
    CHECK((out.u - toy.direct_flow_solve(d)).norm() <= 1e-12);
  }
  SUBCASE("errors are annotated with the solver name") {
    Tube1DParams p;
    TubeProblem tube(p);
    tube.begin_step(0);
    Vector crushed = Vector::Constant(tube.interface_size(), -2 * p.radius);
    try {
      call_solver(tube.flow(), InterfaceField(crushed, FieldRole::Displacement),
                  input(tube.initial_flow_state(), 1e-9));
      FAIL("expected a geometry error");
    } catch (const GeometryError& e) {
      CHECK(std::string(e.what()).rfind("flow solver: ", 0) == 0);
    }
  }
}

TEST_CASE("system matrix solve") {
  const SystemMatrix d = SystemMatrix::diagonal(Vector::Constant(3, 2.0));
  CHECK(d.is_diagonal());
  CHECK(d.rows() == 3);
  CHECK(d.solve(Vector::Constant(3, 4.0), 1, "m") == Vector::Constant(3, 2.0));
  CHECK(d.to_dense() == 2.0 * Matrix::Identity(3, 3));
  const SystemMatrix full(Matrix::Identity(2, 2));
  CHECK_FALSE(full.is_diagonal());
  CHECK(full.multiply(Vector::Ones(2)) == Vector::Ones(2));
}

TEST_CASE("driver names") {
  CHECK(parse_driver("newton") == DriverKind::Newton);
  CHECK(parse_driver("picard") == DriverKind::Picard);
  CHECK_THROWS_AS(parse_driver("gmres"), InvalidInput);
  CHECK(to_string(SolverId::Flow) == "flow");
  CHECK(to_string(SolverId::Solid) == "solid");
}
