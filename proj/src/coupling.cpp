#include "fsilab/coupling.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace fsilab {

IqnHistory::IqnHistory(int reuse_q) : q_(reuse_q) {
  if (reuse_q < 0) throw InvalidInput("reuse_q must be non-negative");
}

void IqnHistory::begin_step(int step) {
  while (!ages_.empty() && ages_.back() < step - q_) {
    v_.pop_back();
    w_.pop_back();
    ages_.pop_back();
  }
}

void IqnHistory::push(Vector v, Vector w, int step) {
  if (v.size() != w.size()) throw ContractViolation("IQN columns must have equal length");
  if (!v_.empty() && v.size() != v_.front().size()) {
    throw ContractViolation("IQN column length changed");
  }
  v_.push_front(std::move(v));
  w_.push_front(std::move(w));
  ages_.push_front(step);
}

void IqnHistory::clear() {
  v_.clear();
  w_.clear();
  ages_.clear();
}

namespace {

Matrix stack(const std::deque<Vector>& cols) {
  if (cols.empty()) return Matrix();
  Matrix m(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = cols[j];
  return m;
}

}  // namespace

Matrix IqnHistory::v_matrix() const { return stack(v_); }
Matrix IqnHistory::w_matrix() const { return stack(w_); }

AitkenResult aitken_omega(const Vector& r_k, const Vector& r_km1, double omega_prev) {
  if (r_k.size() != r_km1.size()) throw ContractViolation("Aitken residuals differ in length");
  const Vector diff = r_k - r_km1;
  const double denom = diff.squaredNorm();
  if (!(denom > 0)) return {omega_prev, true};
  const double omega = -omega_prev * r_km1.dot(diff) / denom;
  return {std::clamp(omega, kOmegaMin, kOmegaMax), false};
}

std::vector<int> qr_filter(const Matrix& v, double eps_fil) {
  if (!(eps_fil > 0)) throw InvalidInput("eps_fil must be positive");
  std::vector<int> retained;
  const Eigen::Index m = v.rows();
  std::vector<Vector> reflectors;  // Householder vectors, reflector k acts on rows k..m-1
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    const double col_norm = v.col(j).norm();
    if (!(col_norm > 0)) continue;
    const auto r = static_cast<Eigen::Index>(reflectors.size());
    if (r >= m) continue;  // full rank already reached
    Vector x = v.col(j);
    for (Eigen::Index k = 0; k < r; ++k) {
      const Vector& h = reflectors[static_cast<std::size_t>(k)];
      auto tail = x.tail(m - k);
      tail -= 2.0 * h * h.dot(tail);
    }
    const Vector rest = x.tail(m - r);
    const double rjj = rest.norm();
    if (rjj < eps_fil * col_norm) continue;
    Vector h = rest;
    h[0] += (rest[0] >= 0 ? 1.0 : -1.0) * rjj;
    const double hn = h.norm();
    if (hn > 0) h /= hn;
    reflectors.push_back(std::move(h));
    retained.push_back(static_cast<int>(j));
  }
  return retained;
}

IqnUpdate iqn_ils_update(const IqnHistory& hist, const Vector& r_k, const Vector& d_tilde,
                         double eps_fil, double omega_fallback) {
  if (r_k.size() != d_tilde.size()) throw ContractViolation("IQN residual and d~ differ in length");
  IqnUpdate out;
  const Matrix v = hist.v_matrix();
  if (!hist.empty()) {
    if (v.rows() != r_k.size()) throw ContractViolation("IQN history length mismatch");
    out.retained = qr_filter(v, eps_fil);
  }
  if (out.retained.empty()) {
    out.fallback = true;
    out.d_next = d_tilde - (1.0 - omega_fallback) * r_k;
    out.increment_norm = 0.0;
    return out;
  }
  const Matrix w = hist.w_matrix();
  const auto cols = static_cast<Eigen::Index>(out.retained.size());
  Matrix vr(v.rows(), cols), wr(w.rows(), cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    vr.col(c) = v.col(out.retained[static_cast<std::size_t>(c)]);
    wr.col(c) = w.col(out.retained[static_cast<std::size_t>(c)]);
  }
  const Vector alpha = vr.householderQr().solve(Vector(-r_k));
  const Vector increment = wr * alpha;
  out.d_next = d_tilde + increment;
  out.increment_norm = increment.norm();
  return out;
}

bool check_convergence(const SolverCallReport& flow, const SolverCallReport& solid,
                       const Criterion& criterion, const Vector& r_k, const Vector& d_k) {
  if (criterion.mode == CriterionMode::FirstResidual) {
    return flow.converged_on_first && solid.converged_on_first;
  }
  double norm = r_k.norm();
  if (criterion.relative) {
    const double dn = d_k.norm();
    norm = dn > 0 ? norm / dn : std::numeric_limits<double>::infinity();
    if (r_k.norm() == 0) norm = 0;
  }
  return norm < criterion.eps_c;
}

CouplingState CouplingState::initial(const CoupledProblem& problem) {
  return {problem.initial_displacement(), problem.initial_flow_state(),
          problem.initial_solid_state()};
}

namespace {

StepDiagnostics diagnostics_for(const Vector& r, const Vector& d, double increment) {
  StepDiagnostics out;
  out.fixed_point_norm = r.norm();
  const double dn = d.norm();
  out.relative_norm = dn > 0 ? out.fixed_point_norm / dn : std::numeric_limits<double>::infinity();
  out.iqn_increment_norm = increment;
  return out;
}

}  // namespace

TimeStepRecord run_time_step(CoupledProblem& problem, const CouplingConfig& config,
                             CouplingState& state, IqnHistory& hist, int step, bool audit) {
  config.validate();
  problem.begin_step(step);
  hist.begin_step(step);

  TimeStepRecord rec;
  rec.step = step;

  SolverCallInput flow_in{state.u_flow, config.eps_f, config.n_max_f, config.batch_size_f};
  SolverCallInput solid_in{state.u_solid, config.eps_s, config.n_max_s, 1};

  Vector d = state.displacement.values();
  Vector r_prev, d_tilde_prev;
  double omega = config.omega0;
  double last_increment = 0.0;
  double first_norm = 0.0;

  auto fail = [&](const std::string& why) -> StepDiverged {
    return StepDiverged(why, rec);
  };

  for (int k = 1; k <= config.max_coupling_iters_per_step; ++k) {
    const InterfaceField d_field(d, FieldRole::Displacement);
    SolverCallResult flow_out = [&] {
      try {
        flow_in.u0 = state.u_flow;
        return call_solver(problem.flow(), d_field, flow_in);
      } catch (const LinearSolveError& e) {
        throw fail(e.what());
      } catch (const DivergenceError& e) {
        throw fail(e.what());
      } catch (const GeometryError& e) {
        throw fail(e.what());
      }
    }();
    rec.coupling_iters = k;
    rec.flow_iters += flow_out.report.inner_iters;
    rec.flow_iters_per_call.push_back(flow_out.report.inner_iters);
    rec.flow_time += flow_out.report.wall_time;
    state.u_flow = flow_out.u;

    SolverCallResult solid_out = [&] {
      try {
        solid_in.u0 = state.u_solid;
        return call_solver(problem.solid(), flow_out.output, solid_in);
      } catch (const LinearSolveError& e) {
        throw fail(e.what());
      } catch (const DivergenceError& e) {
        throw fail(e.what());
      } catch (const GeometryError& e) {
        throw fail(e.what());
      }
    }();
    rec.solid_iters += solid_out.report.inner_iters;
    rec.solid_iters_per_call.push_back(solid_out.report.inner_iters);
    rec.solid_time += solid_out.report.wall_time;
    state.u_solid = solid_out.u;

    const Vector& d_tilde = solid_out.output.values();
    const Vector r = d_tilde - d;
    const double norm = r.norm();
    rec.residual_norms.push_back(norm);
    if (!std::isfinite(norm)) throw fail("fixed-point residual is not finite");
    if (k == 1) {
      first_norm = norm;
    } else if (norm > config.divergence_growth * first_norm) {
      throw fail("fixed-point residual grew beyond the divergence threshold");
    }

    if (k > 1) hist.push(r - r_prev, d_tilde - d_tilde_prev, step);

    if (check_convergence(flow_out.report, solid_out.report, config.criterion, r, d)) {
      rec.converged = true;
      rec.accepted = diagnostics_for(r, d, last_increment);
      if (audit) {
        SolverCallInput f = flow_in, s = solid_in;
        f.u0 = state.u_flow;
        s.u0 = state.u_solid;
        rec.audit_flow_first =
            call_solver(problem.flow(), d_field, f).report.residual_history.front();
        rec.audit_solid_first =
            call_solver(problem.solid(), flow_out.output, s).report.residual_history.front();
      }
      state.displacement = d_field;
      problem.accept_step(state.u_flow, state.u_solid, d_field);
      return rec;
    }

    Vector d_next;
    switch (config.accel) {
      case Acceleration::Constant:
        d_next = d + config.omega0 * r;
        last_increment = 0.0;
        break;
      case Acceleration::Aitken:
        if (k > 1) {
          const AitkenResult a = aitken_omega(r, r_prev, omega);
          omega = a.omega;
          if (a.stagnated) ++rec.aitken_stagnations;
        }
        d_next = d + omega * r;
        last_increment = 0.0;
        break;
      case Acceleration::IQNILS: {
        const IqnUpdate u = iqn_ils_update(hist, r, d_tilde, config.eps_fil, config.omega0);
        if (u.fallback && !hist.empty()) ++rec.iqn_fallbacks;
        d_next = u.d_next;
        last_increment = u.increment_norm;
        break;
      }
    }
    r_prev = r;
    d_tilde_prev = d_tilde;
    d = std::move(d_next);
    if (!d.allFinite()) throw fail("coupling update is not finite");
  }
  throw fail("no convergence within " + std::to_string(config.max_coupling_iters_per_step) +
             " coupling iterations");
}

SimulationResult run_simulation(CoupledProblem& problem, const CouplingConfig& config,
                                bool audit) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  SimulationResult out;
  RunRecord& rec = out.record;
  CouplingState state = CouplingState::initial(problem);
  IqnHistory hist(config.reuse_q);

  auto add = [&](const TimeStepRecord& s) {
    rec.counters.add_step({s.step, s.coupling_iters, s.flow_iters, s.solid_iters});
    rec.timings.flow += s.flow_time;
    rec.timings.solid += s.solid_time;
  };

  rec.converged = true;
  for (int step = 0; step < problem.num_steps(); ++step) {
    try {
      TimeStepRecord s = run_time_step(problem, config, state, hist, step, audit);
      add(s);
      rec.snapshots.push_back(state.displacement.values());
      rec.diagnostics.push_back(s.accepted);
      out.steps.push_back(std::move(s));
    } catch (const StepDiverged& e) {
      add(e.partial());
      out.steps.push_back(e.partial());
      rec.converged = false;
      rec.failed_step = e.step();
      rec.failure = e.what();
      break;
    }
  }
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rec.timings.coupling = std::max(0.0, total - rec.timings.flow - rec.timings.solid);
  return out;
}

}  // namespace fsilab
