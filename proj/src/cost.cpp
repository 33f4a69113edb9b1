#include "fsilab/cost.hpp"

#include "fsilab/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace fsilab {

void CostFactors::validate() const {
  for (double c : {c_couple, c_fix_f, c_iter_f, c_fix_s, c_iter_s}) {
    if (!(c >= 0) || !std::isfinite(c)) {
      throw InvalidInput("cost factors must be finite and non-negative");
    }
  }
}

CostFactors CostFactors::scaled(double factor) const {
  return {c_couple * factor, c_fix_f * factor, c_iter_f * factor, c_fix_s * factor,
          c_iter_s * factor};
}

namespace {

void require_counts(const Counts& c) {
  if (c.n_c < 0 || c.n_f < 0 || c.n_s < 0) throw InvalidInput("counts must be non-negative");
}

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw InvalidInput(std::string(what) + ": length mismatch");
  if (a == 0) throw InvalidInput(std::string(what) + ": empty input");
}

}  // namespace

double equivalent_time(const Counts& counts, const CostFactors& factors) {
  require_counts(counts);
  return static_cast<double>(counts.n_c) * factors.gamma() +
         static_cast<double>(counts.n_f) * factors.c_iter_f +
         static_cast<double>(counts.n_s) * factors.c_iter_s;
}

double literature_measure(const Counts& counts, double cost_per_coupling_iter) {
  require_counts(counts);
  if (!(cost_per_coupling_iter >= 0)) throw InvalidInput("cost per coupling iteration must be >= 0");
  return static_cast<double>(counts.n_c) * cost_per_coupling_iter;
}

SolverCostFit fit_solver_cost(const std::vector<long>& n_c, const std::vector<long>& n_p,
                              const std::vector<double>& t_p) {
  if (n_c.size() != n_p.size() || n_c.size() != t_p.size()) {
    throw InvalidInput("fit_solver_cost: length mismatch");
  }
  const auto m = static_cast<Eigen::Index>(n_c.size());
  if (m < 2) throw RankDeficient("fit_solver_cost needs at least two samples");
  Matrix x(m, 2);
  Vector y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    x(i, 0) = static_cast<double>(n_c[static_cast<std::size_t>(i)]);
    x(i, 1) = static_cast<double>(n_p[static_cast<std::size_t>(i)]);
    y[i] = t_p[static_cast<std::size_t>(i)];
  }
  if (!x.allFinite() || !y.allFinite()) throw InvalidInput("fit_solver_cost: non-finite input");
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2) {
    throw RankDeficient("collinear design: N_c and N_p are proportional across samples; "
                        "widen the sweep grid");
  }
  const Vector c = qr.solve(y);
  return {c[0], c[1]};
}

double fit_coupling_cost(const std::vector<long>& n_c, const std::vector<double>& t_c) {
  require_same_length(n_c.size(), t_c.size(), "fit_coupling_cost");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n_c.size(); ++i) {
    const auto n = static_cast<double>(n_c[i]);
    num += n * t_c[i];
    den += n * n;
  }
  if (!(den > 0)) throw RankDeficient("fit_coupling_cost: every N_c is zero");
  return num / den;
}

double rrmse(const std::vector<double>& actual, const std::vector<double>& fitted) {
  require_same_length(actual.size(), fitted.size(), "rrmse");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    num += (actual[i] - fitted[i]) * (actual[i] - fitted[i]);
    den += actual[i] * actual[i];
  }
  if (!(den > 0)) throw InvalidInput("rrmse: all actual values are zero");
  return std::sqrt(num / den);
}

double rmse(const std::vector<double>& actual, const std::vector<double>& fitted) {
  require_same_length(actual.size(), fitted.size(), "rmse");
  double num = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    num += (actual[i] - fitted[i]) * (actual[i] - fitted[i]);
  }
  return std::sqrt(num / static_cast<double>(actual.size()));
}

PercentageErrors mape_maxape(const std::vector<double>& actual,
                             const std::vector<double>& predicted) {
  require_same_length(actual.size(), predicted.size(), "mape_maxape");
  PercentageErrors out;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0) throw InvalidInput("mape_maxape: zero actual value");
    const double ape = std::abs(actual[i] - predicted[i]) / std::abs(actual[i]);
    out.mape += ape;
    out.maxape = std::max(out.maxape, ape);
  }
  out.mape /= static_cast<double>(actual.size());
  return out;
}

std::vector<std::optional<double>> scenario_cost(const std::vector<std::optional<Counts>>& grid,
                                                 const CostFactors& factors) {
  factors.validate();
  std::vector<std::optional<double>> out;
  out.reserve(grid.size());
  for (const auto& cell : grid) {
    out.push_back(cell ? std::optional<double>(equivalent_time(*cell, factors)) : std::nullopt);
  }
  return out;
}

CostFactors scenario_factors(Scenario scenario) {
  // Gamma is carried entirely by c_couple so that gamma() hits the target exactly.
  switch (scenario) {
    case Scenario::AllOnes: return {1.0, 0.0, 1.0, 0.0, 1.0};
    case Scenario::CheapFlowIteration: return {1.0, 0.0, 0.01, 0.0, 1.0};
    case Scenario::ExpensiveCoupling: return {120.0, 0.0, 1.0, 0.0, 1.0};
  }
  return {};
}

}  // namespace fsilab
