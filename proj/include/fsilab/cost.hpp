#pragma once

#include "fsilab/core.hpp"

#include <string>
#include <vector>

namespace fsilab {

/// Seconds per coupling iteration, per solver call and per inner iteration.
struct CostFactors {
  double c_couple = 0.0;
  double c_fix_f = 0.0;
  double c_iter_f = 0.0;
  double c_fix_s = 0.0;
  double c_iter_s = 0.0;

  double gamma() const { return c_couple + c_fix_f + c_fix_s; }
  void validate() const;
  CostFactors scaled(double factor) const;
};

struct Counts {
  long n_c = 0;
  long n_f = 0;
  long n_s = 0;
};

struct TimingSample {
  Counts counts;
  double t_f = 0.0;
  double t_s = 0.0;
  double t_c = 0.0;

  double total() const { return t_f + t_s + t_c; }
};

/// C = N^c Gamma + N^f c_iter_f + N^s c_iter_s.
double equivalent_time(const Counts& counts, const CostFactors& factors);

/// N^c times a fixed cost per coupling iteration.
double literature_measure(const Counts& counts, double cost_per_coupling_iter);

struct SolverCostFit {
  double c_fix = 0.0;
  double c_iter = 0.0;
};

/// Zero-intercept least squares of T_p on (N_c, N_p). Throws RankDeficient
/// when the two design columns are (numerically) collinear or fewer than two
/// samples are given.
SolverCostFit fit_solver_cost(const std::vector<long>& n_c, const std::vector<long>& n_p,
                              const std::vector<double>& t_p);

/// Zero-intercept line sum(N_c T_c) / sum(N_c^2).
double fit_coupling_cost(const std::vector<long>& n_c, const std::vector<double>& t_c);

double rrmse(const std::vector<double>& actual, const std::vector<double>& fitted);
double rmse(const std::vector<double>& actual, const std::vector<double>& fitted);

struct PercentageErrors {
  double mape = 0.0;    // fraction, not percent
  double maxape = 0.0;
};
PercentageErrors mape_maxape(const std::vector<double>& actual,
                             const std::vector<double>& predicted);

/// Equivalent time of every cell; cells without counts stay empty.
std::vector<std::optional<double>> scenario_cost(const std::vector<std::optional<Counts>>& grid,
                                                 const CostFactors& factors);

/// Cost-factor scenarios of the varying-cost contour study.
enum class Scenario { AllOnes, CheapFlowIteration, ExpensiveCoupling };
CostFactors scenario_factors(Scenario scenario);

}  // namespace fsilab
