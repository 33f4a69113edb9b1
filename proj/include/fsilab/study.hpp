#pragma once

#include "fsilab/coupling.hpp"
#include "fsilab/cost.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace fsilab {

// ---------------------------------------------------------------------------
// Flat key = value configuration

/// `key = value` lines with `#` comments. Keys may contain dots. Every key must
/// be consumed by the reader; `require_all_used` reports the leftovers.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  Cap get_cap(const std::string& key, Cap fallback) const;
  std::vector<Cap> get_caps(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void require_all_used() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry* find(const std::string& key) const;

  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
};

enum class ModelKind { Tube1D, LinearToy, ScalarToy };

std::string to_string(ModelKind kind);

struct ModelSpec {
  ModelKind kind = ModelKind::Tube1D;
  Tube1DParams tube;
  std::string toy_preset;  // empty: use the explicit radius below
  int toy_dim_f = 4;
  int toy_dim_s = 4;
  double toy_spectral_radius = 0.5;
  int toy_steps = 1;
  std::uint64_t toy_seed = 7;
  int scalar_steps = 1;

  std::unique_ptr<CoupledProblem> build() const;
};

ModelSpec read_model(const Config& config);
CouplingConfig read_coupling(const Config& config);
CostFactors read_cost_factors(const Config& config, const CostFactors& fallback);

// ---------------------------------------------------------------------------
// Sweeps

enum class TimingSource { Model, Wall };

struct SweepSpec {
  ModelSpec model;
  CouplingConfig base;
  std::vector<Cap> grid_f;
  std::vector<Cap> grid_s;
  int workers = 1;
  /// Model timings are synthesized from `factors`, which keeps sweep.csv reproducible.
  TimingSource timing = TimingSource::Model;
  CostFactors factors;

  void validate() const;
};

SweepSpec read_sweep_spec(const Config& config);

struct SweepRow {
  Cap nmax_f;
  Cap nmax_s;
  bool converged = false;
  Counts counts;
  double t_f = 0.0;
  double t_s = 0.0;
  double t_c = 0.0;
  std::optional<double> teq;
  std::optional<double> teq_norm;
  std::optional<double> max_dev;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by (grid_f index, grid_s index)
  /// Accepted displacement per step for every cell, same order as rows.
  std::vector<std::vector<Vector>> snapshots;
};

SweepResult run_sweep(const SweepSpec& spec);

extern const std::vector<std::string> kSweepColumns;

std::string format_real(double value);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Published tables

struct PublishedTableRow {
  Cap nmax_f;
  Cap nmax_s;
  std::optional<double> teq_norm;
  std::optional<Counts> counts;
  int line = 0;
};

struct PublishedTable {
  std::string framework;
  std::vector<PublishedTableRow> rows;
};

PublishedTable parse_published_table(const std::string& text);
PublishedTable read_published_table(const std::filesystem::path& path);

struct FrameworkFactors {
  std::string framework;
  CostFactors factors;
  double gamma_published = 0.0;
  double mape_percent = 0.0;
  double maxape_percent = 0.0;
};

std::vector<FrameworkFactors> parse_regression_summary(const std::string& text);
std::vector<FrameworkFactors> read_regression_summary(const std::filesystem::path& path);
const FrameworkFactors& find_framework(const std::vector<FrameworkFactors>& all,
                                       const std::string& name);

struct ReplayCell {
  Cap nmax_f;
  Cap nmax_s;
  double published = 0.0;
  double recomputed = 0.0;
  double abs_error = 0.0;
};

struct ReplayReport {
  std::vector<ReplayCell> cells;  // non-missing rows only
  double max_error = 0.0;
  std::optional<ReplayCell> worst;
  bool pass = false;
};

inline constexpr double kReplayTolerance = 0.01;

ReplayReport replay_published(const PublishedTable& table, const CostFactors& factors);
std::string format_replay(const ReplayReport& report);

// ---------------------------------------------------------------------------
// Regression from runs

struct FitReport {
  CostFactors factors;
  double rmse_f = 0.0, rrmse_f = 0.0;
  double rmse_s = 0.0, rrmse_s = 0.0;
  double rmse_c = 0.0, rrmse_c = 0.0;
  PercentageErrors total;  // equivalent time vs measured total time
  int samples = 0;
};

FitReport fit_from_runs(const std::vector<SweepRow>& rows);
std::string format_fit(const FitReport& report);

/// Multiplies each timing by (1 + u), u uniform in [-rel, rel], seeded.
std::vector<SweepRow> apply_timing_noise(std::vector<SweepRow> rows, double rel,
                                         std::uint64_t seed);

// ---------------------------------------------------------------------------
// Contours

enum class ContourQuantity { Nc, Nf, Ns, TeqNorm };

ContourQuantity parse_contour_quantity(const std::string& text);
std::string to_string(ContourQuantity quantity);

/// Grid CSV: header row holds the nmax_s caps, first column the nmax_f caps.
std::string contour_csv(const std::vector<SweepRow>& rows, ContourQuantity quantity);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace fsilab
