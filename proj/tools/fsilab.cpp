// Command-line front end: run, sweep, replay, fit, contour.
#include "fsilab/study.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace fsilab;

namespace {

int cmd_run(const fs::path& config_path, const fs::path& out_dir) {
  const Config cfg = Config::load(config_path);
  const ModelSpec model = read_model(cfg);
  const CouplingConfig coupling = read_coupling(cfg);
  const CostFactors factors = read_cost_factors(cfg, {});
  cfg.require_all_used();

  auto problem = model.build();
  const SimulationResult sim = run_simulation(*problem, coupling);
  const RunRecord& rec = sim.record;

  std::ostringstream steps;
  steps << "step,coupling,flow,solid,fixed_point_norm,relative_norm,iqn_increment_norm\n";
  for (std::size_t i = 0; i < sim.steps.size(); ++i) {
    const TimeStepRecord& s = sim.steps[i];
    steps << s.step << ',' << s.coupling_iters << ',' << s.flow_iters << ',' << s.solid_iters;
    if (s.converged) {
      steps << ',' << format_real(s.accepted.fixed_point_norm) << ','
            << format_real(s.accepted.relative_norm) << ','
            << format_real(s.accepted.iqn_increment_norm);
    } else {
      steps << ",,,";
    }
    steps << '\n';
  }
  if (!out_dir.empty()) write_text(out_dir / "run.csv", steps.str());

  const Counts counts{rec.counters.coupling_total(), rec.counters.flow_total(),
                      rec.counters.solid_total()};
  std::printf("model %s: %s\n", problem->name().c_str(),
              rec.converged ? "converged" : ("diverged: " + rec.failure).c_str());
  std::printf("N_c %ld  N_f %ld  N_s %ld\n", counts.n_c, counts.n_f, counts.n_s);
  std::printf("T_f %.4f s  T_s %.4f s  T_c %.4f s\n", rec.timings.flow, rec.timings.solid,
              rec.timings.coupling);
  if (factors.gamma() + factors.c_iter_f + factors.c_iter_s > 0) {
    std::printf("equivalent time %.6g s\n", equivalent_time(counts, factors));
  }
  return rec.converged ? 0 : 1;
}

int cmd_sweep(const fs::path& config_path, const fs::path& out_dir, int workers) {
  const Config cfg = Config::load(config_path);
  SweepSpec spec = read_sweep_spec(cfg);
  cfg.require_all_used();
  if (workers > 0) spec.workers = workers;
  const SweepResult result = run_sweep(spec);
  const std::string csv = sweep_csv(result.rows);
  write_text(out_dir / "sweep.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_replay(const fs::path& table_path, const fs::path& factors_path,
               const std::string& framework) {
  const PublishedTable table = read_published_table(table_path);
  const auto all = read_regression_summary(factors_path);
  const std::string name = framework.empty() ? table.framework : framework;
  if (name.empty()) throw InvalidInput("table has no '# framework:' line; pass --framework");
  const ReplayReport report = replay_published(table, find_framework(all, name).factors);
  std::cout << "framework " << name << '\n' << format_replay(report);
  return report.pass ? 0 : 1;
}

int cmd_fit(const fs::path& sweep_path, const fs::path& out_dir, double noise,
            std::uint64_t seed) {
  auto rows = read_sweep_csv(sweep_path);
  if (noise > 0) rows = apply_timing_noise(std::move(rows), noise, seed);
  const std::string text = format_fit(fit_from_runs(rows));
  if (!out_dir.empty()) write_text(out_dir / "fit.csv", text);
  std::cout << text;
  return 0;
}

int cmd_contour(const fs::path& sweep_path, const fs::path& out_dir, const std::string& quantity) {
  const ContourQuantity q = parse_contour_quantity(quantity);
  const std::string text = contour_csv(read_sweep_csv(sweep_path), q);
  write_text(out_dir / ("contour_" + to_string(q) + ".csv"), text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partitioned FSI coupling lab"};
  app.require_subcommand(1);

  fs::path config, out = ".", table, factors, sweep;
  std::string framework, quantity = "teq_norm";
  int workers = 0;
  double noise = 0.0;
  std::uint64_t seed = 1;

  auto* run = app.add_subcommand("run", "Run a single simulation");
  run->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Directory for run.csv");

  auto* sw = app.add_subcommand("sweep", "Run a (nmax_f, nmax_s) sweep");
  sw->add_option("--config", config, "Sweep spec file")->required()->check(CLI::ExistingFile);
  sw->add_option("--out", out, "Directory for sweep.csv");
  sw->add_option("--workers", workers, "Worker threads (overrides the spec)")
      ->check(CLI::PositiveNumber);

  auto* rp = app.add_subcommand("replay", "Replay a published table through the cost model");
  rp->add_option("table", table, "Table CSV")->required()->check(CLI::ExistingFile);
  rp->add_option("--factors", factors, "Cost-factor summary CSV")
      ->required()
      ->check(CLI::ExistingFile);
  rp->add_option("--framework", framework, "Factor row to use (default: from table header)");

  auto* ft = app.add_subcommand("fit", "Fit cost factors from sweep timings");
  ft->add_option("sweep", sweep, "sweep.csv")->required()->check(CLI::ExistingFile);
  ft->add_option("--out", out, "Directory for fit.csv");
  ft->add_option("--noise", noise, "Relative timing noise to inject")->check(CLI::Range(0.0, 0.99));
  ft->add_option("--seed", seed, "Noise seed");

  auto* ct = app.add_subcommand("contour", "Emit a contour grid from sweep results");
  ct->add_option("sweep", sweep, "sweep.csv")->required()->check(CLI::ExistingFile);
  ct->add_option("--quantity", quantity, "N_c, N_f, N_s or teq_norm");
  ct->add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(config, run->count("--out") ? out : fs::path());
    if (*sw) return cmd_sweep(config, out, workers);
    if (*rp) return cmd_replay(table, factors, framework);
    if (*ft) return cmd_fit(sweep, ft->count("--out") ? out : fs::path(), noise, seed);
    if (*ct) return cmd_contour(sweep, out, quantity);
  } catch (const fsilab::InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fsilab::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
