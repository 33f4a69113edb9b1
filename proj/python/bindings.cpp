#include "fsilab/study.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace fsilab;

namespace {

py::dict counts_dict(const Counts& c) {
  py::dict d;
  d["N_c"] = c.n_c;
  d["N_f"] = c.n_f;
  d["N_s"] = c.n_s;
  return d;
}

Counts counts_from(long n_c, long n_f, long n_s) { return {n_c, n_f, n_s}; }

py::dict run_config(const std::string& text) {
  const Config cfg = Config::parse(text);
  const ModelSpec model = read_model(cfg);
  const CouplingConfig coupling = read_coupling(cfg);
  read_cost_factors(cfg, {});
  cfg.require_all_used();
  auto problem = model.build();
  SimulationResult sim;
  {
    py::gil_scoped_release release;
    sim = run_simulation(*problem, coupling);
  }
  const RunRecord& rec = sim.record;
  py::dict out = counts_dict(
      {rec.counters.coupling_total(), rec.counters.flow_total(), rec.counters.solid_total()});
  out["converged"] = rec.converged;
  out["failed_step"] = rec.failed_step ? py::cast(*rec.failed_step) : py::none();
  out["failure"] = rec.failure;
  py::list snaps;
  for (const Vector& s : rec.snapshots) snaps.append(std::vector<double>(s.begin(), s.end()));
  out["snapshots"] = snaps;
  py::list coupling_iters;
  for (const TimeStepRecord& s : sim.steps) coupling_iters.append(s.coupling_iters);
  out["coupling_iters"] = coupling_iters;
  return out;
}

std::string sweep_config(const std::string& text, int workers) {
  const Config cfg = Config::parse(text);
  SweepSpec spec = read_sweep_spec(cfg);
  cfg.require_all_used();
  if (workers > 0) spec.workers = workers;
  py::gil_scoped_release release;
  return sweep_csv(run_sweep(spec).rows);
}

}  // namespace

PYBIND11_MODULE(_fsilab, m) {
  m.doc() = "Partitioned FSI coupling lab";

  // Translators run newest first, so the base class goes in first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<RankDeficient>(m, "RankDeficient", PyExc_ArithmeticError);

  py::class_<CostFactors>(m, "CostFactors")
      .def(py::init([](double c_couple, double c_fix_f, double c_iter_f, double c_fix_s,
                       double c_iter_s) {
             CostFactors f{c_couple, c_fix_f, c_iter_f, c_fix_s, c_iter_s};
             f.validate();
             return f;
           }),
           py::arg("c_couple") = 0.0, py::arg("c_fix_f") = 0.0, py::arg("c_iter_f") = 0.0,
           py::arg("c_fix_s") = 0.0, py::arg("c_iter_s") = 0.0)
      .def_readwrite("c_couple", &CostFactors::c_couple)
      .def_readwrite("c_fix_f", &CostFactors::c_fix_f)
      .def_readwrite("c_iter_f", &CostFactors::c_iter_f)
      .def_readwrite("c_fix_s", &CostFactors::c_fix_s)
      .def_readwrite("c_iter_s", &CostFactors::c_iter_s)
      .def_property_readonly("gamma", &CostFactors::gamma)
      .def("__repr__", [](const CostFactors& f) {
        return "CostFactors(c_couple=" + format_real(f.c_couple) +
               ", c_fix_f=" + format_real(f.c_fix_f) + ", c_iter_f=" + format_real(f.c_iter_f) +
               ", c_fix_s=" + format_real(f.c_fix_s) + ", c_iter_s=" + format_real(f.c_iter_s) +
               ")";
      });

  m.def(
      "equivalent_time",
      [](long n_c, long n_f, long n_s, const CostFactors& f) {
        return equivalent_time(counts_from(n_c, n_f, n_s), f);
      },
      py::arg("n_c"), py::arg("n_f"), py::arg("n_s"), py::arg("factors"));
  m.def("fit_solver_cost",
        [](const std::vector<long>& n_c, const std::vector<long>& n_p,
           const std::vector<double>& t_p) {
          const SolverCostFit f = fit_solver_cost(n_c, n_p, t_p);
          return py::make_tuple(f.c_fix, f.c_iter);
        });
  m.def("fit_coupling_cost", &fit_coupling_cost);
  m.def("rrmse", &rrmse);
  m.def("rmse", &rmse);
  m.def("mape_maxape", [](const std::vector<double>& a, const std::vector<double>& p) {
    const PercentageErrors e = mape_maxape(a, p);
    return py::make_tuple(e.mape, e.maxape);
  });

  m.def(
      "framework_factors",
      [](const std::filesystem::path& summary) {
        py::dict out;
        for (const FrameworkFactors& f : read_regression_summary(summary)) {
          out[py::str(f.framework)] = f.factors;
        }
        return out;
      },
      py::arg("summary_csv"));

  m.def(
      "replay",
      [](const std::filesystem::path& table, const CostFactors& factors) {
        const ReplayReport r = replay_published(read_published_table(table), factors);
        py::dict out;
        out["pass"] = r.pass;
        out["max_error"] = r.max_error;
        py::list cells;
        for (const ReplayCell& c : r.cells) {
          cells.append(py::make_tuple(c.nmax_f.to_string(), c.nmax_s.to_string(), c.published,
                                      c.recomputed));
        }
        out["cells"] = cells;
        return out;
      },
      py::arg("table_csv"), py::arg("factors"));

  m.def("run", &run_config, py::arg("config_text"),
        "Run one simulation from config text; returns counts, status and snapshots.");
  m.def("sweep", &sweep_config, py::arg("config_text"), py::arg("workers") = 0,
        "Run a sweep from spec text; returns sweep.csv content.");
  m.def(
      "fit",
      [](const std::string& sweep_text, double noise, std::uint64_t seed) {
        auto rows = parse_sweep_csv(sweep_text);
        if (noise > 0) rows = apply_timing_noise(std::move(rows), noise, seed);
        const FitReport r = fit_from_runs(rows);
        py::dict out;
        out["factors"] = r.factors;
        out["mape"] = r.total.mape;
        out["maxape"] = r.total.maxape;
        out["samples"] = r.samples;
        return out;
      },
      py::arg("sweep_csv"), py::arg("noise") = 0.0, py::arg("seed") = 1);
  m.def(
      "contour",
      [](const std::string& sweep_text, const std::string& quantity) {
        return contour_csv(parse_sweep_csv(sweep_text), parse_contour_quantity(quantity));
      },
      py::arg("sweep_csv"), py::arg("quantity") = "teq_norm");

  m.def(
      "linear_toy_oracle",
      [](const std::string& preset, int dim_f, int dim_s) {
        const LinearToy toy = LinearToy::preset(preset, dim_f, dim_s);
        const Vector d = toy.monolithic_displacement();
        return py::make_tuple(toy.spectral_radius(), std::vector<double>(d.begin(), d.end()));
      },
      py::arg("preset"), py::arg("dim_f") = 4, py::arg("dim_s") = 4);
}
