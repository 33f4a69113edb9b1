#include "fsilab/study.hpp"

#include "fsilab/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace fsilab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

double parse_double(const std::string& text, int line, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError("invalid number '" + text + "' for " + what, line);
  }
}

long parse_long(const std::string& text, int line, const std::string& what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size() || v < 0) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError("invalid count '" + text + "' for " + what, line);
  }
}

Cap parse_cap(const std::string& text, int line) {
  try {
    return Cap::parse(text);
  } catch (const InvalidInput& e) {
    throw ParseError(e.what(), line);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

Config Config::parse(const std::string& text) {
  Config cfg;
  int n = 0;
  for (const std::string& raw : lines_of(text)) {
    ++n;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", n);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", n);
    if (cfg.entries_.count(key)) throw ParseError("duplicate key '" + key + "'", n);
    cfg.entries_[key] = {value, n};
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) { return parse(read_text(path)); }

const Config::Entry* Config::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string Config::get(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw InvalidInput("missing config key '" + key + "'");
  return e->value;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  return e ? parse_double(e->value, e->line, key) : fallback;
}

int Config::get_int(const std::string& key, int fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  const double v = parse_double(e->value, e->line, key);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ParseError("expected an integer for " + key, e->line);
  return static_cast<int>(v);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  throw ParseError("expected true/false for " + key, e->line);
}

Cap Config::get_cap(const std::string& key, Cap fallback) const {
  const Entry* e = find(key);
  return e ? parse_cap(e->value, e->line) : fallback;
}

std::vector<Cap> Config::get_caps(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw InvalidInput("missing config key '" + key + "'");
  std::vector<Cap> out;
  for (const std::string& tok : split(e->value, ',')) out.push_back(parse_cap(tok, e->line));
  return out;
}

void Config::set(const std::string& key, const std::string& value) {
  entries_[key] = {value, 0};
  used_.erase(key);
}

void Config::require_all_used() const {
  for (const auto& [key, entry] : entries_) {
    if (!used_.count(key)) throw ParseError("unknown config key '" + key + "'", entry.line);
  }
}

// ---------------------------------------------------------------------------
// Model and coupling settings

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Tube1D: return "tube1d";
    case ModelKind::LinearToy: return "linear_toy";
    case ModelKind::ScalarToy: return "scalar_toy";
  }
  return "?";
}

std::unique_ptr<CoupledProblem> ModelSpec::build() const {
  switch (kind) {
    case ModelKind::Tube1D: return std::make_unique<TubeProblem>(tube);
    case ModelKind::LinearToy: {
      const double radius =
          toy_preset.empty() ? toy_spectral_radius : LinearToy::preset_radius(toy_preset);
      return std::make_unique<LinearToy>(toy_dim_f, toy_dim_s, radius, toy_steps, toy_seed);
    }
    case ModelKind::ScalarToy: return std::make_unique<ScalarToy>(scalar_steps);
  }
  throw InvalidInput("unknown model");
}

ModelSpec read_model(const Config& c) {
  ModelSpec m;
  const std::string kind = c.get("model", "tube1d");
  if (kind == "tube1d") {
    m.kind = ModelKind::Tube1D;
    Tube1DParams& t = m.tube;
    t.length = c.get_double("tube.length", t.length);
    t.radius = c.get_double("tube.radius", t.radius);
    t.thickness = c.get_double("tube.thickness", t.thickness);
    t.rho_f = c.get_double("tube.rho_f", t.rho_f);
    t.mu_f = c.get_double("tube.mu_f", t.mu_f);
    t.rho_s = c.get_double("tube.rho_s", t.rho_s);
    t.youngs = c.get_double("tube.youngs", t.youngs);
    t.poisson = c.get_double("tube.poisson", t.poisson);
    t.cells = c.get_int("tube.cells", t.cells);
    t.dt = c.get_double("tube.dt", t.dt);
    t.steps = c.get_int("tube.steps", t.steps);
    t.pulse_pressure = c.get_double("tube.pulse_pressure", t.pulse_pressure);
    t.pulse_duration = c.get_double("tube.pulse_duration", t.pulse_duration);
    t.outlet_pressure = c.get_double("tube.outlet_pressure", t.outlet_pressure);
    t.kappa3 = c.get_double("tube.kappa3", t.kappa3);
    t.stabilization = c.get_double("tube.stabilization", t.stabilization);
    t.quasi_static = c.get_bool("tube.quasi_static", t.quasi_static);
    t.flow_driver = parse_driver(c.get("tube.flow_driver", to_string(t.flow_driver)));
    const std::string pre = c.get("tube.flow_preconditioner", "full");
    if (pre == "full") {
      t.flow_preconditioner = Preconditioner::FullA;
    } else if (pre == "diagonal") {
      t.flow_preconditioner = Preconditioner::DiagonalOfA;
    } else {
      throw InvalidInput("tube.flow_preconditioner must be 'full' or 'diagonal'");
    }
    t.validate();
  } else if (kind == "linear_toy") {
    m.kind = ModelKind::LinearToy;
    m.toy_preset = c.get("toy.preset", "");
    m.toy_dim_f = c.get_int("toy.dim_f", m.toy_dim_f);
    m.toy_dim_s = c.get_int("toy.dim_s", m.toy_dim_s);
    m.toy_spectral_radius = c.get_double("toy.spectral_radius", m.toy_spectral_radius);
    m.toy_steps = c.get_int("toy.steps", m.toy_steps);
    m.toy_seed = static_cast<std::uint64_t>(c.get_int("toy.seed", static_cast<int>(m.toy_seed)));
    if (!m.toy_preset.empty()) LinearToy::preset_radius(m.toy_preset);
  } else if (kind == "scalar_toy") {
    m.kind = ModelKind::ScalarToy;
    m.scalar_steps = c.get_int("scalar.steps", m.scalar_steps);
  } else {
    throw InvalidInput("unknown model '" + kind + "'");
  }
  return m;
}

CouplingConfig read_coupling(const Config& c) {
  CouplingConfig cfg;
  cfg.n_max_f = c.get_cap("nmax_f", cfg.n_max_f);
  cfg.n_max_s = c.get_cap("nmax_s", cfg.n_max_s);
  cfg.eps_f = c.get_double("eps_f", cfg.eps_f);
  cfg.eps_s = c.get_double("eps_s", cfg.eps_s);
  cfg.eps_fil = c.get_double("eps_fil", cfg.eps_fil);
  cfg.reuse_q = c.get_int("reuse_q", cfg.reuse_q);
  cfg.omega0 = c.get_double("omega0", cfg.omega0);
  cfg.accel = parse_acceleration(c.get("accel", to_string(cfg.accel)));
  const std::string crit = c.get("criterion", "first_residual");
  if (crit == "first_residual") {
    cfg.criterion.mode = CriterionMode::FirstResidual;
  } else if (crit == "fixed_point_norm") {
    cfg.criterion.mode = CriterionMode::FixedPointNorm;
  } else {
    throw InvalidInput("criterion must be 'first_residual' or 'fixed_point_norm'");
  }
  cfg.criterion.eps_c = c.get_double("eps_c", cfg.criterion.eps_c);
  cfg.criterion.relative = c.get_bool("relative", cfg.criterion.relative);
  cfg.max_coupling_iters_per_step = c.get_int("max_coupling_iters", cfg.max_coupling_iters_per_step);
  cfg.batch_size_f = c.get_int("batch_size_f", cfg.batch_size_f);
  cfg.divergence_growth = c.get_double("divergence_growth", cfg.divergence_growth);
  cfg.validate();
  return cfg;
}

CostFactors read_cost_factors(const Config& c, const CostFactors& fallback) {
  CostFactors f;
  f.c_couple = c.get_double("cost.c_couple", fallback.c_couple);
  f.c_fix_f = c.get_double("cost.c_fix_f", fallback.c_fix_f);
  f.c_iter_f = c.get_double("cost.c_iter_f", fallback.c_iter_f);
  f.c_fix_s = c.get_double("cost.c_fix_s", fallback.c_fix_s);
  f.c_iter_s = c.get_double("cost.c_iter_s", fallback.c_iter_s);
  f.validate();
  return f;
}

// ---------------------------------------------------------------------------
// Sweeps

void SweepSpec::validate() const {
  base.validate();
  factors.validate();
  if (grid_f.empty() || grid_s.empty()) throw InvalidInput("sweep grids must be non-empty");
  for (const auto* grid : {&grid_f, &grid_s}) {
    for (std::size_t i = 0; i < grid->size(); ++i) {
      for (std::size_t j = i + 1; j < grid->size(); ++j) {
        if ((*grid)[i] == (*grid)[j]) throw InvalidInput("sweep grid entries must be unique");
      }
    }
  }
  const auto has_inf = [](const std::vector<Cap>& g) {
    return std::find(g.begin(), g.end(), Cap::unbounded()) != g.end();
  };
  if (!has_inf(grid_f) || !has_inf(grid_s)) {
    throw InvalidInput("sweep grid must contain the reference cell (inf, inf)");
  }
  if (workers < 1) throw InvalidInput("workers must be >= 1");
}

SweepSpec read_sweep_spec(const Config& c) {
  SweepSpec s;
  s.model = read_model(c);
  s.base = read_coupling(c);
  s.grid_f = c.get_caps("grid_f");
  s.grid_s = c.get_caps("grid_s");
  s.workers = c.get_int("workers", s.workers);
  const std::string timing = c.get("timing_source", "model");
  if (timing == "model") {
    s.timing = TimingSource::Model;
  } else if (timing == "wall") {
    s.timing = TimingSource::Wall;
  } else {
    throw InvalidInput("timing_source must be 'model' or 'wall'");
  }
  s.factors = read_cost_factors(c, s.factors);
  s.validate();
  return s;
}

namespace {

struct CellOutcome {
  SweepRow row;
  std::vector<Vector> snapshots;
};

CellOutcome run_cell(const SweepSpec& spec, Cap nf, Cap ns) {
  CouplingConfig cfg = spec.base;
  cfg.n_max_f = nf;
  cfg.n_max_s = ns;
  auto problem = spec.model.build();
  SimulationResult sim = run_simulation(*problem, cfg);
  const RunRecord& rec = sim.record;

  CellOutcome out;
  SweepRow& row = out.row;
  row.nmax_f = nf;
  row.nmax_s = ns;
  row.converged = rec.converged;
  row.counts = {rec.counters.coupling_total(), rec.counters.flow_total(),
                rec.counters.solid_total()};
  if (spec.timing == TimingSource::Model) {
    const CostFactors& f = spec.factors;
    const auto nc = static_cast<double>(row.counts.n_c);
    row.t_f = nc * f.c_fix_f + static_cast<double>(row.counts.n_f) * f.c_iter_f;
    row.t_s = nc * f.c_fix_s + static_cast<double>(row.counts.n_s) * f.c_iter_s;
    row.t_c = nc * f.c_couple;
  } else {
    row.t_f = rec.timings.flow;
    row.t_s = rec.timings.solid;
    row.t_c = rec.timings.coupling;
  }
  if (row.converged) row.teq = equivalent_time(row.counts, spec.factors);
  out.snapshots = rec.snapshots;
  return out;
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  std::vector<std::pair<Cap, Cap>> cells;
  for (const Cap& f : spec.grid_f)
    for (const Cap& s : spec.grid_s) cells.emplace_back(f, s);

  std::vector<CellOutcome> outcomes(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        outcomes[i] = run_cell(spec, cells[i].first, cells[i].second);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_workers = std::min<int>(spec.workers, static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::size_t ref = cells.size();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].first == Cap::unbounded() && cells[i].second == Cap::unbounded()) ref = i;
  }
  const CellOutcome& reference = outcomes[ref];
  SweepResult result;
  for (CellOutcome& o : outcomes) {
    SweepRow& row = o.row;
    if (row.converged && reference.row.converged) {
      row.teq_norm = *row.teq / *reference.row.teq;
      double dev = 0.0;
      const std::size_t n = std::min(o.snapshots.size(), reference.snapshots.size());
      for (std::size_t k = 0; k < n; ++k) {
        dev = std::max(dev, deviation_from_reference(o.snapshots[k], reference.snapshots[k]));
      }
      row.max_dev = dev;
    }
    result.rows.push_back(row);
    result.snapshots.push_back(std::move(o.snapshots));
  }
  return result;
}

const std::vector<std::string> kSweepColumns = {
    "nmax_f", "nmax_s", "converged", "N_c", "N_f", "N_s",
    "T_f", "T_s", "T_c", "teq", "teq_norm", "max_dev_vs_reference"};

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace {

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : ""; }

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < kSweepColumns.size(); ++i) {
    out << (i ? "," : "") << kSweepColumns[i];
  }
  out << '\n';
  for (const SweepRow& r : rows) {
    out << r.nmax_f.to_string() << ',' << r.nmax_s.to_string() << ','
        << (r.converged ? "true" : "false") << ',' << r.counts.n_c << ',' << r.counts.n_f << ','
        << r.counts.n_s << ',' << format_real(r.t_f) << ',' << format_real(r.t_s) << ','
        << format_real(r.t_c) << ',' << opt_real(r.teq) << ',' << opt_real(r.teq_norm) << ','
        << opt_real(r.max_dev) << '\n';
  }
  return out.str();
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError("empty sweep file", 1);
  if (split(lines[0], ',') != kSweepColumns) throw ParseError("unexpected sweep header", 1);
  std::vector<SweepRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (trim(lines[i]).empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != kSweepColumns.size()) throw ParseError("expected 12 fields", n);
    SweepRow r;
    r.nmax_f = parse_cap(f[0], n);
    r.nmax_s = parse_cap(f[1], n);
    if (f[2] != "true" && f[2] != "false") throw ParseError("converged must be true/false", n);
    r.converged = f[2] == "true";
    r.counts = {parse_long(f[3], n, "N_c"), parse_long(f[4], n, "N_f"), parse_long(f[5], n, "N_s")};
    r.t_f = parse_double(f[6], n, "T_f");
    r.t_s = parse_double(f[7], n, "T_s");
    r.t_c = parse_double(f[8], n, "T_c");
    auto opt = [&](const std::string& s, const char* what) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return parse_double(s, n, what);
    };
    r.teq = opt(f[9], "teq");
    r.teq_norm = opt(f[10], "teq_norm");
    r.max_dev = opt(f[11], "max_dev_vs_reference");
    rows.push_back(r);
  }
  return rows;
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  return parse_sweep_csv(read_text(path));
}

// ---------------------------------------------------------------------------
// Published tables

PublishedTable parse_published_table(const std::string& text) {
  PublishedTable table;
  const auto lines = lines_of(text);
  bool header_seen = false;
  const std::vector<std::string> header = {"nmax_f", "nmax_s", "teq_norm", "N_c", "N_f", "N_s"};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string tag = "# framework:";
      if (line.rfind(tag, 0) == 0) table.framework = trim(line.substr(tag.size()));
      continue;
    }
    const auto f = split(line, ',');
    if (!header_seen) {
      if (f != header) throw ParseError("expected header nmax_f,nmax_s,teq_norm,N_c,N_f,N_s", n);
      header_seen = true;
      continue;
    }
    if (f.size() != header.size()) throw ParseError("expected 6 fields", n);
    PublishedTableRow row;
    row.line = n;
    row.nmax_f = parse_cap(f[0], n);
    row.nmax_s = parse_cap(f[1], n);
    const bool missing = f[2] == "-";
    for (std::size_t k = 3; k < 6; ++k) {
      if ((f[k] == "-") != missing) {
        throw ParseError("'-' must mark the whole row as diverged", n);
      }
    }
    if (!missing) {
      row.teq_norm = parse_double(f[2], n, "teq_norm");
      row.counts = Counts{parse_long(f[3], n, "N_c"), parse_long(f[4], n, "N_f"),
                          parse_long(f[5], n, "N_s")};
    }
    table.rows.push_back(row);
  }
  if (!header_seen) throw ParseError("missing table header", static_cast<int>(lines.size()));
  return table;
}

PublishedTable read_published_table(const std::filesystem::path& path) {
  return parse_published_table(read_text(path));
}

std::vector<FrameworkFactors> parse_regression_summary(const std::string& text) {
  const std::vector<std::string> header = {"framework", "c_fix_f", "c_iter_f", "c_fix_s",
                                           "c_iter_s",  "c_couple", "gamma",   "mape",
                                           "maxape"};
  std::vector<FrameworkFactors> out;
  bool header_seen = false;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    const std::string line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line, ',');
    if (!header_seen) {
      if (f != header) throw ParseError("unexpected regression summary header", n);
      header_seen = true;
      continue;
    }
    if (f.size() != header.size()) throw ParseError("expected 9 fields", n);
    FrameworkFactors row;
    row.framework = f[0];
    row.factors.c_fix_f = parse_double(f[1], n, "c_fix_f");
    row.factors.c_iter_f = parse_double(f[2], n, "c_iter_f");
    row.factors.c_fix_s = parse_double(f[3], n, "c_fix_s");
    row.factors.c_iter_s = parse_double(f[4], n, "c_iter_s");
    row.factors.c_couple = parse_double(f[5], n, "c_couple");
    row.gamma_published = parse_double(f[6], n, "gamma");
    row.mape_percent = parse_double(f[7], n, "mape");
    row.maxape_percent = parse_double(f[8], n, "maxape");
    out.push_back(row);
  }
  if (!header_seen) throw ParseError("missing regression summary header", 0);
  return out;
}

std::vector<FrameworkFactors> read_regression_summary(const std::filesystem::path& path) {
  return parse_regression_summary(read_text(path));
}

const FrameworkFactors& find_framework(const std::vector<FrameworkFactors>& all,
                                       const std::string& name) {
  for (const auto& f : all) {
    if (f.framework == name) return f;
  }
  throw InvalidInput("no cost factors for framework '" + name + "'");
}

ReplayReport replay_published(const PublishedTable& table, const CostFactors& factors) {
  factors.validate();
  const PublishedTableRow* ref = nullptr;
  for (const auto& row : table.rows) {
    if (row.nmax_f == Cap::unbounded() && row.nmax_s == Cap::unbounded()) ref = &row;
  }
  if (!ref || !ref->counts) throw InvalidInput("published table lacks a converged (inf, inf) row");
  const double teq_ref = equivalent_time(*ref->counts, factors);
  if (!(teq_ref > 0)) throw InvalidInput("reference equivalent time is zero");

  ReplayReport report;
  for (const auto& row : table.rows) {
    if (!row.counts) continue;
    ReplayCell cell{row.nmax_f, row.nmax_s, *row.teq_norm,
                    equivalent_time(*row.counts, factors) / teq_ref, 0.0};
    cell.abs_error = std::abs(cell.recomputed - cell.published);
    if (!report.worst || cell.abs_error > report.max_error) {
      report.max_error = cell.abs_error;
      report.worst = cell;
    }
    report.cells.push_back(cell);
  }
  report.pass = report.max_error <= kReplayTolerance;
  return report;
}

std::string format_replay(const ReplayReport& report) {
  std::ostringstream out;
  out << "nmax_f,nmax_s,published,recomputed,abs_error\n";
  char buf[128];
  for (const auto& c : report.cells) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.2f,%.4f,%.4f\n", c.nmax_f.to_string().c_str(),
                  c.nmax_s.to_string().c_str(), c.published, c.recomputed, c.abs_error);
    out << buf;
  }
  if (report.worst) {
    std::snprintf(buf, sizeof buf, "max error %.4f at (%s,%s)\n", report.max_error,
                  report.worst->nmax_f.to_string().c_str(),
                  report.worst->nmax_s.to_string().c_str());
    out << buf;
  }
  out << (report.pass ? "PASS" : "FAIL") << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Fit

FitReport fit_from_runs(const std::vector<SweepRow>& rows) {
  std::vector<long> nc, nf, ns;
  std::vector<double> tf, ts, tc, total;
  for (const auto& r : rows) {
    if (!r.converged) continue;
    nc.push_back(r.counts.n_c);
    nf.push_back(r.counts.n_f);
    ns.push_back(r.counts.n_s);
    tf.push_back(r.t_f);
    ts.push_back(r.t_s);
    tc.push_back(r.t_c);
    total.push_back(r.t_f + r.t_s + r.t_c);
  }
  if (nc.size() < 3) {
    throw RankDeficient("fit needs at least 3 converged runs with non-collinear counts; "
                        "widen the sweep grid");
  }
  FitReport rep;
  rep.samples = static_cast<int>(nc.size());
  const SolverCostFit flow = fit_solver_cost(nc, nf, tf);
  const SolverCostFit solid = fit_solver_cost(nc, ns, ts);
  rep.factors = {fit_coupling_cost(nc, tc), flow.c_fix, flow.c_iter, solid.c_fix, solid.c_iter};

  std::vector<double> pf, ps, pc, pt;
  for (std::size_t i = 0; i < nc.size(); ++i) {
    const auto c = static_cast<double>(nc[i]);
    pf.push_back(c * flow.c_fix + static_cast<double>(nf[i]) * flow.c_iter);
    ps.push_back(c * solid.c_fix + static_cast<double>(ns[i]) * solid.c_iter);
    pc.push_back(c * rep.factors.c_couple);
    pt.push_back(equivalent_time({nc[i], nf[i], ns[i]}, rep.factors));
  }
  rep.rmse_f = rmse(tf, pf);
  rep.rrmse_f = rrmse(tf, pf);
  rep.rmse_s = rmse(ts, ps);
  rep.rrmse_s = rrmse(ts, ps);
  rep.rmse_c = rmse(tc, pc);
  rep.rrmse_c = rrmse(tc, pc);
  rep.total = mape_maxape(total, pt);
  return rep;
}

std::string format_fit(const FitReport& r) {
  std::ostringstream out;
  out << "c_fix_f,c_iter_f,c_fix_s,c_iter_s,c_couple,gamma,mape,maxape\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.2f,%.2f\n", r.factors.c_fix_f,
                r.factors.c_iter_f, r.factors.c_fix_s, r.factors.c_iter_s, r.factors.c_couple,
                r.factors.gamma(), 100.0 * r.total.mape, 100.0 * r.total.maxape);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "# samples %d; rmse/rrmse flow %.4g/%.4g solid %.4g/%.4g coupling %.4g/%.4g\n",
                r.samples, r.rmse_f, r.rrmse_f, r.rmse_s, r.rrmse_s, r.rmse_c, r.rrmse_c);
  out << buf;
  return out.str();
}

std::vector<SweepRow> apply_timing_noise(std::vector<SweepRow> rows, double rel,
                                         std::uint64_t seed) {
  if (!(rel >= 0) || rel >= 1) throw InvalidInput("noise level must lie in [0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-rel, rel);
  for (auto& r : rows) {
    r.t_f *= 1.0 + u(rng);
    r.t_s *= 1.0 + u(rng);
    r.t_c *= 1.0 + u(rng);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Contours

ContourQuantity parse_contour_quantity(const std::string& text) {
  if (text == "N_c") return ContourQuantity::Nc;
  if (text == "N_f") return ContourQuantity::Nf;
  if (text == "N_s") return ContourQuantity::Ns;
  if (text == "teq_norm") return ContourQuantity::TeqNorm;
  throw InvalidInput("quantity must be one of N_c, N_f, N_s, teq_norm");
}

std::string to_string(ContourQuantity q) {
  switch (q) {
    case ContourQuantity::Nc: return "N_c";
    case ContourQuantity::Nf: return "N_f";
    case ContourQuantity::Ns: return "N_s";
    case ContourQuantity::TeqNorm: return "teq_norm";
  }
  return "?";
}

std::string contour_csv(const std::vector<SweepRow>& rows, ContourQuantity quantity) {
  std::vector<Cap> fs, ss;
  auto add_unique = [](std::vector<Cap>& v, const Cap& c) {
    if (std::find(v.begin(), v.end(), c) == v.end()) v.push_back(c);
  };
  for (const auto& r : rows) {
    add_unique(fs, r.nmax_f);
    add_unique(ss, r.nmax_s);
  }
  if (rows.empty() || rows.size() != fs.size() * ss.size()) {
    throw InvalidInput("sweep results do not form a full rectangular grid");
  }
  std::map<std::pair<std::string, std::string>, const SweepRow*> cell;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.nmax_f.to_string(), r.nmax_s.to_string());
    if (cell.count(key)) throw InvalidInput("duplicate grid cell in sweep results");
    cell[key] = &r;
  }
  std::ostringstream out;
  out << "nmax_f\\nmax_s";
  for (const Cap& s : ss) out << ',' << s.to_string();
  out << '\n';
  for (const Cap& f : fs) {
    out << f.to_string();
    for (const Cap& s : ss) {
      const SweepRow& r = *cell.at({f.to_string(), s.to_string()});
      out << ',';
      if (!r.converged) continue;
      switch (quantity) {
        case ContourQuantity::Nc: out << r.counts.n_c; break;
        case ContourQuantity::Nf: out << r.counts.n_f; break;
        case ContourQuantity::Ns: out << r.counts.n_s; break;
        case ContourQuantity::TeqNorm: out << opt_real(r.teq_norm); break;
      }
    }
    out << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace fsilab
