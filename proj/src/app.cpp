#include "hamcouple/app.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "hamcouple/numfmt.hpp"

namespace hamcouple {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec_json(const State& s) {
  json a = json::array();
  for (Eigen::Index i = 0; i < s.size(); ++i) a.push_back(s[i]);
  return a;
}

json num_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

/// Rows are written as given; doubles go through fmt17.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& cell(const std::string& s) {
    row_.push_back(s);
    return *this;
  }
  CsvTable& cell(double x) { return cell(fmt17(x)); }
  CsvTable& cell(long x) { return cell(std::to_string(x)); }
  CsvTable& cell(int x) { return cell(std::to_string(x)); }
  CsvTable& cell(std::size_t x) { return cell(std::to_string(x)); }
  CsvTable& cell(bool b) { return cell(std::string(b ? "1" : "0")); }
  void end_row() {
    rows_.push_back(std::move(row_));
    row_.clear();
  }
  bool empty() const { return rows_.empty(); }

  void write(const fs::path& p) const {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write " + p.string());
    line(os, header_);
    for (const auto& r : rows_) line(os, r);
  }

 private:
  static void line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << cells[i];
    }
    os << '\n';
  }
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::string> row_;
};

// Free-text notes can carry commas.
std::string csv_text(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Experiment {
  ExperimentConfig cfg;
  RunOptions opts;
  std::ostream& log;
  fs::path out;

  json results;
  std::optional<CsvTable> periods_csv;
  std::optional<CsvTable> solutions_csv;
  CsvTable conditions_csv{{"check", "index", "parameter", "value", "ok", "note"}};
  std::optional<ResonanceClass> resonance;
  std::vector<Trajectory> solution_trajectories;

  Experiment(ExperimentConfig c, const RunOptions& o, std::ostream& l) : cfg(std::move(c)), opts(o), log(l) {}

  bool periodic() const { return cfg.mode == SystemMode::Periodic; }
  double horizon() const { return periodic() ? cfg.system.T : cfg.system.b - cfg.system.a; }

  // Periods --------------------------------------------------------------

  json period_row(const NamedHamiltonian& h) {
    const double tau = minimal_period(h.H);
    const HalfPeriods hp = half_periods(h.H);
    json row = {{"name", h.name}, {"tau", tau}, {"tau_plus", hp.tau_plus}, {"tau_minus", hp.tau_minus},
                {"half_sum_defect", std::abs(hp.tau_plus + hp.tau_minus - tau)}};
    row["tau_closed_form"] = opt_json(h.closed_form);
    row["rel_error"] = h.closed_form ? json(std::abs(tau - *h.closed_form) / *h.closed_form) : json(nullptr);
    periods_csv->cell(h.name).cell(tau);
    if (h.closed_form) {
      periods_csv->cell(*h.closed_form).cell(std::abs(tau - *h.closed_form) / *h.closed_form);
    } else {
      periods_csv->cell(std::string()).cell(std::string());
    }
    periods_csv->cell(hp.tau_plus).cell(hp.tau_minus).end_row();
    log << "period " << h.name << ": tau = " << fmt17(tau) << ", tau_plus = " << fmt17(hp.tau_plus)
        << ", tau_minus = " << fmt17(hp.tau_minus) << '\n';
    return row;
  }

  void periods() {
    if (periods_csv) return;
    periods_csv.emplace(std::vector<std::string>{"name", "tau", "tau_closed_form", "rel_error", "tau_plus", "tau_minus"});
    json rows = json::array();
    if (cfg.H1) rows.push_back(period_row(*cfg.H1));
    if (cfg.H2) rows.push_back(period_row(*cfg.H2));
    for (const auto& h : cfg.hamiltonians) rows.push_back(period_row(h));
    if (rows.empty()) throw ConfigError("periods: no Hamiltonians (add a decomposition or a hamiltonians list)");
    results["periods"] = rows;
  }

  // Resonance -------------------------------------------------------------

  void classify() {
    if (resonance) return;
    const auto& ov = cfg.classify;
    json info = json::object();
    double tau1 = 0.0, tau2 = 0.0;
    if (ov.tau1 && ov.tau2) {
      tau1 = *ov.tau1;
      tau2 = *ov.tau2;
      info["source"] = "classify override";
    } else {
      if (!cfg.H1 || !cfg.H2) throw ConfigError("classify: needs a decomposition (H1, H2) or classify.tau1 and tau2");
      if (periodic()) {
        tau1 = minimal_period(cfg.H1->H);
        tau2 = minimal_period(cfg.H2->H);
        info["source"] = "minimal periods of H1, H2";
      } else {
        // The Neumann problem counts half-turns.
        const HalfPeriods h1 = half_periods(cfg.H1->H), h2 = half_periods(cfg.H2->H);
        tau1 = h1.tau_plus;
        tau2 = h2.tau_plus;
        info["source"] = "half-periods tau_plus of H1, H2 against b - a";
        const double tol = 1e-10;
        const bool even = std::abs(h1.tau_plus - h1.tau_minus) <= tol && std::abs(h2.tau_plus - h2.tau_minus) <= tol;
        info["half_periods_equal"] = even;
        if (!even) info["note"] = "tau_plus != tau_minus: the Neumann multiplicity results do not apply";
      }
    }
    const double T = ov.T.value_or(horizon());
    resonance = classify_resonance(tau1, tau2, T, ov.tol);
    info["tau1"] = tau1;
    info["tau2"] = tau2;
    info["T"] = T;
    info["tol"] = ov.tol;
    info["tag"] = to_string(resonance->tag);
    info["N"] = resonance->N;
    info["label"] = resonance->label();
    results["resonance"] = info;
    log << "resonance: " << resonance->label() << '\n';
  }

  // Conditions ------------------------------------------------------------

  std::vector<LLSide> ll_sides() {
    if (!cfg.conditions.ll_sides.empty()) return cfg.conditions.ll_sides;
    classify();
    switch (resonance->tag) {
      case ResonanceTag::SimpleBelow: return {LLSide::Lower};
      case ResonanceTag::SimpleAbove: return {LLSide::Upper};
      case ResonanceTag::Double: return {LLSide::Lower, LLSide::Upper};
      default: return {};
    }
  }

  double mbar(json& out) {
    const auto& c = cfg.conditions;
    json m;
    double value = 0.0;
    if (c.mbar_override) {
      value = *c.mbar_override;
      m["source"] = "override";
    } else {
      value = estimate_mbar(cfg.system, c.mbar_box, c.mbar_samples);
      m["source"] = "estimate";
      m["samples"] = c.mbar_samples;
      m["note"] = "empirical max of |grad_w P|; a lower bound for the supremum";
    }
    m["value"] = value;
    out["mbar"] = m;
    return value;
  }

  void ll(json& out) {
    const auto sides = ll_sides();
    json arr = json::array();
    if (sides.empty()) {
      out["ll"] = arr;
      out["ll_note"] = "no Landesman-Lazer condition is required in this regime";
      log << "ll: not required\n";
      return;
    }
    if (!cfg.H1 || !cfg.H2) throw ConfigError("ll: needs a decomposition (H1, H2)");
    LLOptions lo = cfg.conditions.ll;
    lo.m_bar = mbar(out);
    for (LLSide side : sides) {
      const NamedHamiltonian& h = side == LLSide::Lower ? *cfg.H1 : *cfg.H2;
      const ReferenceOrbit orbit = reference_orbit(h.H, cfg.conditions.orbit_tol);
      json j = {{"side", to_string(side)}};
      try {
        const LLReport r = ll_margin(cfg.system, side, orbit, lo);
        j["pass"] = r.pass;
        j["min_margin"] = r.min_margin;
        j["rhs"] = r.rhs;
        j["m_bar"] = lo.m_bar;
        j["theta"] = r.theta;
        j["lhs"] = r.lhs;
        j["dispersion"] = r.dispersion;
        j["margin"] = r.margin;
        j["lambdas"] = r.lambdas;
        j["s_halfwidth"] = r.s_halfwidth;
        j["t_nodes"] = r.t_nodes;
        j["joint_limit_estimated"] = r.joint_limit_estimated;
        for (std::size_t i = 0; i < r.theta.size(); ++i) {
          conditions_csv.cell("ll_" + to_string(side)).cell(i).cell(r.theta[i]).cell(r.margin[i]).cell(r.margin[i] > 0.0);
          conditions_csv.cell(std::string()).end_row();
        }
        log << "ll " << to_string(side) << ": min margin " << fmt17(r.min_margin) << (r.pass ? " PASS" : " FAIL") << '\n';
      } catch (const IntegrationOverflow& e) {
        j["pass"] = false;
        j["error"] = e.what();
        log << "ll " << to_string(side) << ": " << e.what() << '\n';
      }
      arr.push_back(j);
    }
    out["ll"] = arr;
  }

  json homogeneity(const NamedHamiltonian& h) {
    const auto r = check_homogeneous(h.H, cfg.conditions.decomposition_samples, cfg.conditions.decomposition_tol, cfg.seed);
    conditions_csv.cell("homogeneity_" + h.name).cell(0).cell(std::string()).cell(
        std::max(r.max_euler_residual, r.max_homogeneity_residual));
    conditions_csv.cell(r.pass).cell(std::string()).end_row();
    return {{"samples", r.samples}, {"max_euler_residual", r.max_euler_residual},
            {"max_homogeneity_residual", r.max_homogeneity_residual},
            {"positivity_violations", r.positivity_violations}, {"pass", r.pass}};
  }

  std::vector<PlanarPath> ensemble() {
    const auto& e = cfg.conditions.ensemble;
    auto paths = constant_paths(e.constants);
    if (e.fourier_count > 0) {
      auto f = random_fourier_paths(e.fourier_count, e.fourier_amplitude, e.fourier_modes, horizon(), cfg.seed);
      paths.insert(paths.end(), f.begin(), f.end());
    }
    if (e.include_solutions) {
      auto s = trajectory_paths(solution_trajectories, cfg.M);
      paths.insert(paths.end(), s.begin(), s.end());
    }
    return paths;
  }

  json twist_json(const TwistReport& r, const std::string& key) {
    json j = {{"condition", r.condition}, {"ensemble", r.ensemble}, {"samples", r.samples.size()},
              {"violations", r.violations.size()}, {"integration_failures", r.integration_failures},
              {"pass", r.pass}};
    json shown = json::array();
    for (std::size_t k = 0; k < r.violations.size() && k < 20; ++k) {
      const TwistSample& s = r.samples[r.violations[k]];
      shown.push_back({{"path", r.ensemble[s.path]}, {"boundary", s.boundary}, {"y0", vec_json(s.y0)},
                       {"x0", vec_json(s.x0)}, {"drift", vec_json(s.drift)}, {"quantity", num_or_null(s.quantity)},
                       {"note", s.note}});
    }
    j["first_violations"] = shown;
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      const TwistSample& s = r.samples[i];
      conditions_csv.cell(key).cell(i).cell(s.boundary).cell(s.quantity).cell(s.ok).cell(csv_text(s.note)).end_row();
    }
    log << key << ": " << r.violations.size() << " violations in " << r.samples.size() << " samples"
        << (r.pass ? " PASS" : " FAIL") << '\n';
    return j;
  }

  void twists(json& out) {
    const auto& c = cfg.conditions;
    if (!c.twist && !c.avoiding_rays && !c.indefinite_twist) return;
    if (!periodic()) {
      out["twist_note"] = "twist conditions apply to the periodic problem only";
      return;
    }
    const auto paths = ensemble();
    if (c.twist) {
      TwistOptions o = c.twist->opts;
      o.threads = opts.threads;
      out["twist"] = twist_json(twist_check(cfg.system, c.twist->D, c.twist->sigma, paths, o), "twist");
    }
    if (c.avoiding_rays) {
      BoundaryOptions o = c.avoiding_rays->opts;
      o.threads = opts.threads;
      const ConvexBody D = ellipsoid(c.avoiding_rays->center, c.avoiding_rays->semi_axes);
      out["avoiding_rays"] =
          twist_json(avoiding_rays_check(cfg.system, D, c.avoiding_rays->sigma, paths, o), "avoiding_rays");
    }
    if (c.indefinite_twist) {
      BoundaryOptions o = c.indefinite_twist->opts;
      o.threads = opts.threads;
      const ConvexBody D = ellipsoid(c.indefinite_twist->center, c.indefinite_twist->semi_axes);
      try {
        out["indefinite_twist"] =
            twist_json(indefinite_twist_check(cfg.system, D, c.indefinite_twist->A, paths, o), "indefinite_twist");
      } catch (const SingularMatrix& e) {
        out["indefinite_twist"] = {{"pass", false}, {"error", e.what()}};
      }
    }
  }

  void hypotheses(json& out) {
    const auto& c = cfg.conditions;
    json hom = json::object();
    if (cfg.H1) hom["H1"] = homogeneity(*cfg.H1);
    if (cfg.H2) hom["H2"] = homogeneity(*cfg.H2);
    out["homogeneity"] = hom;

    if (cfg.system.decomposition) {
      const auto d = validate_decomposition(cfg.system, c.decomposition_samples, c.decomposition_tol);
      out["decomposition"] = {{"samples", d.samples},
                              {"max_residual", d.max_residual},
                              {"gamma_range_violations", d.gamma_range_violations},
                              {"ordering_violations", d.ordering_violations},
                              {"q_bound_violations", d.q_bound_violations},
                              {"max_q_gradient", d.max_q_gradient},
                              {"pass", d.pass}};
      conditions_csv.cell("decomposition").cell(0).cell(std::string()).cell(d.max_residual).cell(d.pass);
      conditions_csv.cell(std::string()).end_row();
      log << "decomposition: max residual " << fmt17(d.max_residual) << (d.pass ? " PASS" : " FAIL") << '\n';
    } else {
      out["decomposition"] = {{"pass", false}, {"error", "no decomposition given"}};
    }
    if (periodic()) {
      const auto p = validate_periodicity(cfg.system, c.periodicity_tol);
      out["periodicity"] = {{"samples", p.samples},
                            {"max_time_defect", p.max_time_defect},
                            {"max_angle_defect", p.max_angle_defect},
                            {"pass", p.pass}};
      conditions_csv.cell("periodicity").cell(0).cell(std::string()).cell(std::max(p.max_time_defect, p.max_angle_defect));
      conditions_csv.cell(p.pass).cell(std::string()).end_row();
    }
  }

  void ll_only() {
    json out = results.value("conditions", json::object());
    ll(out);
    results["conditions"] = out;
  }

  void conditions(bool with_twists) {
    json out = json::object();
    hypotheses(out);
    ll(out);
    if (with_twists) twists(out);
    results["conditions"] = out;
  }

  void deferred_twists() {
    json out = results.value("conditions", json::object());
    twists(out);
    results["conditions"] = out;
  }

  // Solving ---------------------------------------------------------------

  MultistartSpec spec() const {
    MultistartSpec s = cfg.multistart;
    s.seed = cfg.seed;
    s.threads = opts.threads;
    return s;
  }

  json stats_json(const MultistartStats& s) {
    return {{"starts", s.starts}, {"converged", s.converged}, {"failed", s.failed},
            {"integration_failures", s.integration_failures}, {"lm_used", s.lm_used}};
  }

  std::size_t solve_periodic() {
    if (!periodic()) throw ConfigError("solve-periodic needs mode = periodic");
    const auto res = multistart_periodic(cfg.system, spec(), cfg.shooting);
    const int M = cfg.M;
    std::vector<std::string> header = {"class_id"};
    for (int i = 1; i <= M; ++i) header.push_back("x" + std::to_string(i));
    for (int i = 1; i <= M; ++i) header.push_back("y" + std::to_string(i));
    header.insert(header.end(), {"u", "v"});
    for (int i = 1; i <= M; ++i) header.push_back("x" + std::to_string(i) + "_mod_2pi");
    header.insert(header.end(), {"residual", "iterations", "used_lm", "turns"});
    solutions_csv.emplace(header);
    json recs = json::array();
    double worst = 0.0;
    for (const auto& r : res.records) {
      solutions_csv->cell(r.class_id);
      for (Eigen::Index i = 0; i < r.z0.size(); ++i) solutions_csv->cell(r.z0[i]);
      for (Eigen::Index i = 0; i < r.x_normalized.size(); ++i) solutions_csv->cell(r.x_normalized[i]);
      solutions_csv->cell(r.residual).cell(r.iterations).cell(r.used_lm);
      solutions_csv->cell(r.turns ? std::to_string(*r.turns) : std::string()).end_row();
      recs.push_back({{"class_id", r.class_id}, {"z0", vec_json(r.z0)}, {"x_normalized", vec_json(r.x_normalized)},
                      {"residual", r.residual}, {"iterations", r.iterations}, {"used_lm", r.used_lm},
                      {"turns", opt_json(r.turns)}});
      worst = std::max(worst, r.residual);
    }
    const auto f = assemble_field(cfg.system);
    solution_trajectories.clear();
    for (std::size_t rep : res.partition.representatives) {
      solution_trajectories.push_back(integrate(f, res.records[rep].z0, 0.0, cfg.system.T, cfg.shooting.integration_tol));
    }
    results["solutions"] = {{"mode", "periodic"},
                            {"records", recs},
                            {"distinct_classes", res.partition.count()},
                            {"max_residual", worst},
                            {"stats", stats_json(res.stats)}};
    log << "solve-periodic: " << res.stats.converged << " of " << res.stats.starts << " starts converged, "
        << res.partition.count() << " distinct classes, max residual " << fmt17(worst) << '\n';
    if (res.records.empty()) throw NoSolutions("no start converged");
    return res.partition.count();
  }

  std::size_t solve_neumann() {
    if (periodic()) throw ConfigError("solve-neumann needs mode = neumann");
    const auto res = multistart_neumann(cfg.system, spec(), cfg.shooting);
    const int M = cfg.M;
    std::vector<std::string> header = {"class_id"};
    for (int i = 1; i <= M; ++i) header.push_back("x" + std::to_string(i) + "_a");
    header.insert(header.end(), {"u_a", "residual", "iterations", "used_lm"});
    solutions_csv.emplace(header);
    json recs = json::array();
    double worst = 0.0;
    for (const auto& r : res.records) {
      solutions_csv->cell(r.class_id);
      for (Eigen::Index i = 0; i < r.x_a.size(); ++i) solutions_csv->cell(r.x_a[i]);
      solutions_csv->cell(r.u_a).cell(r.residual).cell(r.iterations).cell(r.used_lm).end_row();
      recs.push_back({{"class_id", r.class_id}, {"x_a", vec_json(r.x_a)}, {"u_a", r.u_a}, {"residual", r.residual},
                      {"iterations", r.iterations}, {"used_lm", r.used_lm}});
      worst = std::max(worst, r.residual);
    }
    const auto f = assemble_field(cfg.system);
    solution_trajectories.clear();
    for (std::size_t rep : res.partition.representatives) {
      solution_trajectories.push_back(
          integrate(f, res.records[rep].z0, cfg.system.a, cfg.system.b, cfg.shooting.integration_tol));
    }
    results["solutions"] = {{"mode", "neumann"},
                            {"records", recs},
                            {"distinct_classes", res.partition.count()},
                            {"max_residual", worst},
                            {"stats", stats_json(res.stats)}};
    log << "solve-neumann: " << res.stats.converged << " of " << res.stats.starts << " starts converged, "
        << res.partition.count() << " distinct classes, max residual " << fmt17(worst) << '\n';
    if (res.records.empty()) throw NoSolutions("no start converged");
    return res.partition.count();
  }

  void full() {
    periods();
    classify();
    const bool defer = cfg.conditions.ensemble.include_solutions;
    conditions(!defer);
    const std::size_t classes = periodic() ? solve_periodic() : solve_neumann();
    if (defer) deferred_twists();
    const std::size_t need = static_cast<std::size_t>(cfg.M) + 1;
    const bool ok = classes >= need;
    results["summary"] = {{"distinct_classes", classes}, {"required", need}, {"meets_bound", ok}};
    log << "distinct_classes ≥ " << need << ": " << (ok ? "PASS" : "FAIL") << '\n';
  }

  // Output ----------------------------------------------------------------

  void write_outputs() {
    fs::create_directories(out);
    if (periods_csv) periods_csv->write(out / "periods.csv");
    if (solutions_csv) solutions_csv->write(out / "solutions.csv");
    if (results.contains("conditions")) conditions_csv.write(out / "conditions.csv");
    if (opts.dump_trajectories && !solution_trajectories.empty()) {
      fs::create_directories(out / "trajectories");
      for (std::size_t k = 0; k < solution_trajectories.size(); ++k) {
        std::ofstream os(out / "trajectories" / ("class_" + std::to_string(k) + ".csv"), std::ios::binary);
        write_trajectory_csv(solution_trajectories[k], cfg.output.trajectory_stride, os);
      }
    }
  }
};

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> k = {"periods",        "classify",      "check-conditions", "ll",
                                             "solve-periodic", "solve-neumann", "full"};
  return k;
}

fs::path resolve_out_dir(const fs::path& requested) {
  if (!requested.empty()) return requested;
  if (const char* env = std::getenv("HAMCOUPLE_OUT"); env && *env) return env;
  return "hamcouple-out";
}

void run_experiment(const std::string& subcommand, ExperimentConfig cfg, const RunOptions& opts, std::ostream& log) {
  if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end()) {
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  }
  if (opts.seed && *opts.seed != cfg.seed) {
    cfg.seed = *opts.seed;
    cfg.raw["seed"] = cfg.seed;
  }
  const auto start = std::chrono::steady_clock::now();
  Experiment ex(std::move(cfg), opts, log);
  ex.out = resolve_out_dir(opts.out_dir);
  ex.results = {{"tool", kToolName},
                {"version", kToolVersion},
                {"subcommand", subcommand},
                {"config_hash", config_hash(ex.cfg.raw)},
                {"seed", ex.cfg.seed},
                {"mode", ex.periodic() ? "periodic" : "neumann"},
                {"M", ex.cfg.M},
                {"system", ex.cfg.system.name}};

  auto finish = [&] {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // Timing sits in its own block; everything else is a function of config and seed.
    ex.results["timing"] = {{"wall_seconds", wall}};
    ex.write_outputs();
    std::ofstream os(ex.out / "results.json", std::ios::binary);
    os << ex.results.dump(2) << '\n';
  };

  try {
    if (subcommand == "periods") {
      ex.periods();
    } else if (subcommand == "classify") {
      ex.classify();
    } else if (subcommand == "check-conditions") {
      ex.classify();
      ex.conditions(true);
    } else if (subcommand == "ll") {
      ex.classify();
      ex.ll_only();
    } else if (subcommand == "solve-periodic") {
      ex.solve_periodic();
    } else if (subcommand == "solve-neumann") {
      ex.solve_neumann();
    } else {
      ex.full();
    }
  } catch (const NoSolutions&) {
    finish();
    throw;
  }
  finish();
}

int run_config(const std::string& subcommand, const fs::path& config, const RunOptions& opts, std::ostream& log,
               std::ostream& err) {
  try {
    run_experiment(subcommand, load_config(config), opts, log);
    return kExitOk;
  } catch (const ValidationError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NoSolutions& e) {
    err << "no solutions: " << e.what() << '\n';
    return kExitNoSolutions;
  } catch (const IntegrationFailure& e) {
    err << "integration failure: " << e.what() << '\n';
    return kExitIntegration;
  } catch (const IntegrationOverflow& e) {
    err << "integration failure: " << e.what() << '\n';
    return kExitIntegration;
  } catch (const OriginTooClose& e) {
    err << "integration failure: " << e.what() << '\n';
    return kExitIntegration;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitOther;
  }
}

}  // namespace hamcouple
