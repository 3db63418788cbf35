#include "hamcouple/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "hamcouple/exprlang.hpp"
#include "hamcouple/homogeneous.hpp"

namespace hamcouple {

using nlohmann::json;

namespace {

std::string join_lines(const std::vector<std::string>& v) {
  std::string s = "invalid configuration:";
  for (const auto& e : v) s += "\n  - " + e;
  return s;
}

// Collects every violation instead of stopping at the first.
class Reader {
 public:
  explicit Reader(expr::Binding params) : params_(std::move(params)) {}

  std::vector<std::string> errors;
  const expr::Binding& params() const { return params_; }

  void fail(const std::string& path, const std::string& what) { errors.push_back(path + ": " + what); }

  void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) {
      fail(path, "expected an object");
      return;
    }
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!ok.count(it.key())) fail(path + "." + it.key(), "unknown key");
    }
  }

  /// Number, or a string holding a constant expression over the parameters.
  std::optional<double> number(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      try {
        const auto e = expr::parse_expr(v.get<std::string>());
        return expr::eval_expr(e, params_);
      } catch (const Error& ex) {
        fail(path, ex.what());
        return std::nullopt;
      }
    }
    fail(path, "expected a number or a constant expression");
    return std::nullopt;
  }

  double number_or(const json& obj, const char* key, double def, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) return def;
    return number(obj.at(key), path + "." + key).value_or(def);
  }

  std::optional<double> maybe_number(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return number(obj.at(key), path + "." + key);
  }

  long integer_or(const json& obj, const char* key, long def, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (v.is_number_integer()) return v.get<long>();
    fail(path + "." + key, "expected an integer");
    return def;
  }

  std::size_t count_or(const json& obj, const char* key, std::size_t def, const std::string& path) {
    const long v = integer_or(obj, key, static_cast<long>(def), path);
    if (v < 0) {
      fail(path + "." + key, "must be nonnegative");
      return def;
    }
    return static_cast<std::size_t>(v);
  }

  std::vector<double> numbers(const json& v, const std::string& path) {
    std::vector<double> out;
    if (!v.is_array()) {
      fail(path, "expected an array of numbers");
      return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (auto x = number(v[i], path + "[" + std::to_string(i) + "]")) out.push_back(*x);
    }
    return out;
  }

  std::vector<std::pair<double, double>> ranges(const json& v, const std::string& path) {
    std::vector<std::pair<double, double>> out;
    if (!v.is_array()) {
      fail(path, "expected an array of [lo, hi] pairs");
      return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      const auto r = numbers(v[i], p);
      if (r.size() != 2) {
        fail(p, "expected [lo, hi]");
        continue;
      }
      if (!(r[0] <= r[1])) fail(p, "needs lo <= hi");
      out.emplace_back(r[0], r[1]);
    }
    return out;
  }

  std::optional<expr::Expr> expression(const json& v, const std::string& path, const std::vector<std::string>& slots,
                                       const std::string& slot_note) {
    if (!v.is_string()) {
      fail(path, "expected an expression string");
      return std::nullopt;
    }
    expr::Expr e;
    try {
      e = expr::parse_expr(v.get<std::string>());
    } catch (const SyntaxError& ex) {
      fail(path, ex.what());
      return std::nullopt;
    }
    bool ok = true;
    for (const auto& name : e.free_variables()) {
      if (std::find(slots.begin(), slots.end(), name) != slots.end()) continue;
      if (params_.count(name)) continue;
      fail(path, "references '" + name + "', which is neither a parameter nor " + slot_note);
      ok = false;
    }
    if (!ok) return std::nullopt;
    return e;
  }

  void positive(double x, const std::string& path) {
    if (!(x > 0.0)) fail(path, "must be positive");
  }

 private:
  expr::Binding params_;
};

std::vector<std::string> with_t(std::vector<std::string> s) {
  s.insert(s.begin(), "t");
  return s;
}

std::string slot_note(int M) { return "a state variable for M = " + std::to_string(M); }

std::optional<NamedHamiltonian> planar_hamiltonian(Reader& r, const json& v, const std::string& path) {
  NamedHamiltonian out;
  try {
    if (v.is_string()) {
      auto e = r.expression(v, path, {"u", "v"}, "u or v");
      if (!e) return std::nullopt;
      out.H = expr_hamiltonian(*e, r.params(), true, true);
      out.name = v.get<std::string>();
      return out;
    }
    if (!v.is_object()) {
      r.fail(path, "expected an expression string or a family object");
      return std::nullopt;
    }
    r.allow_keys(v, path, {"H", "asymmetric", "harmonic", "quadratic", "scale", "name"});
    if (v.contains("H")) {
      auto e = r.expression(v.at("H"), path + ".H", {"u", "v"}, "u or v");
      if (!e) return std::nullopt;
      out.H = expr_hamiltonian(*e, r.params(), true, true);
    } else if (v.contains("asymmetric")) {
      const auto p = r.numbers(v.at("asymmetric"), path + ".asymmetric");
      if (p.size() != 2) {
        r.fail(path + ".asymmetric", "expected [mu, nu]");
        return std::nullopt;
      }
      r.positive(p[0], path + ".asymmetric[0]");
      r.positive(p[1], path + ".asymmetric[1]");
      if (!(p[0] > 0 && p[1] > 0)) return std::nullopt;
      out.H = asymmetric_hamiltonian({p[0], p[1]});
      out.closed_form = asym_period({p[0], p[1]});
    } else if (v.contains("quadratic")) {
      const auto p = r.numbers(v.at("quadratic"), path + ".quadratic");
      if (p.size() != 3) {
        r.fail(path + ".quadratic", "expected [a, b, c]");
        return std::nullopt;
      }
      out.H = quadratic_form_hamiltonian(p[0], p[1], p[2]);
    } else if (v.contains("harmonic")) {
      out.H = harmonic_hamiltonian();
      out.closed_form = 2.0 * std::numbers::pi;
    } else {
      r.fail(path, "expected one of H, asymmetric, quadratic, harmonic");
      return std::nullopt;
    }
    if (v.contains("scale")) {
      const double c = r.number_or(v, "scale", 1.0, path);
      r.positive(c, path + ".scale");
      if (!(c > 0)) return std::nullopt;
      out.H = scaled_hamiltonian(out.H, c);
      // H scaled by c turns c times faster.
      if (out.closed_form) *out.closed_form /= c;
    }
    out.name = v.value("name", out.H.name);
  } catch (const Error& e) {
    r.fail(path, e.what());
    return std::nullopt;
  }
  return out;
}

std::function<double(double)> scalar_of_t(const expr::Expr& e, const expr::Binding& params) {
  static const std::array<std::string, 1> kSlots = {"t"};
  auto c = std::make_shared<const expr::CompiledExpr>(e, kSlots, params);
  return [c](double t) {
    const std::array<double, 1> s = {t};
    return c->eval(s);
  };
}

std::function<double(double, double)> scalar_of_tu(const expr::Expr& e, const expr::Binding& params) {
  static const std::array<std::string, 2> kSlots = {"t", "u"};
  auto c = std::make_shared<const expr::CompiledExpr>(e, kSlots, params);
  return [c](double t, double u) {
    const std::array<double, 2> s = {t, u};
    return c->eval(s);
  };
}

void read_system(Reader& r, const json& sj, ExperimentConfig& cfg, double T) {
  const std::string path = "system";
  const int M = cfg.M;
  const auto slots = with_t(state_slot_names(M));
  const std::string preset = sj.value("preset", "");

  if (preset == "pendulum_oscillator") {
    r.allow_keys(sj, path, {"preset", "A", "mu1", "mu2", "nu1", "nu2", "E", "h", "h_bound", "P"});
    if (M != 1) r.fail("M", "the pendulum_oscillator preset has M = 1");
    PendulumOscillatorPreset p;
    p.A = r.number_or(sj, "A", 1.0, path);
    p.mu1 = r.number_or(sj, "mu1", 1.0, path);
    p.mu2 = r.number_or(sj, "mu2", p.mu1, path);
    p.nu1 = r.number_or(sj, "nu1", 1.0, path);
    p.nu2 = r.number_or(sj, "nu2", p.nu1, path);
    r.positive(p.A, path + ".A");
    for (auto [x, n] : {std::pair{p.mu1, "mu1"}, {p.mu2, "mu2"}, {p.nu1, "nu1"}, {p.nu2, "nu2"}}) {
      r.positive(x, path + "." + n);
    }
    if (p.mu2 < p.mu1) r.fail(path + ".mu2", "must satisfy mu1 <= mu2");
    if (p.nu2 < p.nu1) r.fail(path + ".nu2", "must satisfy nu1 <= nu2");
    p.T = T;
    if (sj.contains("E")) {
      if (auto e = r.expression(sj.at("E"), path + ".E", {"t"}, "t")) p.E = scalar_of_t(*e, r.params());
    }
    if (sj.contains("h")) {
      if (auto e = r.expression(sj.at("h"), path + ".h", {"t", "u"}, "t or u")) p.h = scalar_of_tu(*e, r.params());
      if (!sj.contains("h_bound")) r.fail(path + ".h_bound", "required when h is given (sup over t, u of |h|)");
    }
    p.h_bound = r.number_or(sj, "h_bound", 0.0, path);
    if (p.h_bound < 0.0) r.fail(path + ".h_bound", "must be nonnegative");
    if (sj.contains("P")) {
      if (auto e = r.expression(sj.at("P"), path + ".P", slots, slot_note(M))) {
        p.P = expr_state_function(*e, M, r.params());
      }
    }
    if (!r.errors.empty()) return;
    try {
      cfg.system = pendulum_oscillator_system(p);
      cfg.H1 = NamedHamiltonian{"H1", asymmetric_hamiltonian({p.mu1, p.nu1}), asym_period({p.mu1, p.nu1})};
      cfg.H2 = NamedHamiltonian{"H2", asymmetric_hamiltonian({p.mu2, p.nu2}), asym_period({p.mu2, p.nu2})};
    } catch (const Error& e) {
      r.fail(path, e.what());
    }
    return;
  }

  if (preset == "pendulum_harmonic") {
    r.allow_keys(sj, path, {"preset", "A"});
    if (M != 1) r.fail("M", "the pendulum_harmonic preset has M = 1");
    const double A = r.number_or(sj, "A", 1.0, path);
    r.positive(A, path + ".A");
    if (r.errors.empty()) {
      cfg.system = pendulum_harmonic_system(A, T);
      cfg.H1 = NamedHamiltonian{"H1", harmonic_hamiltonian(), 2.0 * std::numbers::pi};
      cfg.H2 = cfg.H1;
      cfg.H2->name = "H2";
    }
    return;
  }

  if (!preset.empty()) {
    r.fail(path + ".preset", "unknown preset '" + preset + "' (pendulum_oscillator, pendulum_harmonic)");
    return;
  }

  r.allow_keys(sj, path, {"H", "P", "F", "decomposition", "name"});
  CoupledSystem sys;
  sys.M = M;
  sys.T = T;
  sys.name = sj.value("name", "custom");
  std::vector<std::string> xy_slots = {"t"};
  for (int i = 1; i <= M; ++i) xy_slots.push_back("x" + std::to_string(i));
  for (int i = 1; i <= M; ++i) xy_slots.push_back("y" + std::to_string(i));
  if (!sj.contains("H")) {
    r.fail(path + ".H", "required (or use a preset)");
  } else if (auto e = r.expression(sj.at("H"), path + ".H", xy_slots, "t, x_i or y_i for M = " + std::to_string(M))) {
    sys.hamiltonian = expr_state_function(*e, M, r.params());
  }
  sys.coupling = zero_state_function(M);
  if (sj.contains("P")) {
    if (auto e = r.expression(sj.at("P"), path + ".P", slots, slot_note(M))) {
      sys.coupling = expr_state_function(*e, M, r.params());
    }
  }
  if (!sj.contains("F") || !sj.at("F").is_array() || sj.at("F").size() != 2) {
    r.fail(path + ".F", "required: [F_u, F_v] in t, u, v");
  } else {
    auto fu = r.expression(sj.at("F")[0], path + ".F[0]", {"t", "u", "v"}, "t, u or v");
    auto fv = r.expression(sj.at("F")[1], path + ".F[1]", {"t", "u", "v"}, "t, u or v");
    if (fu && fv) sys.F = expr_planar_field(*fu, *fv, r.params());
  }
  if (sj.contains("decomposition")) {
    const json& dj = sj.at("decomposition");
    const std::string dp = path + ".decomposition";
    r.allow_keys(dj, dp, {"H1", "H2", "Q", "mode", "q_gradient_bound"});
    DecompositionData d;
    auto h1 = dj.contains("H1") ? planar_hamiltonian(r, dj.at("H1"), dp + ".H1") : std::nullopt;
    auto h2 = dj.contains("H2") ? planar_hamiltonian(r, dj.at("H2"), dp + ".H2") : std::nullopt;
    if (!dj.contains("H1")) r.fail(dp + ".H1", "required");
    if (!dj.contains("H2")) r.fail(dp + ".H2", "required");
    d.Q = zero_planar_scalar();
    if (dj.contains("Q")) {
      if (auto q = r.expression(dj.at("Q"), dp + ".Q", {"t", "u", "v"}, "t, u or v")) {
        d.Q = expr_planar_scalar(*q, r.params());
      }
      if (!dj.contains("q_gradient_bound")) r.fail(dp + ".q_gradient_bound", "required when Q is given");
    }
    d.q_gradient_bound = r.number_or(dj, "q_gradient_bound", 0.0, dp);
    const std::string mode = dj.value("mode", "global");
    if (mode == "global") {
      d.mode = DecompositionMode::Global;
    } else if (mode == "quadrant") {
      d.mode = DecompositionMode::Quadrant;
    } else {
      r.fail(dp + ".mode", "expected global or quadrant");
    }
    if (h1 && h2) {
      d.H1 = h1->H;
      d.H2 = h2->H;
      sys.decomposition = d;
      cfg.H1 = *h1;
      cfg.H2 = *h2;
      cfg.H1->name = "H1";
      cfg.H2->name = "H2";
    }
  }
  cfg.system = std::move(sys);
}

void read_solver(Reader& r, const json& j, ExperimentConfig& cfg) {
  const std::string path = "solver";
  r.allow_keys(j, path,
               {"newton_tol", "max_iter", "integration_tol", "fd_step", "cond_limit", "lm_damping", "multistart"});
  ShootingOptions& o = cfg.shooting;
  o.newton_tol = r.number_or(j, "newton_tol", o.newton_tol, path);
  o.max_iter = static_cast<int>(r.integer_or(j, "max_iter", o.max_iter, path));
  o.integration_tol = r.number_or(j, "integration_tol", o.integration_tol, path);
  o.fd_step = r.number_or(j, "fd_step", o.fd_step, path);
  o.cond_limit = r.number_or(j, "cond_limit", o.cond_limit, path);
  o.lm_damping = r.number_or(j, "lm_damping", o.lm_damping, path);
  for (auto [x, n] : {std::pair{o.newton_tol, "newton_tol"}, {o.integration_tol, "integration_tol"},
                      {o.fd_step, "fd_step"}, {o.cond_limit, "cond_limit"}, {o.lm_damping, "lm_damping"}}) {
    r.positive(x, path + "." + n);
  }
  if (o.max_iter < 1) r.fail(path + ".max_iter", "must be at least 1");

  const json ms = j.is_object() && j.contains("multistart") ? j.at("multistart") : json::object();
  const std::string mp = path + ".multistart";
  r.allow_keys(ms, mp,
               {"x_counts", "y_ranges", "y_counts", "radii", "angles", "u_values", "jitter", "max_starts", "dedup_tol"});
  MultistartSpec& s = cfg.multistart;
  const int M = cfg.M;
  auto ints = [&](const char* key, int def) {
    std::vector<int> out(static_cast<std::size_t>(M), def);
    if (!ms.contains(key)) return out;
    const auto v = r.numbers(ms.at(key), mp + "." + key);
    if (static_cast<int>(v.size()) != M) {
      r.fail(mp + "." + key, "needs M = " + std::to_string(M) + " entries");
      return out;
    }
    for (int i = 0; i < M; ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(v[static_cast<std::size_t>(i)]);
    return out;
  };
  const bool neumann = cfg.mode == SystemMode::Neumann;
  s.x_counts = ints("x_counts", neumann ? 10 : 4);
  s.y_counts = ints("y_counts", 4);
  s.y_ranges.assign(static_cast<std::size_t>(M), {-1.0, 1.0});
  if (ms.contains("y_ranges")) {
    auto yr = r.ranges(ms.at("y_ranges"), mp + ".y_ranges");
    if (static_cast<int>(yr.size()) != M) {
      r.fail(mp + ".y_ranges", "needs M = " + std::to_string(M) + " entries");
    } else {
      s.y_ranges = yr;
    }
  }
  s.radii = ms.contains("radii") ? r.numbers(ms.at("radii"), mp + ".radii") : std::vector<double>{0.5, 1.0, 2.0};
  s.angles = static_cast<int>(r.integer_or(ms, "angles", 8, mp));
  s.u_values = ms.contains("u_values") ? r.numbers(ms.at("u_values"), mp + ".u_values")
                                       : std::vector<double>{-2.0, -1.0, 0.0, 1.0, 2.0};
  s.jitter = r.number_or(ms, "jitter", 0.0, mp);
  s.max_starts = r.count_or(ms, "max_starts", 2000, mp);
  s.dedup_tol = r.number_or(ms, "dedup_tol", 0.0, mp);
  if (s.max_starts > 2000) r.fail(mp + ".max_starts", "the start budget is at most 2000");
  for (int c : s.x_counts) {
    if (c < 1) r.fail(mp + ".x_counts", "entries must be at least 1");
  }
  for (int c : s.y_counts) {
    if (c < 1) r.fail(mp + ".y_counts", "entries must be at least 1");
  }
  if (s.angles < 1) r.fail(mp + ".angles", "must be at least 1");
}

BodyCheck read_body(Reader& r, const json& j, const std::string& path, int M, bool with_matrix) {
  BodyCheck b;
  if (with_matrix) {
    r.allow_keys(j, path, {"center", "semi_axes", "matrix", "boundary_grid", "x_grid", "integration_tol"});
  } else {
    r.allow_keys(j, path, {"center", "semi_axes", "sigma", "boundary_grid", "x_grid", "angle_tol", "integration_tol"});
  }
  auto vec = [&](const char* key, double def) {
    State s = State::Constant(M, def);
    if (!j.contains(key)) return s;
    const auto v = r.numbers(j.at(key), path + "." + key);
    if (static_cast<int>(v.size()) != M) {
      r.fail(path + "." + key, "needs M = " + std::to_string(M) + " entries");
      return s;
    }
    for (int i = 0; i < M; ++i) s[i] = v[static_cast<std::size_t>(i)];
    return s;
  };
  b.center = vec("center", 0.0);
  b.semi_axes = vec("semi_axes", 1.0);
  if ((b.semi_axes.array() <= 0.0).any()) r.fail(path + ".semi_axes", "entries must be positive");
  b.sigma = static_cast<int>(r.integer_or(j, "sigma", 1, path));
  if (b.sigma != 1 && b.sigma != -1) r.fail(path + ".sigma", "must be +1 or -1");
  b.opts.boundary_grid = r.count_or(j, "boundary_grid", b.opts.boundary_grid, path);
  b.opts.x_grid = r.count_or(j, "x_grid", b.opts.x_grid, path);
  b.opts.angle_tol = r.number_or(j, "angle_tol", b.opts.angle_tol, path);
  b.opts.integration_tol = r.number_or(j, "integration_tol", b.opts.integration_tol, path);
  if (with_matrix) {
    b.A = Matrix::Identity(M, M);
    if (!j.contains("matrix") || !j.at("matrix").is_array() || static_cast<int>(j.at("matrix").size()) != M) {
      r.fail(path + ".matrix", "required: M x M array");
    } else {
      for (int i = 0; i < M; ++i) {
        const auto row = r.numbers(j.at("matrix")[static_cast<std::size_t>(i)], path + ".matrix");
        if (static_cast<int>(row.size()) != M) {
          r.fail(path + ".matrix", "rows need M entries");
          continue;
        }
        for (int k = 0; k < M; ++k) b.A(i, k) = row[static_cast<std::size_t>(k)];
      }
    }
  }
  return b;
}

void read_conditions(Reader& r, const json& j, ExperimentConfig& cfg, std::pair<double, double> span) {
  const std::string path = "conditions";
  r.allow_keys(j, path,
               {"decomposition_samples", "decomposition_tol", "periodicity_tol", "mbar", "ll", "orbit_tol", "ensemble",
                "twist", "avoiding_rays", "indefinite_twist"});
  ConditionsConfig& c = cfg.conditions;
  const int M = cfg.M;
  c.decomposition_samples = r.count_or(j, "decomposition_samples", c.decomposition_samples, path);
  c.decomposition_tol = r.number_or(j, "decomposition_tol", c.decomposition_tol, path);
  c.periodicity_tol = r.number_or(j, "periodicity_tol", c.periodicity_tol, path);
  c.orbit_tol = r.number_or(j, "orbit_tol", c.orbit_tol, path);

  c.mbar_box.t = span;
  if (j.contains("mbar")) {
    const json& mj = j.at("mbar");
    const std::string mp = path + ".mbar";
    r.allow_keys(mj, mp, {"samples", "override", "t", "x", "y", "u", "v"});
    c.mbar_samples = r.count_or(mj, "samples", c.mbar_samples, mp);
    c.mbar_override = r.maybe_number(mj, "override", mp);
    if (c.mbar_override && *c.mbar_override < 0.0) r.fail(mp + ".override", "must be nonnegative");
    auto pair = [&](const char* key, std::pair<double, double>& dst) {
      if (!mj.contains(key)) return;
      const auto v = r.numbers(mj.at(key), mp + "." + key);
      if (v.size() == 2) {
        dst = {v[0], v[1]};
      } else {
        r.fail(mp + "." + key, "expected [lo, hi]");
      }
    };
    pair("t", c.mbar_box.t);
    pair("u", c.mbar_box.u);
    pair("v", c.mbar_box.v);
    if (mj.contains("x")) c.mbar_box.x = r.ranges(mj.at("x"), mp + ".x");
    if (mj.contains("y")) c.mbar_box.y = r.ranges(mj.at("y"), mp + ".y");
    if (!c.mbar_box.x.empty() && static_cast<int>(c.mbar_box.x.size()) != M) r.fail(mp + ".x", "needs M entries");
    if (!c.mbar_box.y.empty() && static_cast<int>(c.mbar_box.y.size()) != M) r.fail(mp + ".y", "needs M entries");
  }

  if (j.contains("ll")) {
    const json& lj = j.at("ll");
    const std::string lp = path + ".ll";
    r.allow_keys(lj, lp, {"theta_points", "lambdas", "s_halfwidth", "s_points", "t_nodes", "sides"});
    c.ll.theta_points = r.count_or(lj, "theta_points", c.ll.theta_points, lp);
    if (lj.contains("lambdas")) c.ll.lambdas = r.numbers(lj.at("lambdas"), lp + ".lambdas");
    c.ll.s_halfwidth = r.number_or(lj, "s_halfwidth", 0.0, lp);
    c.ll.s_points = r.count_or(lj, "s_points", c.ll.s_points, lp);
    c.ll.t_nodes = r.count_or(lj, "t_nodes", c.ll.t_nodes, lp);
    if (c.ll.t_nodes < 2) r.fail(lp + ".t_nodes", "must be at least 2");
    if (c.ll.theta_points < 1) r.fail(lp + ".theta_points", "must be at least 1");
    if (c.ll.s_points < 1) r.fail(lp + ".s_points", "must be at least 1");
    if (lj.contains("sides")) {
      if (!lj.at("sides").is_array()) {
        r.fail(lp + ".sides", "expected an array of lower/upper");
      } else {
        for (const auto& s : lj.at("sides")) {
          const std::string v = s.is_string() ? s.get<std::string>() : "";
          if (v == "lower") {
            c.ll_sides.push_back(LLSide::Lower);
          } else if (v == "upper") {
            c.ll_sides.push_back(LLSide::Upper);
          } else {
            r.fail(lp + ".sides", "entries must be lower or upper");
          }
        }
      }
    }
  }

  if (j.contains("ensemble")) {
    const json& ej = j.at("ensemble");
    const std::string ep = path + ".ensemble";
    r.allow_keys(ej, ep, {"constants", "fourier", "include_solutions"});
    if (ej.contains("constants")) {
      c.ensemble.constants.clear();
      for (const auto& [lo, hi] : r.ranges(ej.at("constants"), ep + ".constants")) c.ensemble.constants.emplace_back(lo, hi);
    }
    if (ej.contains("fourier")) {
      const json& fj = ej.at("fourier");
      r.allow_keys(fj, ep + ".fourier", {"count", "amplitude", "modes"});
      c.ensemble.fourier_count = r.count_or(fj, "count", 3, ep + ".fourier");
      c.ensemble.fourier_amplitude = r.number_or(fj, "amplitude", 1.0, ep + ".fourier");
      c.ensemble.fourier_modes = static_cast<int>(r.integer_or(fj, "modes", 3, ep + ".fourier"));
    }
    if (ej.contains("include_solutions")) {
      if (ej.at("include_solutions").is_boolean()) {
        c.ensemble.include_solutions = ej.at("include_solutions").get<bool>();
      } else {
        r.fail(ep + ".include_solutions", "expected true or false");
      }
    }
  }
  // The constant-bounds check above reuses the [lo, hi] reader, which would
  // reject constants with u > v; accept any pair instead.
  r.errors.erase(std::remove_if(r.errors.begin(), r.errors.end(),
                                [](const std::string& e) {
                                  return e.rfind("conditions.ensemble.constants", 0) == 0 &&
                                         e.find("needs lo <= hi") != std::string::npos;
                                }),
                 r.errors.end());

  if (j.contains("twist")) {
    const json& tj = j.at("twist");
    const std::string tp = path + ".twist";
    r.allow_keys(tj, tp, {"rectangle", "sigma", "x_grid", "face_grid", "x_offset", "integration_tol"});
    RectangleCheck t;
    if (tj.contains("rectangle")) t.D.sides = r.ranges(tj.at("rectangle"), tp + ".rectangle");
    if (static_cast<int>(t.D.sides.size()) != M) r.fail(tp + ".rectangle", "needs M = " + std::to_string(M) + " [a, b] pairs");
    for (const auto& [a, b] : t.D.sides) {
      if (!(a < b)) r.fail(tp + ".rectangle", "needs a_i < b_i");
    }
    t.sigma.assign(static_cast<std::size_t>(M), 1);
    if (tj.contains("sigma")) {
      const auto s = r.numbers(tj.at("sigma"), tp + ".sigma");
      if (static_cast<int>(s.size()) != M) {
        r.fail(tp + ".sigma", "needs M entries");
      } else {
        for (int i = 0; i < M; ++i) {
          const double v = s[static_cast<std::size_t>(i)];
          if (v != 1.0 && v != -1.0) r.fail(tp + ".sigma", "entries must be +1 or -1");
          t.sigma[static_cast<std::size_t>(i)] = v < 0 ? -1 : 1;
        }
      }
    }
    t.opts.x_grid = r.count_or(tj, "x_grid", t.opts.x_grid, tp);
    t.opts.face_grid = r.count_or(tj, "face_grid", t.opts.face_grid, tp);
    t.opts.x_offset = r.number_or(tj, "x_offset", 0.0, tp);
    t.opts.integration_tol = r.number_or(tj, "integration_tol", t.opts.integration_tol, tp);
    c.twist = t;
  }
  if (j.contains("avoiding_rays")) c.avoiding_rays = read_body(r, j.at("avoiding_rays"), path + ".avoiding_rays", M, false);
  if (j.contains("indefinite_twist")) {
    c.indefinite_twist = read_body(r, j.at("indefinite_twist"), path + ".indefinite_twist", M, true);
  }
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : ConfigError(join_lines(violations)), violations_(std::move(violations)) {}

std::string config_hash(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const json& j, const std::string& source) {
  if (!j.is_object()) throw ConfigError(source + ": top level must be an object");
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.source = source;

  // Parameters first: later numbers and expressions may use them.
  expr::Binding params = {{"pi", std::numbers::pi}};
  std::vector<std::string> early;
  if (j.contains("parameters")) {
    const json& pj = j.at("parameters");
    if (!pj.is_object()) {
      early.push_back("parameters: expected an object of name: number");
    } else {
      for (auto it = pj.begin(); it != pj.end(); ++it) {
        if (!it.value().is_number()) {
          early.push_back("parameters." + it.key() + ": expected a number");
        } else {
          params[it.key()] = it.value().get<double>();
        }
      }
    }
  }
  Reader r(params);
  r.errors = early;
  cfg.parameters = params;
  r.allow_keys(j, "config",
               {"mode", "M", "T", "interval", "seed", "parameters", "system", "hamiltonians", "classify", "solver",
                "conditions", "output", "description"});

  const std::string mode = j.value("mode", "periodic");
  if (mode == "periodic") {
    cfg.mode = SystemMode::Periodic;
  } else if (mode == "neumann") {
    cfg.mode = SystemMode::Neumann;
  } else {
    r.fail("mode", "expected periodic or neumann");
  }
  cfg.M = static_cast<int>(r.integer_or(j, "M", 1, "config"));
  if (cfg.M < 1) {
    r.fail("M", "must be at least 1");
    cfg.M = 1;
  }
  if (j.contains("seed")) {
    if (j.at("seed").is_number_unsigned()) {
      cfg.seed = j.at("seed").get<std::uint64_t>();
    } else {
      r.fail("seed", "expected a nonnegative integer");
    }
  }

  double T = 0.0, a = 0.0, b = 0.0;
  if (cfg.mode == SystemMode::Periodic) {
    if (!j.contains("T")) {
      r.fail("T", "required in periodic mode");
    } else {
      T = r.number(j.at("T"), "T").value_or(0.0);
      r.positive(T, "T");
    }
  } else {
    const auto iv = j.contains("interval") ? r.numbers(j.at("interval"), "interval") : std::vector<double>{};
    if (iv.size() != 2) {
      r.fail("interval", "required in neumann mode: [a, b]");
    } else {
      a = iv[0];
      b = iv[1];
      if (!(a < b)) r.fail("interval", "needs a < b");
    }
    T = b - a;
  }

  if (!j.contains("system")) {
    r.fail("system", "required");
  } else {
    read_system(r, j.at("system"), cfg, T > 0 ? T : 1.0);
  }
  cfg.system.mode = cfg.mode;
  cfg.system.T = T;
  cfg.system.a = a;
  cfg.system.b = b;

  if (j.contains("hamiltonians")) {
    const json& hj = j.at("hamiltonians");
    if (!hj.is_array()) {
      r.fail("hamiltonians", "expected an array");
    } else {
      for (std::size_t i = 0; i < hj.size(); ++i) {
        if (auto h = planar_hamiltonian(r, hj[i], "hamiltonians[" + std::to_string(i) + "]")) {
          cfg.hamiltonians.push_back(std::move(*h));
        }
      }
    }
  }
  if (j.contains("classify")) {
    const json& cj = j.at("classify");
    r.allow_keys(cj, "classify", {"tau1", "tau2", "T", "tol"});
    cfg.classify.tau1 = r.maybe_number(cj, "tau1", "classify");
    cfg.classify.tau2 = r.maybe_number(cj, "tau2", "classify");
    cfg.classify.T = r.maybe_number(cj, "T", "classify");
    cfg.classify.tol = r.number_or(cj, "tol", 1e-12, "classify");
    for (auto [v, n] : {std::pair{cfg.classify.tau1, "tau1"}, {cfg.classify.tau2, "tau2"}, {cfg.classify.T, "T"}}) {
      if (v) r.positive(*v, std::string("classify.") + n);
    }
  }
  read_solver(r, j.contains("solver") ? j.at("solver") : json::object(), cfg);
  const auto span = cfg.mode == SystemMode::Periodic ? std::pair{0.0, T} : std::pair{a, b};
  read_conditions(r, j.contains("conditions") ? j.at("conditions") : json::object(), cfg, span);
  if (j.contains("output")) {
    const json& oj = j.at("output");
    r.allow_keys(oj, "output", {"trajectory_stride"});
    cfg.output.trajectory_stride = r.number_or(oj, "trajectory_stride", cfg.output.trajectory_stride, "output");
    r.positive(cfg.output.trajectory_stride, "output.trajectory_stride");
  }

  if (!r.errors.empty()) throw ValidationError(r.errors);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return parse_config(j, path.string());
}

}  // namespace hamcouple
