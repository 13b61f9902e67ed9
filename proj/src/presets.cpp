#include "marcus/presets.hpp"

#include <algorithm>
#include <cmath>

#include "marcus/errors.hpp"
#include "marcus/expression.hpp"

namespace marcus {

namespace {

const char* const kCoefficientKeys[] = {"a", "b", "c", "A", "B", "C", "alpha", "beta", "sigma"};

std::function<double(double)> compile(const std::string& text) {
  auto e = std::make_shared<const Expression>(Expression::parse(text));
  return [e](double x) { return (*e)(x); };
}

InitialCondition u0_from_expression(const std::string& text) {
  const auto f = compile(text);
  return {[f](const Vec& x) { return f(x(0)); }, false};
}

std::vector<double> time_list(double start, double stop, double step) {
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long k = 0; k <= n; ++k) out.push_back(start + static_cast<double>(k) * step);
  return out;
}

LevyMeasureSpec uniform_poisson(double intensity, double lo, double hi) {
  LevyMeasureSpec s;
  s.kind = FiniteActivity{intensity, MarkDistribution::uniform(lo, hi)};
  return s;
}

Problem base_problem(const std::string& name) {
  Problem p;
  p.name = name;
  p.driver.horizon = 1.0;
  p.driver.dt = 1e-3;
  p.driver.m = 1;
  p.solver.integration.dt = 1e-3;
  p.grid = SpatialGrid::uniform(-3.0, 3.0, 201);
  p.times = {0.0, 0.5, 1.0};
  p.sources["u0"] = "1/(1+x^2)";
  return p;
}

void set_coefficients(Problem& p, std::map<std::string, std::string> sources) {
  for (const char* key : kCoefficientKeys)
    if (!sources.count(key)) sources[key] = "";
  p.coeffs = coefficients_from_expressions(sources);
  for (const auto& [k, v] : sources) p.sources[k] = v;
}

std::string canonical_name(const std::string& name) {
  if (name == "identity") return "zero";
  if (name == "deterministic" || name == "zero-noise") return "smooth-deterministic";
  if (name == "linear-A") return "linear";
  if (name == "sinh" || name == "sinh-transport" || name == "pure-transport") return "sinh-example";
  return name;
}

}  // namespace

std::shared_ptr<CoefficientSet> coefficients_from_expressions(
    const std::map<std::string, std::string>& sources) {
  auto c = std::make_shared<CoefficientSet>(CoefficientSet::zero(1, 1));
  for (const auto& [key, text] : sources) {
    if (text.empty()) continue;
    const auto f = compile(text);
    if (key == "a") c->a = scalar::vec_field(f);
    else if (key == "b") c->b = scalar::scalar(f);
    else if (key == "c") c->c = scalar::scalar(f);
    else if (key == "A") c->A = scalar::mat_field(f);
    else if (key == "B") c->B = scalar::row_field(f);
    else if (key == "C") c->C = scalar::row_field(f);
    else if (key == "alpha") c->alpha = scalar::mat_field(f);
    else if (key == "beta") c->beta = scalar::row_field(f);
    else if (key == "sigma") c->sigma = scalar::row_field(f);
    else if (key != "u0") throw InputError("unknown coefficient '" + key + "'");
  }
  return c;
}

std::vector<std::pair<std::string, std::string>> preset_catalog() {
  return {
      {"zero", "all coefficients zero; u stays u0 (alias: identity)"},
      {"constant-drift", "a = 1; u(t, x) = u0(x + t)"},
      {"smooth-deterministic",
       "noise-free smooth a, b, c checked against the deterministic reference "
       "(aliases: deterministic, zero-noise)"},
      {"linear", "A(x) = x, B = 0.2, C = 0.1 with Brownian noise (alias: linear-A)"},
      {"mixed", "drift, Brownian and jump terms with c = C = sigma = 0"},
      {"sinh-example",
       "alpha = sqrt(x^2+1) with compound Poisson jumps, rate 1, marks uniform on [-1, 1] "
       "(aliases: sinh, sinh-transport, pure-transport)"},
      {"jump-drift", "a = alpha = sqrt(x^2+1), compound Poisson jumps; drift between jumps"},
      {"stable-truncated",
       "alpha = sqrt(x^2+1), 1.75-stable driver truncated at 0.05 with Gaussian substitute"},
      {"fig1", "alpha = sqrt(x^2+1), 1.75-stable driver with scale 0.1, t = 0, 10, ..., 100"},
  };
}

Problem make_preset(const std::string& requested) {
  const std::string name = canonical_name(requested);
  Problem p = base_problem(name);
  p.u0 = u0_from_expression(p.sources["u0"]);
  if (name == "zero") {
    set_coefficients(p, {});
    p.driver.brownian = true;
    p.driver.has_levy = true;
    p.driver.levy = uniform_poisson(1.0, -1.0, 1.0);
    p.oracle = Problem::OracleKind::deterministic;
  } else if (name == "constant-drift") {
    set_coefficients(p, {{"a", "1"}});
    p.oracle = Problem::OracleKind::deterministic;
  } else if (name == "smooth-deterministic") {
    set_coefficients(p, {{"a", "0.5*sin(x) + 0.2"}, {"b", "-0.3*cos(x)"}, {"c", "0.1*exp(-x^2)"}});
    p.times = {0.0, 0.25, 0.5, 0.75, 1.0};
    p.oracle = Problem::OracleKind::deterministic;
  } else if (name == "linear") {
    set_coefficients(p, {{"A", "x"}, {"B", "0.2"}, {"C", "0.1"}});
    p.driver.brownian = true;
    p.grid = SpatialGrid::uniform(-2.0, 2.0, 81);
  } else if (name == "mixed") {
    set_coefficients(p, {{"a", "0.2*sin(x)"},
                         {"b", "-0.1*cos(x)"},
                         {"A", "0.3"},
                         {"B", "0.1*x/(1+x^2)"},
                         {"alpha", "0.5*sqrt(x^2+1)"},
                         {"beta", "0.2"}});
    p.driver.brownian = true;
    p.driver.has_levy = true;
    p.driver.levy = uniform_poisson(2.0, -1.0, 1.0);
  } else if (name == "sinh-example") {
    set_coefficients(p, {{"alpha", "sqrt(x^2+1)"}});
    p.driver.has_levy = true;
    p.driver.levy = uniform_poisson(1.0, -1.0, 1.0);
    p.oracle = Problem::OracleKind::sinh_example;
  } else if (name == "jump-drift") {
    set_coefficients(p, {{"a", "sqrt(x^2+1)"}, {"alpha", "sqrt(x^2+1)"}});
    p.driver.has_levy = true;
    p.driver.levy = uniform_poisson(1.0, -1.0, 1.0);
    p.oracle = Problem::OracleKind::sinh_example;
    p.oracle_drift_weight = 1.0;
  } else if (name == "stable-truncated") {
    set_coefficients(p, {{"alpha", "sqrt(x^2+1)"}});
    p.driver.has_levy = true;
    p.driver.levy.kind = AlphaStable{1.75, 0.1};
    p.driver.levy.truncation_epsilon = 0.05;
    p.driver.small_jump_mode = SmallJumpMode::gaussian_substitute;
    p.oracle = Problem::OracleKind::sinh_example;
  } else if (name == "fig1") {
    set_coefficients(p, {{"alpha", "sqrt(x^2+1)"}});
    p.driver.horizon = 100.0;
    p.driver.dt = 1e-2;
    p.solver.integration.dt = 1e-2;
    p.driver.has_levy = true;
    p.driver.levy.kind = AlphaStable{1.75, 0.1};
    p.driver.levy.truncation_epsilon = 0.05;
    p.direct_stable_path = true;
    p.auto_grid = true;
    p.grid = SpatialGrid::asinh_uniform(-6.0, 6.0, 1201);
    p.times = time_list(0.0, 100.0, 10.0);
    p.oracle = Problem::OracleKind::sinh_example;
  } else {
    throw InputError("unknown preset '" + requested + "'");
  }
  p.driver.extra_times = p.times;
  return p;
}

const Config::Schema& config_schema() {
  static const Config::Schema schema = {
      {"problem",
       {"preset", "a", "b", "c", "A", "B", "C", "alpha", "beta", "sigma", "u0", "oracle",
        "oracle_anchor", "oracle_domain_lo", "oracle_domain_hi", "oracle_drift_weight",
        "oracle_brownian_weight"}},
      {"driver",
       {"kind", "intensity", "marks", "mark_lo", "mark_hi", "mark_mean", "mark_sd", "mark_value",
        "alpha", "scale", "brownian", "horizon", "seed", "realization_index", "direct_path"}},
      {"numerics",
       {"dt", "substeps", "grid_lo", "grid_hi", "grid_points", "grid_spacing", "grid_auto", "times",
        "t_step", "truncation_epsilon", "small_jump_mode", "table_grid", "table_points",
        "table_margin", "inversion", "inversion_tolerance", "max_iter", "domain_bound",
        "threads"}},
      {"output", {"dir", "field", "driver", "trajectories", "report"}},
      {"checks",
       {"rmse_max", "max_abs_max", "residual_max", "exp_map_residual_max", "slope_min",
        "slope_max", "r2_min", "dt_ladder", "reference_dt", "realizations", "probe_points",
        "samples", "exp_map_cases"}},
  };
  return schema;
}

RunConfig build_run_config(const Config& config, const std::string& preset_override) {
  config.validate(config_schema());
  RunConfig rc;
  rc.raw = config;
  const std::string preset =
      preset_override.empty() ? config.string("problem", "preset", "zero") : preset_override;
  try {
    rc.problem = make_preset(preset);
  } catch (const InputError& e) {
    const int line = config.has("problem", "preset") ? config.get("problem", "preset").line : 0;
    throw ConfigError(e.what(), line, "problem.preset");
  }
  Problem& p = rc.problem;

  // Coefficients and initial condition given as expressions.
  bool custom = false;
  std::map<std::string, std::string> sources = p.sources;
  for (const char* key : kCoefficientKeys) {
    if (!config.has("problem", key)) continue;
    sources[key] = config.string("problem", key, "");
    custom = true;
  }
  try {
    if (custom) set_coefficients(p, sources);
    if (config.has("problem", "u0")) {
      p.sources["u0"] = config.string("problem", "u0", "");
      p.u0 = u0_from_expression(p.sources["u0"]);
    }
  } catch (const InputError& e) {
    throw ConfigError(e.what(), 0, "problem");
  }
  if (config.has("problem", "oracle")) {
    const auto& v = config.get("problem", "oracle");
    const std::string o = config.string("problem", "oracle", "");
    if (o == "none") p.oracle = Problem::OracleKind::none;
    else if (o == "deterministic") p.oracle = Problem::OracleKind::deterministic;
    else if (o == "sinh") p.oracle = Problem::OracleKind::sinh_example;
    else if (o == "h_transform") {
      p.oracle = Problem::OracleKind::h_transform;
      p.oracle_alpha = compile(p.sources["alpha"].empty() ? "1" : p.sources["alpha"]);
    } else {
      throw ConfigError("expected none, deterministic, sinh or h_transform", v.line, "problem.oracle");
    }
  }
  p.oracle_anchor = config.number("problem", "oracle_anchor", p.oracle_anchor);
  p.oracle_domain_lo = config.number("problem", "oracle_domain_lo", p.oracle_domain_lo);
  p.oracle_domain_hi = config.number("problem", "oracle_domain_hi", p.oracle_domain_hi);
  p.oracle_drift_weight = config.number("problem", "oracle_drift_weight", p.oracle_drift_weight);
  p.oracle_brownian_weight =
      config.number("problem", "oracle_brownian_weight", p.oracle_brownian_weight);

  // Driver.
  DriverOptions& d = p.driver;
  if (config.has("driver", "kind")) {
    const auto& v = config.get("driver", "kind");
    const std::string kind = config.string("driver", "kind", "");
    if (kind == "none") {
      d.has_levy = false;
    } else if (kind == "compound_poisson") {
      d.has_levy = true;
      if (!d.levy.is_finite_activity()) d.levy = uniform_poisson(1.0, -1.0, 1.0);
      d.levy.truncation_epsilon = 0.0;
    } else if (kind == "alpha_stable") {
      d.has_levy = true;
      if (d.levy.is_finite_activity()) {
        d.levy.kind = AlphaStable{1.75, 0.1};
        d.levy.truncation_epsilon = 0.05;
      }
    } else {
      throw ConfigError("expected none, compound_poisson or alpha_stable", v.line, "driver.kind");
    }
  }
  if (auto* f = std::get_if<FiniteActivity>(&d.levy.kind)) {
    f->intensity = config.number("driver", "intensity", f->intensity);
    if (config.has("driver", "marks")) {
      const auto& v = config.get("driver", "marks");
      const std::string marks = config.string("driver", "marks", "");
      if (marks == "uniform") f->marks = MarkDistribution::uniform(-1.0, 1.0);
      else if (marks == "normal") f->marks = MarkDistribution::normal(0.0, 1.0);
      else if (marks == "constant") f->marks = MarkDistribution::constant(1.0);
      else throw ConfigError("expected uniform, normal or constant", v.line, "driver.marks");
    }
    auto& mk = f->marks;
    if (mk.kind == MarkDistribution::Kind::uniform) {
      mk.first = config.number("driver", "mark_lo", mk.first);
      mk.second = config.number("driver", "mark_hi", mk.second);
    } else if (mk.kind == MarkDistribution::Kind::normal) {
      mk.first = config.number("driver", "mark_mean", mk.first);
      mk.second = config.number("driver", "mark_sd", mk.second);
    } else {
      mk.first = config.number("driver", "mark_value", mk.first);
    }
  } else if (auto* s = std::get_if<AlphaStable>(&d.levy.kind)) {
    s->alpha = config.number("driver", "alpha", s->alpha);
    s->scale = config.number("driver", "scale", s->scale);
  }
  d.brownian = config.boolean("driver", "brownian", d.brownian);
  d.horizon = config.number("driver", "horizon", d.horizon);
  d.seed = config.unsigned64("driver", "seed", d.seed);
  d.realization_index = config.unsigned64("driver", "realization_index", d.realization_index);
  p.direct_stable_path = config.boolean("driver", "direct_path", p.direct_stable_path);

  // Numerics.
  auto& ip = p.solver.integration;
  ip.dt = config.number("numerics", "dt", ip.dt);
  d.dt = ip.dt;
  ip.substeps = static_cast<int>(config.integer("numerics", "substeps", ip.substeps));
  ip.domain_bound = config.number("numerics", "domain_bound", ip.domain_bound);
  if (config.has("numerics", "truncation_epsilon"))
    d.levy.truncation_epsilon = config.number("numerics", "truncation_epsilon", 0.0);
  if (config.has("numerics", "small_jump_mode")) {
    const auto& v = config.get("numerics", "small_jump_mode");
    try {
      d.small_jump_mode = small_jump_mode_from_string(config.string("numerics", "small_jump_mode", ""));
    } catch (const InputError& e) {
      throw ConfigError(e.what(), v.line, "numerics.small_jump_mode");
    }
  }
  const bool grid_given = config.has("numerics", "grid_lo") || config.has("numerics", "grid_hi") ||
                          config.has("numerics", "grid_points") ||
                          config.has("numerics", "grid_spacing");
  p.auto_grid = config.boolean("numerics", "grid_auto", p.auto_grid && !grid_given);
  if (grid_given) {
    const bool asinh = config.string("numerics", "grid_spacing", "uniform") == "asinh";
    const double lo = config.number("numerics", "grid_lo", asinh ? std::asinh(p.grid.lo(0)) : p.grid.lo(0));
    const double hi = config.number("numerics", "grid_hi", asinh ? std::asinh(p.grid.hi(0)) : p.grid.hi(0));
    const long n = config.integer("numerics", "grid_points", static_cast<long>(p.grid.size()));
    if (n < 2 || !(lo < hi)) throw ConfigError("grid needs grid_lo < grid_hi and grid_points >= 2", 0, "numerics");
    p.grid = asinh ? SpatialGrid::asinh_uniform(lo, hi, static_cast<std::size_t>(n))
                   : SpatialGrid::uniform(lo, hi, static_cast<std::size_t>(n));
  }
  if (config.has("numerics", "times")) {
    p.times = config.list("numerics", "times", {});
  } else if (config.has("numerics", "t_step")) {
    p.times = time_list(0.0, d.horizon, config.number("numerics", "t_step", 1.0));
  } else if (config.has("driver", "horizon")) {
    // Keep the preset's relative output layout on the new horizon.
    const double old_end = p.times.back();
    if (old_end > 0.0)
      for (auto& t : p.times) t *= d.horizon / old_end;
  }
  if (p.times.empty()) throw ConfigError("no output times", 0, "numerics.times");
  d.extra_times = p.times;
  p.solver.table_grid = config.list("numerics", "table_grid", p.solver.table_grid);
  p.solver.table_points =
      static_cast<std::size_t>(config.integer("numerics", "table_points", static_cast<long>(p.solver.table_points)));
  p.solver.table_margin = config.number("numerics", "table_margin", p.solver.table_margin);
  if (config.has("numerics", "inversion")) {
    const auto& v = config.get("numerics", "inversion");
    const std::string mode = config.string("numerics", "inversion", "");
    if (mode == "shooting") p.solver.inversion.mode = InversionMode::shooting;
    else if (mode == "table") p.solver.inversion.mode = InversionMode::table;
    else throw ConfigError("expected shooting or table", v.line, "numerics.inversion");
  }
  p.solver.inversion.tolerance =
      config.number("numerics", "inversion_tolerance", p.solver.inversion.tolerance);
  p.solver.inversion.max_iter =
      static_cast<int>(config.integer("numerics", "max_iter", p.solver.inversion.max_iter));
  p.solver.threads = static_cast<int>(config.integer("numerics", "threads", p.solver.threads));

  // Output and checks.
  auto& o = rc.output;
  o.dir = config.string("output", "dir", o.dir);
  o.field = config.boolean("output", "field", o.field);
  o.driver = config.boolean("output", "driver", o.driver);
  o.trajectories = config.boolean("output", "trajectories", o.trajectories);
  o.report = config.boolean("output", "report", o.report);

  auto& c = rc.checks;
  c.rmse_max = config.number("checks", "rmse_max", c.rmse_max);
  c.max_abs_max = config.number("checks", "max_abs_max", c.max_abs_max);
  c.residual_max = config.number("checks", "residual_max", c.residual_max);
  c.exp_map_residual_max = config.number("checks", "exp_map_residual_max", c.exp_map_residual_max);
  c.slope_min = config.number("checks", "slope_min", c.slope_min);
  c.slope_max = config.number("checks", "slope_max", c.slope_max);
  c.r2_min = config.number("checks", "r2_min", c.r2_min);
  c.dt_ladder = config.list("checks", "dt_ladder", c.dt_ladder);
  c.reference_dt = config.number("checks", "reference_dt", c.reference_dt);
  c.realizations = static_cast<int>(config.integer("checks", "realizations", c.realizations));
  c.probe_points = config.list("checks", "probe_points", c.probe_points);
  c.samples = static_cast<int>(config.integer("checks", "samples", c.samples));
  c.exp_map_cases = static_cast<int>(config.integer("checks", "exp_map_cases", c.exp_map_cases));

  try {
    if (d.has_levy) d.levy.validate(d.m);
  } catch (const InputError& e) {
    throw ConfigError(e.what(), 0, "driver");
  }
  return rc;
}

OracleSpec make_oracle(const Problem& problem, std::shared_ptr<const DriverRealization> driver,
                       const std::vector<double>& stable_path) {
  OracleSpec o;
  o.driver = std::move(driver);
  o.u0 = problem.u0;
  switch (problem.oracle) {
    case Problem::OracleKind::none: throw InputError("problem '" + problem.name + "' has no oracle");
    case Problem::OracleKind::deterministic:
      o.kind = OracleSpec::Kind::deterministic;
      o.coeffs = problem.coeffs;
      break;
    case Problem::OracleKind::h_transform:
      o.kind = OracleSpec::Kind::h_transform;
      o.alpha = problem.oracle_alpha;
      break;
    case Problem::OracleKind::sinh_example: o.kind = OracleSpec::Kind::sinh_example; break;
  }
  o.domain_lo = problem.oracle_domain_lo;
  o.domain_hi = problem.oracle_domain_hi;
  o.anchor = problem.oracle_anchor;
  o.drift_weight = problem.oracle_drift_weight;
  o.brownian_weight = problem.oracle_brownian_weight;
  if (!stable_path.empty()) {
    if (stable_path.size() != problem.times.size())
      throw InputError("make_oracle: stable path must have one value per output time");
    const auto times = problem.times;
    o.path = [times, stable_path](double t) {
      const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-9);
      if (it == times.end() || std::abs(*it - t) > 1e-9)
        throw InputError("stable path sampled only at the output times");
      return stable_path[static_cast<std::size_t>(it - times.begin())];
    };
  }
  return o;
}

}  // namespace marcus
