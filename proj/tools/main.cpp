// marcus: command-line front end for the stochastic-characteristics solver.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "marcus/config.hpp"
#include "marcus/csv_io.hpp"
#include "marcus/errors.hpp"
#include "marcus/presets.hpp"
#include "marcus/studies.hpp"
#include "report.hpp"

namespace {

using namespace marcus;
using cli::ReportBundle;

struct CommonFlags {
  std::string config_path;
  std::string seed;
  std::string out;
  int threads = 0;
  std::string preset;
};

struct ExpMapFlags {
  double x0 = 0.0;
  double z = 1.0;
  int substeps = kDefaultSubsteps;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "TOML-style configuration file");
  app->add_option("--seed", f.seed, "master seed, decimal or 0x-hex (default 0)");
  app->add_option("--out", f.out, "output directory (default ./out)");
  app->add_option("--threads", f.threads, "worker threads (default 1)");
  app->add_option("--preset", f.preset, "named preset; overrides problem.preset (default zero)");
}

RunConfig load(const CommonFlags& f) {
  Config cfg = f.config_path.empty() ? Config() : Config::load(f.config_path);
  if (!f.seed.empty()) {
    ConfigValue v;
    v.kind = ConfigValue::Kind::string;
    v.text = f.seed;
    parse_seed(f.seed);  // reject malformed seeds before any work
    cfg.set("driver", "seed", v);
  }
  RunConfig rc = build_run_config(cfg, f.preset);
  if (!f.out.empty()) rc.output.dir = f.out;
  if (f.threads > 0) rc.problem.solver.threads = f.threads;
  return rc;
}

ReportBundle start_report(const std::string& command, const RunConfig& rc) {
  ReportBundle report(command, rc.output.dir);
  report.set_config(rc.raw, rc.problem.name);
  report.summary()["seed"] = rc.problem.driver.seed;
  report.summary()["realization_index"] = rc.problem.driver.realization_index;
  report.summary()["preset"] = rc.problem.name;
  nlohmann::json coeffs = nlohmann::json::object();
  for (const auto& [k, v] : rc.problem.sources)
    if (!v.empty()) coeffs[k] = v;
  report.summary()["coefficients"] = coeffs;
  return report;
}

int finish(ReportBundle& report, const RunConfig& rc) {
  if (rc.output.report) report.write();
  report.print_checks();
  std::printf("status: %s\n", report.passed() ? "pass" : "fail");
  return report.passed() ? 0 : 1;
}

std::string le(double bound) { return "<= " + format_number(bound); }
std::string ge(double bound) { return ">= " + format_number(bound); }

void write_driver_files(ReportBundle& report, const DriverRealization& driver) {
  write_increments_csv(report.path("increments.csv"), driver);
  report.add_file("increments.csv");
  write_events_csv(report.path("events.csv"), driver);
  report.add_file("events.csv");
}

void write_path_file(ReportBundle& report, const std::vector<double>& times,
                     const std::vector<double>& z) {
  FILE* f = std::fopen(report.path("path.csv").c_str(), "wb");
  if (!f) throw InputError("cannot write " + report.path("path.csv"));
  std::fprintf(f, "t,Z_1\n");
  for (std::size_t k = 0; k < times.size(); ++k)
    std::fprintf(f, "%s,%s\n", format_number(times[k]).c_str(), format_number(z[k]).c_str());
  std::fclose(f);
  report.add_file("path.csv");
}

// ---------------------------------------------------------------------------

int cmd_sample_levy(const CommonFlags& flags) {
  const RunConfig rc = load(flags);
  const Problem& p = rc.problem;
  ReportBundle report = start_report("sample-levy", rc);
  const auto driver = realize_driver(p);
  write_driver_files(report, *driver);
  double max_mark = 0.0;
  for (const auto& e : driver->jump_events) max_mark = std::max(max_mark, e.mark.norm());
  std::vector<double> z;
  if (p.direct_stable_path) {
    z = sample_direct_stable_path(p);
    report.summary()["path_source"] = "direct stable increments";
  } else {
    for (double t : p.times) z.push_back(driver->levy_value(t)(0));
    report.summary()["path_source"] = "driver realization";
  }
  write_path_file(report, p.times, z);
  report.summary()["event_count"] = driver->jump_events.size();
  report.summary()["max_abs_mark"] = max_mark;
  report.summary()["grid_points"] = driver->grid.size();
  std::printf("events: %zu  max |z|: %s  grid points: %zu\n", driver->jump_events.size(),
              format_number(max_mark).c_str(), driver->grid.size());
  return finish(report, rc);
}

void write_field_outputs(ReportBundle& report, const RunConfig& rc, const SolveRun& run) {
  if (rc.output.field) {
    write_field_csv(report.path("field.csv"), run.field);
    report.add_file("field.csv");
    write_flags_csv(report.path("field_flags.csv"), run.field);
    report.add_file("field_flags.csv");
  }
  if (rc.output.driver) {
    if (run.driver) write_driver_files(report, *run.driver);
    if (!run.stable_path.empty()) write_path_file(report, run.field.times, run.stable_path);
  }
  if (rc.output.trajectories && run.driver) {
    const Problem& p = rc.problem;
    const auto flow = integrate_path(p.coeffs, run.driver, p.grid.points, p.times,
                                     p.solver.integration, p.solver.threads);
    write_trajectories_csv(report.path("trajectories.csv"), flow);
    report.add_file("trajectories.csv");
  }
  auto& s = report.summary();
  s["flagged_fraction"] = run.field.flagged_fraction();
  s["grid_points"] = run.field.grid.size();
  s["times"] = run.field.times;
  const auto& pv = run.field.provenance;
  s["provenance"] = {{"seed", pv.seed},        {"realization_index", pv.realization_index},
                     {"dt", pv.dt},            {"substeps", pv.substeps},
                     {"scheme", pv.scheme},    {"inversion", pv.inversion},
                     {"small_jump_mode", to_string(pv.small_jump_mode)},
                     {"table_lo", pv.table_lo}, {"table_hi", pv.table_hi},
                     {"table_points", pv.table_points}};
  if (!run.field.messages.empty()) s["messages"] = run.field.messages;
}

void add_oracle_checks(ReportBundle& report, const RunConfig& rc, const SolveRun& run) {
  const Problem& p = rc.problem;
  if (p.direct_stable_path) {
    const auto rows = fig1_rows(run.field, run.stable_path);
    nlohmann::json table = nlohmann::json::array();
    bool all = true;
    double worst = 0.0;
    for (const auto& r : rows) {
      table.push_back({{"t", r.t}, {"Z", r.z}, {"argmax_x", r.argmax_x}, {"target_x", r.target_x},
                       {"cell", r.cell}, {"u_min", r.u_min}, {"u_max", r.u_max}, {"ok", r.ok}});
      all = all && r.ok;
      worst = std::max(worst, std::abs(r.argmax_x - r.target_x) / std::max(r.cell, 1e-300));
    }
    report.summary()["fig1"] = table;
    report.check("argmax_within_one_cell", worst, "<= 1 cell, 0 < u <= 1", all);
    return;
  }
  if (!run.oracle) return;
  const auto& o = *run.oracle;
  auto& s = report.summary();
  s["oracle"] = {{"rmse", o.rmse}, {"max_abs", o.max_abs}, {"valid", o.valid},
                 {"flagged", o.flagged}, {"flagged_fraction", o.flagged_fraction}};
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : o.per_time)
    rows.push_back({{"t", r.t}, {"rmse", r.rmse}, {"max_abs", r.max_abs}, {"valid", r.valid},
                    {"flagged", r.flagged}});
  s["oracle_per_time"] = rows;
  if (p.oracle == Problem::OracleKind::deterministic) {
    const double bound = rc.checks.max_abs_max;
    report.check("oracle_max_abs", o.max_abs, le(bound), o.valid > 0 && o.max_abs <= bound);
  } else {
    const double bound = rc.checks.rmse_max;
    report.check("oracle_rmse", o.rmse, le(bound), o.valid > 0 && o.rmse <= bound);
  }
}

int cmd_solve(const CommonFlags& flags) {
  const RunConfig rc = load(flags);
  ReportBundle report = start_report("solve", rc);
  const SolveRun run = run_problem(rc.problem);
  write_field_outputs(report, rc, run);
  add_oracle_checks(report, rc, run);
  std::printf("solved %zu times x %zu points, flagged fraction %s\n", run.field.times.size(),
              run.field.grid.size(), format_number(run.field.flagged_fraction()).c_str());
  return finish(report, rc);
}

int cmd_oracle_compare(const CommonFlags& flags) {
  const RunConfig rc = load(flags);
  if (rc.problem.oracle == Problem::OracleKind::none)
    throw InputError("preset '" + rc.problem.name + "' has no closed-form oracle; set problem.oracle");
  ReportBundle report = start_report("oracle-compare", rc);
  const SolveRun run = run_problem(rc.problem);
  write_field_outputs(report, rc, run);
  SolutionField ref = run.field;
  ref.values = run.reference;
  for (auto& row : ref.flags) std::fill(row.begin(), row.end(), PointFlag::ok);
  write_field_csv(report.path("oracle.csv"), ref);
  report.add_file("oracle.csv");
  add_oracle_checks(report, rc, run);
  if (run.oracle) {
    std::printf("%12s %14s %14s %8s %8s\n", "t", "rmse", "max_abs", "valid", "flagged");
    for (const auto& r : run.oracle->per_time)
      std::printf("%12.6g %14.6e %14.6e %8zu %8zu\n", r.t, r.rmse, r.max_abs, r.valid, r.flagged);
  }
  return finish(report, rc);
}

int cmd_convergence(const CommonFlags& flags) {
  const RunConfig rc = load(flags);
  ReportBundle report = start_report("convergence", rc);
  const auto& c = rc.checks;
  const auto conv = convergence_study(rc.problem, c.dt_ladder, c.reference_dt, c.realizations,
                                      c.probe_points, rc.problem.solver.threads);
  FILE* f = std::fopen(report.path("convergence.csv").c_str(), "wb");
  if (!f) throw InputError("cannot write convergence.csv");
  std::fprintf(f, "dt,error\n");
  for (std::size_t i = 0; i < conv.dts.size(); ++i)
    std::fprintf(f, "%s,%s\n", format_number(conv.dts[i]).c_str(), format_number(conv.errors[i]).c_str());
  std::fclose(f);
  report.add_file("convergence.csv");
  auto& s = report.summary();
  s["dts"] = conv.dts;
  s["errors"] = conv.errors;
  s["reference_dt"] = conv.reference_dt;
  s["realizations"] = conv.realizations;
  if (!conv.sufficient) {
    s["status"] = "insufficient-data";
    report.check("resolvable_points", 0.0, ">= 4", false);
    return finish(report, rc);
  }
  s["slope"] = conv.fit.slope;
  s["r2"] = conv.fit.r2;
  std::printf("slope %.4f  R^2 %.4f\n", conv.fit.slope, conv.fit.r2);
  const bool slope_ok = conv.fit.slope >= c.slope_min && conv.fit.slope <= c.slope_max;
  std::string band = ge(c.slope_min);
  if (c.slope_max < 1e300) band = "in [" + format_number(c.slope_min) + ", " + format_number(c.slope_max) + "]";
  report.check("slope", conv.fit.slope, band, slope_ok);
  report.check("r2", conv.fit.r2, ge(c.r2_min), conv.fit.r2 >= c.r2_min);
  return finish(report, rc);
}

int cmd_flow_identity(const CommonFlags& flags) {
  const RunConfig rc = load(flags);
  const Problem& p = rc.problem;
  ReportBundle report = start_report("flow-identity", rc);

  // Jump inverse identity along the problem's jump field.
  const auto field = characteristics_jump_field(*p.coeffs);
  Engine rng = make_stream(p.driver.seed, p.driver.realization_index, SubStream::jumps);
  std::uniform_real_distribution<double> ux(p.grid.lo(0), p.grid.hi(0));
  std::uniform_real_distribution<double> uz(-1.0, 1.0);
  double exp_worst = 0.0;
  for (int k = 0; k < rc.checks.exp_map_cases; ++k) {
    Vec X = Vec::Zero(p.coeffs->d + 2);
    X(0) = ux(rng);
    X(p.coeffs->d) = 1.0;
    exp_worst = std::max(exp_worst, exp_map_inverse_check(field, X, Vec::Constant(p.coeffs->m, uz(rng)),
                                                          p.solver.integration.substeps));
  }
  report.summary()["exp_map_inverse_residual"] = exp_worst;
  report.check("exp_map_inverse", exp_worst, le(rc.checks.exp_map_residual_max),
               exp_worst <= rc.checks.exp_map_residual_max);

  InversionOptions inv = p.solver.inversion;
  if (!rc.raw.has("numerics", "inversion")) inv.mode = InversionMode::table;
  try {
    const auto rt = round_trip_study(p, rc.checks.samples, inv);
    report.summary()["round_trip_residual"] = rt.residual;
    report.summary()["round_trip_time"] = rt.t;
    report.summary()["round_trip_samples"] = rt.samples;
    report.summary()["inversion"] = inv.mode == InversionMode::table ? "table" : "shooting";
    std::printf("round-trip residual %s at t=%s over %zu samples\n", format_number(rt.residual).c_str(),
                format_number(rt.t).c_str(), rt.samples);
    report.check("round_trip", rt.residual, le(rc.checks.residual_max),
                 rt.residual <= rc.checks.residual_max);
  } catch (const DiffeomorphismError& e) {
    std::printf("diffeomorphism violation: %s\n", e.what());
    report.summary()["diffeomorphism_violation"] = e.what();
    report.check("diffeomorphism", NAN, "forward table strictly monotone", false);
  }
  return finish(report, rc);
}

int cmd_exp_map(const CommonFlags& flags, const ExpMapFlags& em) {
  const RunConfig rc = load(flags);
  const Problem& p = rc.problem;
  ReportBundle report = start_report("exp-map", rc);
  const Vec x0 = Vec::Constant(p.coeffs->d, em.x0);
  const Vec z = Vec::Constant(p.coeffs->m, em.z);
  const auto j = exp_map_structured(*p.coeffs, x0, 1.0, 0.0, z, em.substeps);
  const auto field = characteristics_jump_field(*p.coeffs);
  Vec X0 = Vec::Zero(p.coeffs->d + 2);
  X0.head(p.coeffs->d) = x0;
  X0(p.coeffs->d) = 1.0;
  const auto full = exp_map(field, X0, z, em.substeps);
  Vec Xs(p.coeffs->d + 2);
  Xs.head(p.coeffs->d) = j.x;
  Xs(p.coeffs->d) = j.xi;
  Xs(p.coeffs->d + 1) = j.zeta;
  const double agreement = (Xs - full.endpoint).norm();
  std::printf("x=%s xi=%s zeta=%s estimated_error=%s structured_vs_full=%s\n",
              format_number(j.x(0)).c_str(), format_number(j.xi).c_str(),
              format_number(j.zeta).c_str(), format_number(full.estimated_error).c_str(),
              format_number(agreement).c_str());
  auto& s = report.summary();
  s["x"] = j.x(0);
  s["xi"] = j.xi;
  s["zeta"] = j.zeta;
  s["estimated_error"] = full.estimated_error;
  s["substeps"] = em.substeps;
  report.check("structured_vs_full", agreement, le(1e-8), agreement <= 1e-8);
  const auto order = exp_map_order(field, X0, z, {4, 8, 16, 32});
  const bool resolved = order.errors.back() > 1e-14;
  s["order_errors"] = order.errors;
  if (resolved) {
    s["order_exponent"] = order.exponent;
    report.check("rk4_exponent", order.exponent, "in [3.5, 4.5]",
                 order.exponent >= 3.5 && order.exponent <= 4.5);
  } else {
    s["order_exponent"] = "unresolved (errors at rounding level)";
  }
  return finish(report, rc);
}

void print_reference() {
  std::printf("# marcus configuration reference\n\n");
  std::printf("Presets:\n\n");
  for (const auto& [name, text] : preset_catalog()) std::printf("- `%s`: %s\n", name.c_str(), text.c_str());
  const CheckOptions c;
  const SolverParams sp;
  std::printf("\nKeys (section.key = default):\n\n");
  std::printf("- problem.preset = \"zero\"; problem.a, b, c, A, B, C, alpha, beta, sigma, u0: expressions in x\n");
  std::printf("- problem.oracle = preset default (none | deterministic | sinh | h_transform)\n");
  std::printf("- problem.oracle_anchor = 0, oracle_domain_lo = -1e6, oracle_domain_hi = 1e6\n");
  std::printf("- problem.oracle_drift_weight = 0, oracle_brownian_weight = 0\n");
  std::printf("- driver.kind = preset default (none | compound_poisson | alpha_stable)\n");
  std::printf("- driver.intensity = 1, marks = \"uniform\", mark_lo = -1, mark_hi = 1, mark_mean = 0, mark_sd = 1, mark_value = 1\n");
  std::printf("- driver.alpha = 1.75, scale = 0.1, brownian = preset default, horizon = 1\n");
  std::printf("- driver.seed = 0 (decimal or 0x-hex), realization_index = 0, direct_path = false\n");
  std::printf("- numerics.dt = %g, substeps = %d, domain_bound = %g\n", sp.integration.dt,
              sp.integration.substeps, sp.integration.domain_bound);
  std::printf("- numerics.grid_lo = -3, grid_hi = 3, grid_points = 201, grid_spacing = \"uniform\" (or \"asinh\": bounds in arcsinh units), grid_auto = false\n");
  std::printf("- numerics.times = [0, 0.5, 1] or t_step; truncation_epsilon = preset default; small_jump_mode = \"drop\" | \"gaussian_substitute\"\n");
  std::printf("- numerics.table_grid = [] (explicit forward-table initial points), table_points = 2 x grid points, table_margin = %g\n",
              sp.table_margin);
  std::printf("- numerics.inversion = \"shooting\" | \"table\", inversion_tolerance = %g, max_iter = %d, threads = 1\n",
              sp.inversion.tolerance, sp.inversion.max_iter);
  std::printf("- output.dir = \"out\", field = true, driver = true, trajectories = false, report = true\n");
  std::printf("- checks.rmse_max = %g, max_abs_max = %g, residual_max = %g, exp_map_residual_max = %g\n",
              c.rmse_max, c.max_abs_max, c.residual_max, c.exp_map_residual_max);
  std::printf("- checks.slope_min = %g, slope_max = unbounded, r2_min = %g\n", c.slope_min, c.r2_min);
  std::printf("- checks.dt_ladder = [2^-6 ... 2^-12], reference_dt = 2^-16, realizations = %d, probe_points = [-1, 0.5, 1]\n",
              c.realizations);
  std::printf("- checks.samples = %d, exp_map_cases = %d\n", c.samples, c.exp_map_cases);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Levy-driven linear transport SPDEs by stochastic characteristics"};
  app.require_subcommand(1);
  CommonFlags flags;
  ExpMapFlags em;

  auto* sample = app.add_subcommand("sample-levy", "sample a driver; write increments.csv, events.csv, path.csv");
  auto* solve_cmd = app.add_subcommand("solve", "solve the SPDE on the configured grid and times");
  auto* oracle = app.add_subcommand("oracle-compare", "solve and compare with the closed-form oracle");
  auto* conv = app.add_subcommand("convergence", "strong-error regression over a dt ladder");
  auto* ident = app.add_subcommand("flow-identity", "round-trip and jump-inverse identities");
  auto* expm = app.add_subcommand("exp-map", "evaluate one Marcus jump exponential map");
  auto* ref = app.add_subcommand("reference", "print the configuration reference");
  for (auto* sc : {sample, solve_cmd, oracle, conv, ident, expm}) add_common(sc, flags);
  expm->add_option("--x0", em.x0, "initial point (default 0)");
  expm->add_option("--z", em.z, "jump size (default 1)");
  expm->add_option("--substeps", em.substeps, "RK4 substeps (default 32)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sample) return cmd_sample_levy(flags);
    if (*solve_cmd) return cmd_solve(flags);
    if (*oracle) return cmd_oracle_compare(flags);
    if (*conv) return cmd_convergence(flags);
    if (*ident) return cmd_flow_identity(flags);
    if (*expm) return cmd_exp_map(flags, em);
    if (*ref) {
      print_reference();
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
