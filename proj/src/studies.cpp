#include "marcus/studies.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "marcus/errors.hpp"
#include "marcus/parallel.hpp"

namespace marcus {

std::shared_ptr<const DriverRealization> realize_driver(const Problem& problem) {
  DriverOptions opt = problem.driver;
  opt.extra_times = problem.times;
  return std::make_shared<const DriverRealization>(generate_driver(opt));
}

std::vector<double> sample_direct_stable_path(const Problem& problem) {
  const auto* s = std::get_if<AlphaStable>(&problem.driver.levy.kind);
  if (!s) throw InputError("direct stable path needs an alpha-stable driver");
  std::vector<double> grid = problem.times;
  const bool prepend = grid.empty() || grid.front() != 0.0;
  if (prepend) grid.insert(grid.begin(), 0.0);
  Engine rng = make_stream(problem.driver.seed, problem.driver.realization_index, SubStream::stable_path);
  const auto inc = sample_stable_path(s->alpha, s->scale, grid, rng);
  std::vector<double> path(grid.size(), 0.0);
  for (std::size_t i = 0; i < inc.size(); ++i) path[i + 1] = path[i] + inc[i];
  if (prepend) path.erase(path.begin());
  return path;
}

SpatialGrid fig1_grid(const std::vector<double>& path, std::size_t points) {
  double half = 6.0;
  for (double z : path) half = std::max(half, std::abs(z) + 2.0);
  return SpatialGrid::asinh_uniform(-half, half, points);
}

SolveRun run_problem(const Problem& problem) {
  SolveRun run;
  if (problem.direct_stable_path) {
    if (problem.oracle != Problem::OracleKind::sinh_example &&
        problem.oracle != Problem::OracleKind::h_transform)
      throw InputError("direct stable paths need a closed-form oracle");
    run.stable_path = sample_direct_stable_path(problem);
    const SpatialGrid grid = problem.auto_grid ? fig1_grid(run.stable_path, problem.grid.size())
                                               : problem.grid;
    const OracleSpec oracle = make_oracle(problem, nullptr, run.stable_path);
    run.reference = evaluate_oracle(oracle, problem.times, grid);
    SolutionField& f = run.field;
    f.times = problem.times;
    f.grid = grid;
    f.values = run.reference;
    f.flags.assign(f.times.size(), std::vector<PointFlag>(grid.size(), PointFlag::ok));
    for (std::size_t k = 0; k < f.times.size(); ++k)
      for (std::size_t p = 0; p < grid.size(); ++p)
        if (!std::isfinite(f.values[k][p])) f.flags[k][p] = PointFlag::out_of_range;
    f.provenance.seed = problem.driver.seed;
    f.provenance.realization_index = problem.driver.realization_index;
    f.provenance.scheme = "closed-form (direct stable path)";
    f.provenance.inversion = "closed-form";
    return run;
  }
  run.driver = realize_driver(problem);
  run.field = solve(problem.coeffs, run.driver, problem.u0, problem.times, problem.grid, problem.solver);
  if (problem.oracle != Problem::OracleKind::none) {
    const OracleSpec oracle = make_oracle(problem, run.driver);
    run.reference = evaluate_oracle(oracle, problem.times, problem.grid);
    run.oracle = compare_values(run.field, run.reference);
  }
  return run;
}

std::vector<Fig1Row> fig1_rows(const SolutionField& field, const std::vector<double>& path) {
  if (path.size() != field.times.size()) throw InputError("fig1_rows: one path value per time");
  if (field.grid.dimension() != 1) throw InputError("fig1_rows: d = 1 only");
  std::vector<Fig1Row> rows;
  const auto& pts = field.grid.points;
  const std::size_t n = pts.size();
  for (std::size_t k = 0; k < field.times.size(); ++k) {
    Fig1Row r;
    r.t = field.times[k];
    r.z = path[k];
    r.target_x = std::sinh(-path[k]);
    r.u_min = std::numeric_limits<double>::infinity();
    r.u_max = -r.u_min;
    std::size_t arg = 0;
    bool finite = true;
    for (std::size_t p = 0; p < n; ++p) {
      const double u = field.values[k][p];
      if (field.flags[k][p] != PointFlag::ok || !std::isfinite(u)) {
        finite = false;
        continue;
      }
      r.u_min = std::min(r.u_min, u);
      if (u > r.u_max) {
        r.u_max = u;
        arg = p;
      }
    }
    r.argmax_x = pts[arg](0);
    const double left = arg > 0 ? pts[arg](0) - pts[arg - 1](0) : 0.0;
    const double right = arg + 1 < n ? pts[arg + 1](0) - pts[arg](0) : 0.0;
    r.cell = std::max(left, right);
    r.ok = finite && r.u_min > 0.0 && r.u_max <= 1.0 + 1e-9 &&
           std::abs(r.argmax_x - r.target_x) <= r.cell;
    rows.push_back(r);
  }
  return rows;
}

ExpMapOrder exp_map_order(const JumpVectorField& field, const Vec& x0, const Vec& z,
                          const std::vector<int>& substeps, std::optional<Vec> exact) {
  if (substeps.size() < 2) throw InputError("exp_map_order: need at least two substep counts");
  const Vec ref = exact ? *exact : exp_map(field, x0, z, 4096).endpoint;
  ExpMapOrder out;
  std::vector<double> n;
  for (int s : substeps) {
    out.substeps.push_back(s);
    out.errors.push_back((exp_map(field, x0, z, s).endpoint - ref).norm());
    n.push_back(static_cast<double>(s));
  }
  out.exponent = -loglog_fit(n, out.errors).slope;
  return out;
}

double sinh_inverse_sweep(int cases, int substeps, std::uint64_t seed) {
  const auto field = JumpVectorField::linear_in_z(
      1, [](const Vec& x) { return Mat::Constant(1, 1, -std::sqrt(x(0) * x(0) + 1.0)); });
  Engine rng = make_stream(seed, 0, SubStream::jumps);
  std::uniform_real_distribution<double> ux(-3.0, 3.0);
  std::uniform_real_distribution<double> uz(-1.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < cases; ++k) {
    const Vec x0 = Vec::Constant(1, ux(rng));
    const Vec z = Vec::Constant(1, uz(rng));
    worst = std::max(worst, exp_map_inverse_check(field, x0, z, substeps));
  }
  return worst;
}

RoundTrip round_trip_study(const Problem& problem, int samples, const InversionOptions& options) {
  if (samples < 1) throw InputError("round_trip_study: samples must be >= 1");
  RoundTrip out;
  const auto driver = realize_driver(problem);
  std::vector<Vec> initial;
  if (!problem.solver.table_grid.empty()) {
    for (double v : problem.solver.table_grid) initial.push_back(Vec::Constant(1, v));
  } else {
    initial = problem.grid.points;
  }
  const FlowSolution flow = integrate_path(problem.coeffs, driver, initial, problem.times,
                                           problem.solver.integration, problem.solver.threads);
  const std::size_t k = flow.times.size() - 1;
  out.t = flow.times[k];
  out.non_monotone = flow.non_monotone;
  if (flow.d != 1) throw InputError("round_trip_study: d = 1 problems only");
  // Query points strictly inside the endpoint range.
  const InverseTable1D table(flow, k);  // throws DiffeomorphismError when non-monotone
  const double lo = table.x_min();
  const double hi = table.x_max();
  std::vector<Vec> xs;
  for (int i = 0; i < samples; ++i) {
    const double w = (i + 0.5) / samples;
    xs.push_back(Vec::Constant(1, lo + w * (hi - lo)));
  }
  out.samples = xs.size();
  out.residual = round_trip_residual(flow, k, xs, options);
  return out;
}

Convergence convergence_study(const Problem& problem, std::vector<double> ladder,
                              double reference_dt, int realizations, std::vector<double> probes,
                              int threads) {
  if (ladder.empty())
    for (int k = 6; k <= 12; ++k) ladder.push_back(std::ldexp(1.0, -k));
  if (reference_dt <= 0.0) reference_dt = std::ldexp(1.0, -16);
  if (probes.empty()) probes = {-1.0, 0.5, 1.0};
  if (realizations < 1) throw InputError("convergence_study: realizations must be >= 1");
  for (double dt : ladder)
    if (!(dt > reference_dt)) throw InputError("convergence_study: ladder steps must exceed the reference step");
  const double horizon = problem.times.back();
  if (!(horizon > 0.0)) throw InputError("convergence_study: final time must be > 0");

  Convergence out;
  out.dts = ladder;
  out.reference_dt = reference_dt;
  out.realizations = realizations;
  // err[r][level]
  std::vector<std::vector<double>> err(static_cast<std::size_t>(realizations),
                                       std::vector<double>(ladder.size(), 0.0));
  parallel_for(static_cast<std::size_t>(realizations), threads, [&](std::size_t r) {
    DriverOptions opt = problem.driver;
    opt.dt = reference_dt;
    opt.horizon = std::max(opt.horizon, horizon);
    opt.realization_index = problem.driver.realization_index + r;
    opt.extra_times = {horizon};
    auto driver = std::make_shared<const DriverRealization>(generate_driver(opt));
    auto endpoint = [&](double dt, const Vec& x0) {
      IntegrationParams ip = problem.solver.integration;
      ip.dt = dt;
      ip.record_path = false;
      const ForwardFlow flow(problem.coeffs, driver, {horizon}, ip);
      return flow.evaluate(x0, 0).packed();
    };
    for (double y : probes) {
      const Vec x0 = Vec::Constant(problem.coeffs->d, y);
      const Vec ref = endpoint(reference_dt, x0);
      for (std::size_t l = 0; l < ladder.size(); ++l)
        err[r][l] += (endpoint(ladder[l], x0) - ref).norm() / static_cast<double>(probes.size());
    }
  });
  out.errors.assign(ladder.size(), 0.0);
  for (const auto& row : err)
    for (std::size_t l = 0; l < ladder.size(); ++l) out.errors[l] += row[l] / realizations;

  std::size_t usable = 0;
  for (double e : out.errors) usable += (e > 0.0 && std::isfinite(e));
  out.sufficient = usable >= 4;
  if (usable >= 2) out.fit = loglog_fit(out.dts, out.errors);
  return out;
}

SamplerStats sampler_study(std::size_t n, std::uint64_t seed) {
  SamplerStats s;
  s.n = n;
  const std::vector<double> unit = {0.0, 1.0};

  // alpha = 2: e^{-c lambda^2} is the N(0, 2c) characteristic function.
  const double c = 0.1;
  Engine stable_rng = make_stream(seed, 0, SubStream::stable_path);
  Engine normal_rng = make_stream(seed, 1, SubStream::brownian);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 * c));
  std::vector<double> a(n);
  std::vector<double> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = sample_stable_path(2.0, c, unit, stable_rng)[0];
    b[i] = normal(normal_rng);
  }
  s.gaussian_ks_p = ks_two_sample(a, b).p_value;

  // alpha = 1.75, scale 0.1: E cos(Z_1) = e^{-0.1}.
  Engine cf_rng = make_stream(seed, 2, SubStream::stable_path);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::cos(sample_stable_path(1.75, 0.1, unit, cf_rng)[0]);
  s.cos_mean = acc / static_cast<double>(n);
  s.cos_target = std::exp(-0.1);
  s.cos_tolerance = 3.0 / std::sqrt(static_cast<double>(n));

  // Self-similarity: Z_{2 dt} / 2^{1/alpha} against Z_{dt}.
  const double alpha = 1.75;
  const double dt = 0.5;
  Engine ss_rng = make_stream(seed, 3, SubStream::stable_path);
  std::vector<double> one(n);
  std::vector<double> two(n);
  const std::vector<double> g1 = {0.0, dt};
  const std::vector<double> g2 = {0.0, 2.0 * dt};
  for (std::size_t i = 0; i < n; ++i) {
    one[i] = sample_stable_path(alpha, 0.1, g1, ss_rng)[0];
    two[i] = sample_stable_path(alpha, 0.1, g2, ss_rng)[0] / std::pow(2.0, 1.0 / alpha);
  }
  s.self_similarity_ks_p = ks_two_sample(one, two).p_value;
  return s;
}

Linearity linearity_study(const Problem& problem, double lambda) {
  const auto& c = *problem.coeffs;
  if (c.c || c.C || c.sigma) throw InputError("linearity_study needs c = C = sigma = 0");
  const auto driver = realize_driver(problem);
  const InitialCondition u{[](const Vec& x) { return 1.0 / (1.0 + x.squaredNorm()); }, true};
  const InitialCondition v{[](const Vec& x) { return std::sin(x(0)) * std::exp(-0.1 * x.squaredNorm()); }, true};
  const InitialCondition w{[&](const Vec& x) { return lambda * u(x) + v(x); }, true};
  const auto fu = solve(problem.coeffs, driver, u, problem.times, problem.grid, problem.solver);
  const auto fv = solve(problem.coeffs, driver, v, problem.times, problem.grid, problem.solver);
  const auto fw = solve(problem.coeffs, driver, w, problem.times, problem.grid, problem.solver);
  // Deviation relative to the largest |u| of the combined field.
  double scale = 0.0;
  for (const auto& row : fw.values)
    for (double x : row)
      if (std::isfinite(x)) scale = std::max(scale, std::abs(x));
  if (!(scale > 0.0)) scale = 1.0;
  Linearity out;
  for (std::size_t k = 0; k < fw.times.size(); ++k) {
    for (std::size_t p = 0; p < fw.grid.size(); ++p) {
      if (fu.flags[k][p] != PointFlag::ok || fv.flags[k][p] != PointFlag::ok ||
          fw.flags[k][p] != PointFlag::ok)
        continue;
      const double sum = lambda * fu.values[k][p] + fv.values[k][p];
      out.max_relative = std::max(out.max_relative, std::abs(fw.values[k][p] - sum) / scale);
      ++out.compared;
    }
  }
  return out;
}

}  // namespace marcus
