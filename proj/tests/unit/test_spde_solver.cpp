#include <algorithm>
#include <cmath>
#include <memory>

#include <doctest.h>

#include "marcus/errors.hpp"
#include "marcus/presets.hpp"
#include "marcus/spde_solver.hpp"
#include "marcus/studies.hpp"
#include "property.hpp"

using namespace marcus;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

double bump(double x) { return 1.0 / (1.0 + x * x); }

InitialCondition u0_bump() { return {[](const Vec& x) { return bump(x(0)); }, true}; }

std::shared_ptr<const DriverRealization> poisson_driver(std::uint64_t seed, double rate = 3.0,
                                                        bool brownian = false, double dt = 1e-3) {
  DriverOptions o;
  o.horizon = 1.0;
  o.dt = dt;
  o.brownian = brownian;
  o.has_levy = true;
  o.levy.kind = FiniteActivity{rate, MarkDistribution::uniform(-1.0, 1.0)};
  o.seed = seed;
  o.extra_times = {0.5};
  return std::make_shared<const DriverRealization>(generate_driver(o));
}

std::shared_ptr<CoefficientSet> sinh_transport() {
  auto c = std::make_shared<CoefficientSet>(CoefficientSet::zero(1, 1));
  c->alpha = scalar::mat_field([](double x) { return std::sqrt(x * x + 1.0); });
  return c;
}

std::shared_ptr<CoefficientSet> homogeneous_coeffs() {
  auto c = std::make_shared<CoefficientSet>(CoefficientSet::zero(1, 1));
  c->a = scalar::vec_field([](double x) { return 0.4 * std::sin(x) + 0.1; });
  c->b = scalar::scalar([](double x) { return -0.2 * std::cos(x); });
  c->A = scalar::mat_field([](double) { return 0.3; });
  c->B = scalar::row_field([](double x) { return 0.1 * x / (1.0 + x * x); });
  c->alpha = scalar::mat_field([](double x) { return 0.5 * std::sqrt(x * x + 1.0); });
  c->beta = scalar::row_field([](double) { return 0.15; });
  return c;
}

}  // namespace

TEST_SUITE("spde_solver") {

TEST_CASE("solve: zero coefficients reproduce u0 at every time") {
  const auto c = std::make_shared<const CoefficientSet>(CoefficientSet::zero(1, 1));
  const auto grid = SpatialGrid::uniform(-3, 3, 61);
  const auto field = solve(c, poisson_driver(1), u0_bump(), {0.0, 0.5, 1.0}, grid);
  CHECK(field.flagged_count() == 0);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(field.values[k][i] == doctest::Approx(bump(grid.points[i](0))).epsilon(1e-14));
}

TEST_CASE("solve: unit drift translates the initial condition") {
  auto c = std::make_shared<CoefficientSet>(CoefficientSet::zero(1, 1));
  c->a = scalar::vec_field([](double) { return 1.0; });
  const auto grid = SpatialGrid::uniform(-3, 3, 61);
  SolverParams p;
  p.integration.dt = 0.01;
  const auto field = solve(c, poisson_driver(1), u0_bump(), {0.5, 1.0}, grid, p);
  REQUIRE(field.flagged_count() == 0);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double x = grid.points[i](0);
      CHECK(field.values[k][i] == doctest::Approx(bump(x + field.times[k])).epsilon(1e-9));
    }
}

TEST_CASE("solve: shape, provenance and finite values") {
  const auto drv = poisson_driver(4);
  const auto grid = SpatialGrid::uniform(-2, 2, 21);
  const auto field = solve(homogeneous_coeffs(), poisson_driver(4, 3.0, true), u0_bump(), {0.25, 0.5, 1.0}, grid);
  REQUIRE(field.values.size() == 3);
  for (const auto& row : field.values) {
    REQUIRE(row.size() == grid.size());
    for (double v : row) CHECK(std::isfinite(v));
  }
  CHECK(field.provenance.seed == 4);
  CHECK(field.provenance.dt == 1e-3);
  CHECK(field.provenance.substeps == kDefaultSubsteps);
}

TEST_CASE("solve: pure transport agrees with the sinh closed form on a shared path") {
  for (std::uint64_t seed : {1u, 3u, 5u}) {
    const auto drv = poisson_driver(seed, 2.0);
    const auto grid = SpatialGrid::uniform(-3, 3, 121);
    SolverParams p;
    p.integration.substeps = 64;
    const auto field = solve(sinh_transport(), drv, u0_bump(), {0.5, 1.0}, grid, p);
    OracleSpec oracle;
    oracle.kind = OracleSpec::Kind::sinh_example;
    oracle.driver = drv;
    oracle.u0 = u0_bump();
    const auto report = oracle_compare(field, oracle);
    CAPTURE(seed);
    CHECK(report.rmse <= 5e-3);
    CHECK(report.max_abs <= 1e-6);
    CHECK(report.flagged == 0);
  }
}

TEST_CASE("solve: range preservation for pure transport") {
  prop::for_all(6, 53, [](prop::Gen& g) {
    const auto drv = poisson_driver(static_cast<std::uint64_t>(g.integer(0, 1 << 20)), g.uniform(0.5, 6.0), true, 1.0 / 256);
    auto c = std::make_shared<CoefficientSet>(CoefficientSet::zero(1, 1));
    c->a = scalar::vec_field([](double x) { return 0.3 * std::cos(x); });
    c->A = scalar::mat_field([](double x) { return 0.2 * std::sin(x) + 0.3; });
    c->alpha = scalar::mat_field([](double x) { return std::sqrt(x * x + 1.0); });
    SolverParams p;
    p.integration.dt = 1.0 / 256;
    InitialCondition u0{[](const Vec& x) { return std::tanh(x(0)) + 0.5 * std::exp(-x(0) * x(0)); }, true};
    // sup/inf of u0 over R.
    double lo = 1e9;
    double hi = -1e9;
    for (int i = -20000; i <= 20000; ++i) {
      const double v = u0(v1(i * 1e-3));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    lo = std::min(lo, -1.0);
    hi = std::max(hi, 1.0);
    const auto field = solve(c, drv, u0, {0.5, 1.0}, SpatialGrid::uniform(-3, 3, 41), p);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i = 0; i < 41; ++i) {
        if (field.flags[k][i] != PointFlag::ok) continue;
        CHECK(field.values[k][i] >= lo - 1e-12);
        CHECK(field.values[k][i] <= hi + 1e-12);
      }
  });
}

TEST_CASE("solve: linear in u0 when c = C = sigma = 0") {
  const auto c = homogeneous_coeffs();
  const auto drv = poisson_driver(12, 3.0, true, 1.0 / 512);
  SolverParams p;
  p.integration.dt = 1.0 / 512;
  const auto grid = SpatialGrid::uniform(-2, 2, 41);
  const std::vector<double> times = {0.5, 1.0};
  InitialCondition v0{[](const Vec& x) { return std::sin(2.0 * x(0)); }, true};
  prop::for_all(5, 61, [&](prop::Gen& g) {
    const double lambda = g.uniform(-3.0, 3.0);
    InitialCondition mix{[&, lambda](const Vec& x) { return lambda * bump(x(0)) + std::sin(2.0 * x(0)); }, true};
    const auto fu = solve(c, drv, u0_bump(), times, grid, p);
    const auto fv = solve(c, drv, v0, times, grid, p);
    const auto fm = solve(c, drv, mix, times, grid, p);
    for (std::size_t k = 0; k < times.size(); ++k)
      for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(fm.values[k][i] == doctest::Approx(lambda * fu.values[k][i] + fv.values[k][i]).epsilon(1e-12).scale(1.0));
  });
}

TEST_CASE("solve: constant offset in u0 shifts u by the same constant when b = B = beta = 0") {
  auto c = std::make_shared<CoefficientSet>(CoefficientSet::zero(1, 1));
  c->a = scalar::vec_field([](double x) { return 0.5 * std::sin(x); });
  c->c = scalar::scalar([](double x) { return 0.2 * std::cos(x); });
  c->A = scalar::mat_field([](double) { return 0.4; });
  c->C = scalar::row_field([](double) { return 0.1; });
  c->alpha = scalar::mat_field([](double x) { return 0.3 * std::sqrt(x * x + 1.0); });
  c->sigma = scalar::row_field([](double x) { return 0.2 * x / (1 + x * x); });
  const auto drv = poisson_driver(7, 3.0, true, 1.0 / 256);
  SolverParams p;
  p.integration.dt = 1.0 / 256;
  const auto grid = SpatialGrid::uniform(-2, 2, 21);
  const double kappa = 2.75;
  InitialCondition shifted{[=](const Vec& x) { return bump(x(0)) + kappa; }, true};
  const auto base = solve(c, drv, u0_bump(), {0.5, 1.0}, grid, p);
  const auto moved = solve(c, drv, shifted, {0.5, 1.0}, grid, p);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(moved.values[k][i] - base.values[k][i] == doctest::Approx(kappa).epsilon(1e-12));
}

TEST_CASE("solve: noise-free coefficients reduce to the deterministic formula") {
  auto c = std::make_shared<CoefficientSet>(CoefficientSet::zero(1, 1));
  c->a = scalar::vec_field([](double x) { return 0.5 * std::sin(x) + 0.2; });
  c->b = scalar::scalar([](double x) { return -0.3 * std::cos(x); });
  c->c = scalar::scalar([](double x) { return 0.1 * std::exp(-x * x); });
  const auto drv = std::make_shared<const DriverRealization>(make_driver(1.0, uniform_time_grid(1.0, 1e-3), 1, {}));
  const auto grid = SpatialGrid::uniform(-3, 3, 31);
  const std::vector<double> times = {0.25, 0.5, 1.0};
  const auto field = solve(c, drv, u0_bump(), times, grid);
  OracleSpec oracle;
  oracle.kind = OracleSpec::Kind::deterministic;
  oracle.driver = drv;
  oracle.coeffs = c;
  oracle.u0 = u0_bump();
  const auto report = oracle_compare(field, oracle);
  CHECK(report.max_abs <= 1e-6);
  CHECK(report.flagged == 0);
}

TEST_CASE("solve: grid outside the coverable range is flagged, not zeroed") {
  // Strong drift leaves a gap the table cannot cover with zero widenings.
  auto c = std::make_shared<CoefficientSet>(CoefficientSet::zero(1, 1));
  c->a = scalar::vec_field([](double) { return 5.0; });
  SolverParams p;
  p.integration.dt = 0.01;
  p.table_grid = {-1.0, -0.5, 0.0, 0.5, 1.0};
  const auto field = solve(c, poisson_driver(1), u0_bump(), {1.0}, SpatialGrid::uniform(-1, 1, 11), p);
  CHECK(field.flagged_count() > 0);
  for (std::size_t i = 0; i < 11; ++i) {
    if (field.flags[0][i] == PointFlag::out_of_range) CHECK(std::isnan(field.values[0][i]));
  }
  CHECK_FALSE(field.messages.empty());
  CHECK(field.flagged_fraction() > 0.0);
}

TEST_CASE("solve: two-dimensional constant drift") {
  auto c = std::make_shared<CoefficientSet>(CoefficientSet::zero(2, 2));
  c->a = [](const Vec&) {
    Vec v(2);
    v << 1.0, -0.5;
    return v;
  };
  const auto drv = std::make_shared<const DriverRealization>(make_driver(1.0, uniform_time_grid(1.0, 0.01), 2, {}));
  Vec lo(2), hi(2);
  lo << -1, -1;
  hi << 1, 1;
  const auto grid = SpatialGrid::tensor(lo, hi, {5, 5});
  InitialCondition u0{[](const Vec& x) { return std::exp(-x.squaredNorm()); }, true};
  SolverParams p;
  p.integration.dt = 0.01;
  const auto field = solve(c, drv, u0, {0.5}, grid, p);
  REQUIRE(field.flagged_count() == 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Vec y = grid.points[i];
    y(0) += 0.5;
    y(1) -= 0.25;
    CHECK(field.values[0][i] == doctest::Approx(std::exp(-y.squaredNorm())).epsilon(1e-8));
  }
}

TEST_CASE("deterministic_solution: examples") {
  const auto u0 = u0_bump();
  {
    auto c = CoefficientSet::zero(1, 1);
    c.a = scalar::vec_field([](double) { return 1.0; });
    CHECK(deterministic_solution(c, u0, 0.7, v1(0.2)) == doctest::Approx(bump(0.9)).epsilon(1e-12));
  }
  {
    auto c = CoefficientSet::zero(1, 1);
    c.b = scalar::scalar([](double) { return 0.6; });
    CHECK(deterministic_solution(c, u0, 0.5, v1(1.0)) == doctest::Approx(std::exp(0.3) * 0.5).epsilon(1e-12));
  }
  {
    auto c = CoefficientSet::zero(1, 1);
    c.c = scalar::scalar([](double) { return -0.4; });
    CHECK(deterministic_solution(c, u0, 2.0, v1(0.0)) == doctest::Approx(1.0 - 0.8).epsilon(1e-12));
  }
  {
    auto c = CoefficientSet::zero(1, 1);
    c.A = scalar::mat_field([](double) { return 1.0; });
    CHECK_THROWS_AS(deterministic_solution(c, u0, 1.0, v1(0.0)), InputError);
  }
}

TEST_CASE("deterministic_solution: satisfies the transport PDE by finite differences") {
  // u_t = a u_x + b u + c at interior points.
  auto c = CoefficientSet::zero(1, 1);
  c.a = scalar::vec_field([](double x) { return 0.5 * std::sin(x) + 0.2; });
  c.b = scalar::scalar([](double x) { return -0.3 * std::cos(x); });
  c.c = scalar::scalar([](double x) { return 0.1 * std::exp(-x * x); });
  const auto u0 = u0_bump();
  const double h = 1e-4;
  for (double x : {-1.3, 0.0, 0.8}) {
    for (double t : {0.3, 0.9}) {
      auto u = [&](double tt, double xx) { return deterministic_solution(c, u0, tt, v1(xx)); };
      const double ut = (u(t + h, x) - u(t - h, x)) / (2 * h);
      const double ux = (u(t, x + h) - u(t, x - h)) / (2 * h);
      CHECK(ut == doctest::Approx(c.eval_a(v1(x))(0) * ux + c.eval_b(v1(x)) * u(t, x) + c.eval_c(v1(x))).epsilon(1e-6));
    }
  }
}

TEST_CASE("HTransform: examples") {
  const auto u0 = [](double x) { return bump(x); };
  {
    const HTransform h([](double) { return 1.0; }, -100.0, 100.0);
    CHECK(h_transform_solution(h, u0, 0.4, 1.1) == doctest::Approx(bump(1.5)).epsilon(1e-12));
  }
  {
    const auto h = HTransform::sinh_example();
    CHECK(h_transform_solution(h, u0, 0.4, -0.7) == doctest::Approx(bump(std::sinh(std::asinh(0.4) - 0.7))).epsilon(1e-14));
    // Quadrature route for the same alpha.
    const HTransform q([](double x) { return std::sqrt(x * x + 1.0); }, -50.0, 50.0);
    for (double x : {-3.0, -0.5, 0.0, 2.2}) {
      CHECK(q.H(x) == doctest::Approx(std::asinh(x)).epsilon(1e-10));
      CHECK(h_transform_solution(q, u0, x, 0.9) == doctest::Approx(bump(std::sinh(std::asinh(x) + 0.9))).epsilon(1e-9));
    }
  }
  {
    const HTransform h([](double x) { return x; }, 1e-3, 1e3, 1.0);
    for (double x : {0.5, 1.0, 3.0})
      CHECK(h_transform_solution(h, u0, x, 0.6) == doctest::Approx(bump(x * std::exp(0.6))).epsilon(1e-9));
  }
}

TEST_CASE("HTransform: alpha(x) = x solution satisfies u_t = alpha u_x for Z_t = t") {
  const HTransform h([](double x) { return x; }, 1e-3, 1e3, 1.0);
  const auto u0 = [](double x) { return bump(x); };
  const double d = 1e-4;
  for (double x : {0.5, 1.0, 2.0}) {
    for (double t : {0.2, 0.7}) {
      auto u = [&](double tt, double xx) { return h_transform_solution(h, u0, xx, tt); };
      const double ut = (u(t + d, x) - u(t - d, x)) / (2 * d);
      const double ux = (u(t, x + d) - u(t, x - d)) / (2 * d);
      CHECK(ut == doctest::Approx(x * ux).epsilon(1e-6));
    }
  }
}

TEST_CASE("HTransform: invalid alpha and out-of-range targets") {
  CHECK_THROWS_AS(HTransform([](double x) { return x; }, -1.0, 1.0, 0.5), InputError);
  const HTransform h([](double x) { return x; }, 0.1, 10.0, 1.0);
  CHECK_THROWS_AS(h.inverse(std::log(10.0) + 1.0), RangeError);
  CHECK(h.inverse(0.5) == doctest::Approx(std::exp(0.5)).epsilon(1e-10));
}

TEST_CASE("oracle_compare: zero field against the deterministic oracle and grid mismatch") {
  const auto c = std::make_shared<const CoefficientSet>(CoefficientSet::zero(1, 1));
  const auto drv = poisson_driver(1);
  const auto field = solve(c, drv, u0_bump(), {0.5, 1.0}, SpatialGrid::uniform(-3, 3, 21));
  OracleSpec oracle;
  oracle.kind = OracleSpec::Kind::deterministic;
  oracle.driver = drv;
  oracle.coeffs = c;
  oracle.u0 = u0_bump();
  const auto report = oracle_compare(field, oracle);
  CHECK(report.rmse <= 1e-15);
  CHECK(report.per_time.size() == 2);
  auto ref = evaluate_oracle(oracle, field.times, field.grid);
  ref[0].pop_back();
  CHECK_THROWS_AS(compare_values(field, ref), InputError);
  // A different realization is not a shared path.
  oracle.kind = OracleSpec::Kind::sinh_example;
  oracle.driver = poisson_driver(2);
  CHECK_THROWS_AS(oracle_compare(field, oracle), InputError);
}

TEST_CASE("fig1: maximum one, attained within a cell of sinh(-Z_t)") {
  const auto run = run_problem(make_preset("fig1"));
  REQUIRE(run.field.times.size() == 11);
  CHECK(run.field.times.back() == 100.0);
  const auto rows = fig1_rows(run.field, run.stable_path);
  for (const auto& r : rows) {
    CAPTURE(r.t);
    CHECK(r.ok);
    CHECK(r.u_max <= 1.0 + 1e-9);
    CHECK(r.u_min > 0.0);
  }
}

TEST_CASE("linearity_study: mixed preset") {
  const auto l = linearity_study(make_preset("mixed"), 2.5);
  CHECK(l.compared > 0);
  CHECK(l.max_relative <= 1e-10);
}

}  // TEST_SUITE
