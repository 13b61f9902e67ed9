// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "marcus/errors.hpp"
#include "marcus/marcus_exp.hpp"
#include "marcus/presets.hpp"
#include "marcus/studies.hpp"

using namespace marcus;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

Vec v1(double x) { return Vec::Constant(1, x); }

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

Outcome exp_map_accuracy() {
  const JumpVectorField linear{1, [](const Vec& x, const Vec& z) { return Vec(x * z(0)); }};
  const double err = std::abs(exp_map(linear, v1(1.0), v1(std::log(2.0)), 64).endpoint(0) - 2.0);
  const auto order = exp_map_order(linear, v1(1.0), v1(std::log(2.0)), {4, 8, 16, 32}, v1(2.0));
  return {err <= 1e-10 && order.exponent >= 3.5 && order.exponent <= 4.5,
          "|x(1) - 2| = " + num(err) + " (<= 1e-10), order " + num(order.exponent) + " (in [3.5, 4.5])"};
}

Outcome jump_inverse() {
  const double worst = sinh_inverse_sweep(100, 64, 1);
  return {worst <= 1e-8, "max residual " + num(worst) + " over 100 cases (<= 1e-8)"};
}

Outcome round_trip() {
  Problem p = make_preset("sinh-example");
  p.driver.seed = 3;
  p.times = {1.0};
  p.driver.extra_times = p.times;
  const std::size_t jumps = realize_driver(p)->jump_events.size();
  InversionOptions table;
  table.mode = InversionMode::table;
  const auto rt = round_trip_study(p, 201, table);
  return {jumps > 0 && rt.residual <= 1e-3, "max residual " + num(rt.residual) + " at t = " + num(rt.t) +
                                                " (<= 1e-3), " + std::to_string(jumps) + " jumps"};
}

Outcome oracle_equivalence() {
  auto rmse_at = [](double dt, std::size_t& jumps) {
    Problem p = make_preset("sinh-example");
    p.driver.seed = 3;
    p.driver.dt = dt;
    p.solver.integration.dt = dt;
    p.oracle = Problem::OracleKind::h_transform;
    p.oracle_alpha = [](double x) { return std::sqrt(x * x + 1.0); };
    const auto run = run_problem(p);
    jumps = run.driver->jump_events.size();
    return run.oracle->rmse;
  };
  std::size_t jumps = 0;
  std::size_t jumps_half = 0;
  const double coarse = rmse_at(1e-3, jumps);
  const double fine = rmse_at(5e-4, jumps_half);
  const double ratio = fine > 0.0 ? coarse / fine : INFINITY;
  return {jumps > 0 && jumps == jumps_half && coarse <= 5e-3 && ratio >= 1.7 && ratio <= 2.3,
          "rmse " + num(coarse) + " at dt 1e-3 (<= 5e-3), " + num(fine) + " at dt 5e-4, ratio " +
              num(ratio) + " (in [1.7, 2.3]), " + std::to_string(jumps) + " jumps"};
}

Outcome deterministic_reduction() {
  const auto run = run_problem(make_preset("smooth-deterministic"));
  const double err = run.oracle->max_abs;
  return {err <= 1e-6 && run.oracle->flagged == 0, "max error " + num(err) + " (<= 1e-6)"};
}

Outcome strong_order() {
  const Problem p = make_preset("linear");
  std::vector<double> ladder;
  for (int k = 6; k <= 12; ++k) ladder.push_back(std::ldexp(1.0, -k));
  const auto conv = convergence_study(p, ladder, std::ldexp(1.0, -16), 32, {-1.0, 0.5, 1.0}, threads());
  const bool ok = conv.sufficient && conv.fit.slope >= 0.45 && conv.fit.r2 >= 0.9;
  return {ok, "slope " + num(conv.fit.slope) + " (>= 0.45), R^2 " + num(conv.fit.r2) + " (>= 0.9), " +
                  std::to_string(conv.realizations) + " realizations"};
}

Outcome fig1() {
  const Problem p = make_preset("fig1");
  const auto run = run_problem(p);
  const auto rows = fig1_rows(run.field, run.stable_path);
  std::size_t ok = 0;
  double u_max = 0.0;
  double u_min = INFINITY;
  for (const auto& r : rows) {
    ok += r.ok;
    u_max = std::max(u_max, r.u_max);
    u_min = std::min(u_min, r.u_min);
  }
  return {ok == rows.size() && rows.size() == p.times.size(),
          std::to_string(ok) + "/" + std::to_string(rows.size()) + " times with 0 < u <= 1 + 1e-9 and argmax within one cell of sinh(-Z_t); u in [" +
              num(u_min) + ", " + num(u_max) + "]"};
}

Outcome sampler() {
  const auto s = sampler_study(10000, 20240501);
  const double dev = std::abs(s.cos_mean - s.cos_target);
  return {s.gaussian_ks_p > 0.01 && dev <= s.cos_tolerance,
          "alpha = 2 KS p " + num(s.gaussian_ks_p) + " (> 0.01), |Re E e^{iZ_1} - e^{-0.1}| " + num(dev) +
              " (<= " + num(s.cos_tolerance) + ")"};
}

Outcome linearity() {
  const auto l = linearity_study(make_preset("mixed"), 2.5);
  return {l.max_relative <= 1e-12 && l.compared > 0,
          "max relative deviation " + num(l.max_relative) + " over " + std::to_string(l.compared) + " points (<= 1e-12)"};
}

struct Criterion {
  const char* name;
  double budget;  // seconds
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"exp-map analytic accuracy", 1.0, exp_map_accuracy},
      {"jump inverse identity", 1.0, jump_inverse},
      {"round-trip flow identity", 10.0, round_trip},
      {"pathwise oracle equivalence", 30.0, oracle_equivalence},
      {"deterministic reduction", 5.0, deterministic_reduction},
      {"Stratonovich strong order", 120.0, strong_order},
      {"stable field snapshots", 10.0, fig1},
      {"sampler statistics", 5.0, sampler},
      {"linearity of the solution operator", 5.0, linearity},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s [%d] %s: %s; %.2f s (< %g s%s)\n", pass ? "PASS" : "FAIL", index, c.name, o.detail.c_str(),
                secs, c.budget, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
