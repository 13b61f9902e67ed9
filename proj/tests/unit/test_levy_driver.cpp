#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <doctest.h>

#include "marcus/errors.hpp"
#include "marcus/levy_driver.hpp"
#include "marcus/parallel.hpp"
#include "marcus/statistics.hpp"
#include "property.hpp"

using namespace marcus;

namespace {

LevyMeasureSpec poisson(double rate, MarkDistribution marks = MarkDistribution::uniform(-1, 1)) {
  LevyMeasureSpec s;
  s.kind = FiniteActivity{rate, marks};
  return s;
}

LevyMeasureSpec stable(double alpha, double scale, double eps) {
  LevyMeasureSpec s;
  s.kind = AlphaStable{alpha, scale};
  s.truncation_epsilon = eps;
  return s;
}

bool same_realization(const DriverRealization& a, const DriverRealization& b) {
  if (a.grid != b.grid || a.jump_events.size() != b.jump_events.size()) return false;
  if (a.brownian_increments.size() != b.brownian_increments.size()) return false;
  for (std::size_t i = 0; i < a.brownian_increments.size(); ++i)
    if (a.brownian_increments[i] != b.brownian_increments[i]) return false;
  for (std::size_t i = 0; i < a.small_jump_increments.size(); ++i)
    if (a.small_jump_increments[i] != b.small_jump_increments[i]) return false;
  for (std::size_t i = 0; i < a.jump_events.size(); ++i)
    if (a.jump_events[i].time != b.jump_events[i].time || a.jump_events[i].mark != b.jump_events[i].mark)
      return false;
  return true;
}

}  // namespace

TEST_SUITE("levy_driver") {

TEST_CASE("sample_brownian: empty grid and a single point give no increments") {
  Engine rng = make_stream(1, 0, SubStream::brownian);
  const std::vector<double> g0 = {0.0};
  CHECK(sample_brownian(g0, 3, rng).empty());
}

TEST_CASE("sample_brownian: unit-interval variance inside the chi-square 99% band") {
  const std::vector<double> grid = {0.0, 1.0};
  const int n = 10000;
  double sum = 0.0;
  double sq = 0.0;
  Engine rng = make_stream(7, 0, SubStream::brownian);
  for (int i = 0; i < n; ++i) {
    const double w = sample_brownian(grid, 1, rng)[0](0);
    sum += w;
    sq += w * w;
  }
  const double mean = sum / n;
  const double var = (sq - n * mean * mean) / (n - 1);
  CHECK(var >= 0.94);
  CHECK(var <= 1.06);
}

TEST_CASE("sample_brownian: increment variance follows the interval length") {
  const std::vector<double> grid = {0.0, 0.25, 2.25};
  const int n = 20000;
  double s0 = 0.0;
  double s1 = 0.0;
  Engine rng = make_stream(9, 0, SubStream::brownian);
  for (int i = 0; i < n; ++i) {
    const auto inc = sample_brownian(grid, 1, rng);
    s0 += inc[0](0) * inc[0](0);
    s1 += inc[1](0) * inc[1](0);
  }
  CHECK(s0 / n == doctest::Approx(0.25).epsilon(0.05));
  CHECK(s1 / n == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("sample_brownian: non-monotone grid is rejected") {
  Engine rng = make_stream(1, 0, SubStream::brownian);
  const std::vector<double> bad = {0.0, 0.5, 0.5, 1.0};
  CHECK_THROWS_AS(sample_brownian(bad, 1, rng), InputError);
}

TEST_CASE("sample_brownian: same stream state gives identical increments") {
  const auto grid = uniform_time_grid(1.0, 0.01);
  Engine a = make_stream(42, 3, SubStream::brownian);
  Engine b = make_stream(42, 3, SubStream::brownian);
  const auto x = sample_brownian(grid, 2, a);
  const auto y = sample_brownian(grid, 2, b);
  REQUIRE(x.size() == grid.size() - 1);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == y[i]);
}

TEST_CASE("sample_compound_poisson: zero intensity gives no events") {
  Engine rng = make_stream(1, 0, SubStream::jumps);
  CHECK(sample_compound_poisson(poisson(0.0), 5.0, 1, rng).empty());
}

TEST_CASE("sample_compound_poisson: mean count within the Poisson band") {
  const int n = 10000;
  Engine rng = make_stream(11, 0, SubStream::jumps);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += static_cast<double>(sample_compound_poisson(poisson(3.0), 2.0, 1, rng).size());
  const double mean = total / n;
  const double band = 3.0 * std::sqrt(6.0 / n);
  CHECK(std::abs(mean - 6.0) <= band);
}

TEST_CASE("sample_compound_poisson: times strictly increasing in (0, T], marks from the law") {
  prop::for_all(50, 3, [](prop::Gen& g) {
    const double rate = g.uniform(0.5, 40.0);
    const double T = g.uniform(0.1, 5.0);
    const double lo = g.uniform(-2.0, 0.0);
    const double hi = lo + g.uniform(0.1, 3.0);
    const auto ev = sample_compound_poisson(poisson(rate, MarkDistribution::uniform(lo, hi)), T, 1, g.engine());
    for (std::size_t i = 0; i < ev.size(); ++i) {
      CHECK(ev[i].time > 0.0);
      CHECK(ev[i].time <= T);
      if (i) CHECK(ev[i].time > ev[i - 1].time);
      CHECK(ev[i].mark(0) >= lo);
      CHECK(ev[i].mark(0) <= hi);
      CHECK(ev[i].mark(0) != 0.0);
    }
  });
}

TEST_CASE("sample_compound_poisson: negative intensity and non-finite-activity spec rejected") {
  Engine rng = make_stream(1, 0, SubStream::jumps);
  CHECK_THROWS_AS(sample_compound_poisson(poisson(-1.0), 1.0, 1, rng), InputError);
  CHECK_THROWS_AS(sample_compound_poisson(stable(1.5, 1.0, 0.1), 1.0, 1, rng), InputError);
}

TEST_CASE("sample_stable_path: alpha = 2 gives Gaussian increments of variance 2 c dt") {
  const double c = 0.3;
  const double dt = 0.5;
  const std::vector<double> grid = {0.0, dt};
  const int n = 20000;
  Engine rng = make_stream(5, 0, SubStream::stable_path);
  double sq = 0.0;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = sample_stable_path(2.0, c, grid, rng)[0];
    sq += xs[i] * xs[i];
  }
  CHECK(sq / n == doctest::Approx(2.0 * c * dt).epsilon(0.04));
  // Against an independent normal sample.
  Engine nrng = make_stream(6, 0, SubStream::brownian);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 * c * dt));
  std::vector<double> ys(n);
  for (auto& y : ys) y = normal(nrng);
  CHECK(ks_two_sample(xs, ys).p_value > 0.01);
}

TEST_CASE("sample_stable_path: characteristic function at lambda = 1 for alpha = 1.75, scale 0.1") {
  const int n = 10000;
  const std::vector<double> grid = {0.0, 1.0};
  Engine rng = make_stream(2024, 0, SubStream::stable_path);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::cos(sample_stable_path(1.75, 0.1, grid, rng)[0]);
  CHECK(std::abs(acc / n - std::exp(-0.1)) <= 3.0 / std::sqrt(double(n)));
}

TEST_CASE("sample_stable_path: characteristic function at several lambda and alpha") {
  // E cos(lambda Z_1) = exp(-scale |lambda|^alpha); tolerance from the CLT bound.
  const int n = 20000;
  const std::vector<double> grid = {0.0, 1.0};
  for (double alpha : {0.7, 1.0, 1.3, 1.9}) {
    Engine rng = make_stream(77, static_cast<std::uint64_t>(alpha * 10), SubStream::stable_path);
    std::vector<double> z(n);
    for (auto& v : z) v = sample_stable_path(alpha, 0.5, grid, rng)[0];
    for (double lambda : {0.5, 1.0, 2.0}) {
      double acc = 0.0;
      for (double v : z) acc += std::cos(lambda * v);
      CAPTURE(alpha);
      CAPTURE(lambda);
      CHECK(std::abs(acc / n - std::exp(-0.5 * std::pow(lambda, alpha))) <= 4.0 / std::sqrt(double(n)));
    }
  }
}

TEST_CASE("sample_stable_path: self-similarity under time scaling (two-sample KS)") {
  const int n = 10000;
  const double alpha = 1.75;
  Engine rng = make_stream(31, 0, SubStream::stable_path);
  std::vector<double> one(n);
  std::vector<double> two(n);
  const std::vector<double> g1 = {0.0, 0.3};
  const std::vector<double> g2 = {0.0, 0.6};
  for (int i = 0; i < n; ++i) {
    one[i] = sample_stable_path(alpha, 0.1, g1, rng)[0];
    two[i] = sample_stable_path(alpha, 0.1, g2, rng)[0] / std::pow(2.0, 1.0 / alpha);
  }
  CHECK(ks_two_sample(one, two).p_value > 0.01);
}

TEST_CASE("sample_stable_path: increments are symmetric") {
  const int n = 20000;
  const std::vector<double> grid = {0.0, 1.0};
  Engine rng = make_stream(12, 0, SubStream::stable_path);
  std::vector<double> z(n);
  for (auto& v : z) v = sample_stable_path(1.5, 1.0, grid, rng)[0];
  std::vector<double> neg(z.size());
  std::transform(z.begin(), z.end(), neg.begin(), [](double v) { return -v; });
  CHECK(ks_two_sample(z, neg).p_value > 0.01);
}

TEST_CASE("sample_stable_path: invalid parameters") {
  Engine rng = make_stream(1, 0, SubStream::stable_path);
  const std::vector<double> grid = {0.0, 1.0};
  CHECK_THROWS_AS(sample_stable_path(0.0, 1.0, grid, rng), InputError);
  CHECK_THROWS_AS(sample_stable_path(2.5, 1.0, grid, rng), InputError);
  CHECK_THROWS_AS(sample_stable_path(1.5, 0.0, grid, rng), InputError);
}

TEST_CASE("truncated stable jumps: event rate and Pareto tail of the restricted measure") {
  // nu(|z| > eps) = 2 C eps^{-alpha} / alpha with C = scale / kappa(alpha).
  const double alpha = 1.5;
  const double scale = 0.2;
  const double eps = 0.1;
  const auto spec = stable(alpha, scale, eps);
  const double kappa = 2.0 * std::tgamma(1.0 - alpha) * std::cos(M_PI * alpha / 2.0) / alpha;
  const double rate = 2.0 * (scale / kappa) * std::pow(eps, -alpha) / alpha;
  CHECK(spec.event_intensity(1) == doctest::Approx(rate).epsilon(1e-12));
  const double T = 200.0;
  Engine rng = make_stream(8, 0, SubStream::jumps);
  const auto ev = sample_truncated_jumps(spec, T, 1, rng);
  const double expected = rate * T;
  CHECK(std::abs(double(ev.size()) - expected) <= 4.0 * std::sqrt(expected));
  // P(|z| > 2 eps | |z| > eps) = 2^{-alpha}.
  double above = 0.0;
  for (const auto& e : ev) above += std::abs(e.mark(0)) > 2.0 * eps;
  const double p = std::pow(2.0, -alpha);
  CHECK(std::abs(above / ev.size() - p) <= 4.0 * std::sqrt(p * (1 - p) / ev.size()));
}

TEST_CASE("truncated stable: small-jump variance matches the density integral") {
  const auto spec = stable(1.2, 0.5, 0.2);
  // 2 int_0^eps z^2 C z^{-1-alpha} dz by midpoint quadrature.
  const double C = levy_density(spec, 1.0);
  const int n = 200000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = (i + 0.5) * 0.2 / n;
    acc += z * z * C * std::pow(z, -2.2) * (0.2 / n);
  }
  CHECK(spec.small_jump_variance() == doctest::Approx(2.0 * acc).epsilon(1e-3));
}

TEST_CASE("decompose_events: examples") {
  CHECK(decompose_events({}).first.empty());
  CHECK(decompose_events({}).second.empty());
  std::vector<JumpEvent> ev = {{0.1, Vec::Constant(1, 0.5)}, {0.2, Vec::Constant(1, 2.0)}};
  auto [small, large] = decompose_events(ev);
  REQUIRE(small.size() == 1);
  REQUIRE(large.size() == 1);
  CHECK(small[0].mark(0) == 0.5);
  CHECK(large[0].mark(0) == 2.0);
  auto [all, none] = decompose_events(ev, std::numeric_limits<double>::infinity());
  CHECK(all.size() == 2);
  CHECK(none.empty());
}

TEST_CASE("decompose_events: partition preserves order and membership") {
  prop::for_all(40, 5, [](prop::Gen& g) {
    std::vector<JumpEvent> ev;
    double t = 0.0;
    const int n = g.integer(0, 30);
    for (int i = 0; i < n; ++i) {
      t += g.uniform(0.01, 1.0);
      ev.push_back({t, Vec::Constant(2, g.nonzero(-3, 3, 1e-3))});
    }
    const double thr = g.uniform(0.1, 4.0);
    auto [small, large] = decompose_events(ev, thr);
    CHECK(small.size() + large.size() == ev.size());
    for (const auto& e : small) CHECK(e.mark.norm() <= thr);
    for (const auto& e : large) CHECK(e.mark.norm() > thr);
    for (std::size_t i = 1; i < small.size(); ++i) CHECK(small[i].time > small[i - 1].time);
    for (std::size_t i = 1; i < large.size(); ++i) CHECK(large[i].time > large[i - 1].time);
  });
}

TEST_CASE("generate_driver: bit-exact replay and independence from thread count") {
  DriverOptions opt;
  opt.horizon = 2.0;
  opt.dt = 0.01;
  opt.brownian = true;
  opt.has_levy = true;
  opt.levy = stable(1.6, 0.3, 0.05);
  opt.small_jump_mode = SmallJumpMode::gaussian_substitute;
  opt.seed = 0xdeadbeef;
  const std::size_t count = 8;
  std::vector<DriverRealization> serial;
  for (std::size_t k = 0; k < count; ++k) {
    auto o = opt;
    o.realization_index = k;
    serial.push_back(generate_driver(o));
  }
  std::vector<DriverRealization> parallel(count);
  parallel_for(count, 4, [&](std::size_t k) {
    auto o = opt;
    o.realization_index = k;
    parallel[k] = generate_driver(o);
  });
  for (std::size_t k = 0; k < count; ++k) CHECK(same_realization(serial[k], parallel[k]));
  CHECK_FALSE(same_realization(serial[0], serial[1]));
}

TEST_CASE("generate_driver: invariants of the realization") {
  prop::for_all(20, 17, [](prop::Gen& g) {
    DriverOptions opt;
    opt.horizon = g.uniform(0.5, 3.0);
    opt.dt = g.uniform(0.003, 0.05);
    opt.m = g.integer(1, 2);
    opt.brownian = g.integer(0, 1) == 1;
    opt.has_levy = true;
    opt.levy = poisson(g.uniform(0.0, 20.0));
    opt.seed = g.integer(0, 1 << 30);
    opt.extra_times = {opt.horizon / 3.0};
    const auto d = generate_driver(opt);
    CHECK(d.grid.front() == 0.0);
    CHECK(d.grid.back() == doctest::Approx(opt.horizon));
    if (opt.brownian) CHECK(d.brownian_increments.size() == d.grid.size() - 1);
    for (std::size_t i = 0; i < d.jump_events.size(); ++i) {
      CHECK(d.grid_index(d.jump_events[i].time) >= 0);
      if (i) CHECK(d.jump_events[i].time > d.jump_events[i - 1].time);
    }
    CHECK(d.grid_index(opt.horizon / 3.0) >= 0);
  });
}

TEST_CASE("generate_driver: levy_value sums marks, drift and substitute") {
  DriverOptions opt;
  opt.horizon = 1.0;
  opt.dt = 0.01;
  opt.has_levy = true;
  opt.levy = poisson(10.0, MarkDistribution::uniform(0.2, 1.5));
  opt.seed = 3;
  const auto d = generate_driver(opt);
  // Marks in (1, 1.5] are large jumps and stay uncompensated.
  const double lam_small_mean = 10.0 * (1.0 - 0.04) / 2.0 / 1.3;
  CHECK(d.drift(0) == doctest::Approx(-lam_small_mean));
  double marks = 0.0;
  for (const auto& e : d.jump_events) marks += e.mark(0);
  CHECK(d.levy_value(1.0)(0) == doctest::Approx(marks - lam_small_mean));
}

TEST_CASE("LevyMeasureSpec: invariants enforced") {
  CHECK_THROWS_AS(stable(0.0, 1.0, 0.1).validate(1), InputError);
  CHECK_THROWS_AS(stable(2.1, 1.0, 0.1).validate(1), InputError);
  CHECK_THROWS_AS(stable(1.5, -1.0, 0.1).validate(1), InputError);
  CHECK_THROWS_AS(stable(1.5, 1.0, 0.0).validate(1), InputError);
  CHECK_THROWS_AS(stable(1.5, 1.0, 1.0).validate(1), InputError);
  CHECK_NOTHROW(stable(2.0, 1.0, 0.0).validate(1));
  auto p = poisson(1.0);
  p.truncation_epsilon = 0.1;
  CHECK_THROWS_AS(p.validate(1), InputError);
  CHECK_THROWS_AS(poisson(-0.5).validate(1), InputError);
}

}  // TEST_SUITE
