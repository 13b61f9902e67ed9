#include <cmath>
#include <limits>

#include <doctest.h>

#include "marcus/errors.hpp"
#include "marcus/marcus_exp.hpp"
#include "marcus/studies.hpp"
#include "property.hpp"

using namespace marcus;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

JumpVectorField scalar_field(std::function<double(double, double)> f) {
  return {1, [f = std::move(f)](const Vec& x, const Vec& z) { return v1(f(x(0), z(0))); }};
}

const JumpVectorField kZero = scalar_field([](double, double) { return 0.0; });
const JumpVectorField kLinear = scalar_field([](double x, double z) { return x * z; });
const JumpVectorField kSinh = scalar_field([](double x, double z) { return -std::sqrt(x * x + 1.0) * z; });
const JumpVectorField kCos = scalar_field([](double x, double z) { return (1.0 + 0.5 * std::cos(x)) * z; });

// Two-dimensional rotation-plus-shear field, linear in z.
const JumpVectorField kPlane = JumpVectorField::linear_in_z(2, [](const Vec& x) {
  Mat s(2, 1);
  s(0, 0) = -x(1) + 0.3 * std::sin(x(0));
  s(1, 0) = x(0) + 0.1 * x(1) * x(1);
  return s;
});

CoefficientSet smooth_jump_coeffs() {
  auto c = CoefficientSet::zero(1, 1);
  c.alpha = scalar::mat_field([](double x) { return 0.4 + 0.3 * std::sin(x); });
  c.beta = scalar::row_field([](double x) { return 0.2 * std::cos(x) - 0.1; });
  c.sigma = scalar::row_field([](double x) { return std::exp(-x * x) + 0.05 * x; });
  return c;
}

}  // namespace

TEST_SUITE("marcus_exp") {

TEST_CASE("exp_map: examples") {
  CHECK(exp_map(kZero, v1(7.0), v1(1.3)).endpoint(0) == 7.0);
  CHECK(exp_map(kLinear, v1(1.0), v1(std::log(2.0))).endpoint(0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(exp_map(kSinh, v1(0.0), v1(1.0)).endpoint(0) == doctest::Approx(-std::sinh(1.0)).epsilon(1e-8));
}

TEST_CASE("exp_map: result metadata") {
  const auto r = exp_map(kSinh, v1(0.4), v1(0.8), 16);
  CHECK(r.substep_count == 16);
  CHECK(std::isfinite(r.estimated_error));
  CHECK(r.estimated_error > 0.0);
  // Step doubling bounds the true error within a factor of a few.
  const double exact = std::sinh(std::asinh(0.4) - 0.8);
  CHECK(std::abs(r.endpoint(0) - exact) <= 2.0 * r.estimated_error);
  CHECK_THROWS_AS(exp_map(kSinh, v1(0.0), v1(1.0), 0), InputError);
  CHECK_THROWS_AS(exp_map(kSinh, Vec::Zero(2), v1(1.0)), InputError);
}

TEST_CASE("exp_map: non-finite field raises divergence naming the substep") {
  const auto blowup = scalar_field([](double x, double) { return x > 0.52 ? std::numeric_limits<double>::quiet_NaN() : 1.0; });
  try {
    exp_map(blowup, v1(0.0), v1(1.0), 10);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("u-substep 6/10") != std::string::npos);
  }
}

TEST_CASE("exp_map_fractional: examples") {
  CHECK(exp_map_fractional(kSinh, v1(0.3), v1(1.0), 0.0)(0) == 0.3);
  CHECK(exp_map_fractional(kSinh, v1(0.3), v1(1.0), 1.0, 32)(0) == exp_map(kSinh, v1(0.3), v1(1.0), 32).endpoint(0));
  CHECK(exp_map_fractional(kLinear, v1(1.0), v1(2.0), 0.5, 64)(0) == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
  CHECK_THROWS_AS(exp_map_fractional(kLinear, v1(1.0), v1(1.0), 1.5), InputError);
  CHECK_THROWS_AS(exp_map_fractional(kLinear, v1(1.0), v1(1.0), -0.1), InputError);
}

TEST_CASE("exp_map: semigroup in fictitious time") {
  prop::for_all(60, 101, [](prop::Gen& g) {
    const double u = g.uniform(0.0, 0.6);
    const double v = g.uniform(0.0, 1.0 - u);
    const double z = g.uniform(-1.5, 1.5);
    for (const auto* field : {&kSinh, &kCos, &kLinear}) {
      const Vec x0 = v1(g.uniform(-3.0, 3.0));
      const Vec joint = exp_map_fractional(*field, x0, v1(z), u + v, 64);
      const Vec split = exp_map_fractional(*field, exp_map_fractional(*field, x0, v1(z), v, 64), v1(z), u, 64);
      CHECK((joint - split).norm() <= 1e-8);
    }
    const Vec p0 = Vec::Map(std::vector<double>{g.uniform(-1, 1), g.uniform(-1, 1)}.data(), 2);
    const Vec joint = exp_map_fractional(kPlane, p0, v1(z), u + v, 64);
    const Vec split = exp_map_fractional(kPlane, exp_map_fractional(kPlane, p0, v1(z), v, 64), v1(z), u, 64);
    CHECK((joint - split).norm() <= 1e-8);
  });
}

TEST_CASE("exp_map_inverse_check: examples") {
  CHECK(exp_map_inverse_check(kZero, v1(2.0), v1(0.7)) == 0.0);
  // RK4 amplification R(w) R(-w) = 1 + O(w^6): rounding-level at 64 substeps.
  CHECK(exp_map_inverse_check(kLinear, v1(-1.7), v1(0.9), 64) <= 1e-10);
  CHECK(exp_map_inverse_check(kSinh, v1(0.7), v1(0.3), 64) <= 1e-10);
}

TEST_CASE("exp_map_inverse_check: sign reversal inverts the map for linear-in-z fields") {
  prop::for_all(100, 7, [](prop::Gen& g) {
    const double z = g.uniform(-1.0, 1.0);
    CHECK(exp_map_inverse_check(kSinh, v1(g.uniform(-3, 3)), v1(z), 64) <= 1e-8);
    CHECK(exp_map_inverse_check(kCos, v1(g.uniform(-3, 3)), v1(z), 64) <= 1e-8);
    Vec p(2);
    p << g.uniform(-1, 1), g.uniform(-1, 1);
    CHECK(exp_map_inverse_check(kPlane, p, v1(z), 64) <= 1e-8);
  });
  CHECK(sinh_inverse_sweep(100, 64, 1) <= 1e-8);
}

TEST_CASE("exp_map: fourth-order convergence in the substep count") {
  // Exact endpoint from the arcsinh conjugacy.
  const double x0 = 0.9;
  const double z = 1.2;
  const auto exact = v1(std::sinh(std::asinh(x0) - z));
  const auto order = exp_map_order(kSinh, v1(x0), v1(z), {4, 8, 16, 32}, exact);
  CHECK(order.exponent >= 3.5);
  CHECK(order.exponent <= 4.5);
  // Against the numerical reference for a field without a closed form.
  const auto cos_order = exp_map_order(kCos, v1(-0.4), v1(1.8), {4, 8, 16, 32});
  CHECK(cos_order.exponent >= 3.5);
  CHECK(cos_order.exponent <= 4.5);
  for (std::size_t i = 1; i < order.errors.size(); ++i) {
    const double ratio = order.errors[i - 1] / order.errors[i];
    CHECK(ratio >= std::pow(2.0, 3.5));
    CHECK(ratio <= std::pow(2.0, 4.5));
  }
}

TEST_CASE("exp_map: strict order preserved in one dimension") {
  prop::for_all(200, 13, [](prop::Gen& g) {
    const double a = g.uniform(-5.0, 5.0);
    const double b = a + g.uniform(1e-6, 2.0);
    const double z = g.uniform(-2.0, 2.0);
    for (const auto* field : {&kSinh, &kCos}) {
      CHECK(exp_map(*field, v1(a), v1(z), 8).endpoint(0) < exp_map(*field, v1(b), v1(z), 8).endpoint(0));
    }
  });
}

TEST_CASE("exp_map_structured: block decoupling with beta = sigma = 0") {
  auto c = CoefficientSet::zero(1, 1);
  c.alpha = scalar::mat_field([](double x) { return std::sqrt(x * x + 1.0); });
  const auto s = exp_map_structured(c, v1(0.5), 2.5, -0.75, v1(0.6), 32);
  const auto plain = exp_map(kSinh, v1(0.5), v1(0.6), 32).endpoint;
  CHECK(s.x(0) == doctest::Approx(plain(0)).epsilon(1e-14));
  CHECK(s.xi == 2.5);
  CHECK(s.zeta == -0.75);
}

TEST_CASE("exp_map_structured: constant beta gives an exponential factor") {
  auto c = CoefficientSet::zero(1, 1);
  c.beta = scalar::row_field([](double) { return 0.8; });
  const auto s = exp_map_structured(c, v1(1.0), 3.0, 0.2, v1(-0.5));
  CHECK(s.xi == doctest::Approx(3.0 * std::exp(0.4)).epsilon(1e-13));
  CHECK(s.zeta == 0.2);
  CHECK(s.x(0) == 1.0);
}

TEST_CASE("exp_map_structured: constant beta and sigma give the closed-form source integral") {
  // J = int_0^1 exp(-beta z s) sigma z ds = sigma (1 - exp(-beta z)) / beta.
  auto c = CoefficientSet::zero(1, 1);
  c.beta = scalar::row_field([](double) { return 0.6; });
  c.sigma = scalar::row_field([](double) { return -1.1; });
  const double z = 0.7;
  const auto s = exp_map_structured(c, v1(0.0), 2.0, 0.5, v1(z), 64);
  const double J = -1.1 * (1.0 - std::exp(-0.6 * z)) / 0.6;
  CHECK(s.source_integral == doctest::Approx(J).epsilon(1e-12));
  CHECK(s.zeta == doctest::Approx(0.5 - 2.0 * J).epsilon(1e-12));
}

TEST_CASE("exp_map_structured: agrees with the full (d+2)-dimensional field") {
  const auto c = smooth_jump_coeffs();
  const auto full = characteristics_jump_field(c);
  prop::for_all(50, 23, [&](prop::Gen& g) {
    const double x0 = g.uniform(-3.0, 3.0);
    const double xi0 = g.uniform(0.1, 3.0);
    const double zeta0 = g.uniform(-2.0, 2.0);
    const double z = g.uniform(-1.5, 1.5);
    const auto s = exp_map_structured(c, v1(x0), xi0, zeta0, v1(z), 64);
    Vec X(3);
    X << x0, xi0, zeta0;
    const Vec e = exp_map(full, X, v1(z), 64).endpoint;
    CHECK(std::abs(s.x(0) - e(0)) <= 1e-8);
    CHECK(std::abs(s.xi - e(1)) <= 1e-8);
    CHECK(std::abs(s.zeta - e(2)) <= 1e-8);
  });
}

TEST_CASE("exp_map_structured: affine in (xi0, zeta0)") {
  const auto c = smooth_jump_coeffs();
  const auto base = exp_map_structured(c, v1(0.3), 1.0, 0.0, v1(0.9));
  prop::for_all(30, 29, [&](prop::Gen& g) {
    const double xi0 = g.uniform(0.1, 5.0);
    const double zeta0 = g.uniform(-3.0, 3.0);
    const auto s = exp_map_structured(c, v1(0.3), xi0, zeta0, v1(0.9));
    CHECK(s.x(0) == base.x(0));
    CHECK(s.xi == doctest::Approx(xi0 * base.xi).epsilon(1e-14));
    CHECK(s.zeta == doctest::Approx(zeta0 - xi0 * (-base.zeta)).epsilon(1e-13));
  });
}

}  // TEST_SUITE
