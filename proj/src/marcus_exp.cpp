#include "marcus/marcus_exp.hpp"

#include <cmath>
#include <string>

#include "marcus/errors.hpp"

namespace marcus {

namespace {

template <class Rhs>
Vec rk4_integrate(Rhs&& rhs, Vec y, double horizon, int substeps) {
  const double h = horizon / substeps;
  for (int k = 0; k < substeps; ++k) {
    const Vec k1 = rhs(y, k);
    const Vec k2 = rhs(y + 0.5 * h * k1, k);
    const Vec k3 = rhs(y + 0.5 * h * k2, k);
    const Vec k4 = rhs(y + h * k3, k);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return y;
}

void require_finite(const Vec& v, int substep, int substeps) {
  if (!v.allFinite())
    throw DivergenceError("exp_map: non-finite field value at u-substep " + std::to_string(substep + 1) +
                          "/" + std::to_string(substeps));
}

Vec integrate_field(const JumpVectorField& field, const Vec& x0, const Vec& z, double u,
                    int substeps) {
  if (substeps < 1) throw InputError("exp_map: substeps must be >= 1");
  if (!field.evaluate) {
    if (x0.size() != field.dimension) throw InputError("exp_map: x0 dimension mismatch");
    return x0;
  }
  if (x0.size() != field.dimension) throw InputError("exp_map: x0 dimension mismatch");
  auto rhs = [&](const Vec& y, int k) {
    Vec v = field.evaluate(y, z);
    require_finite(v, k, substeps);
    return v;
  };
  Vec out = rk4_integrate(rhs, x0, u, substeps);
  require_finite(out, substeps - 1, substeps);
  return out;
}

}  // namespace

JumpVectorField JumpVectorField::linear_in_z(int dimension, std::function<Mat(const Vec&)> sigma) {
  return {dimension, [sigma = std::move(sigma)](const Vec& x, const Vec& z) -> Vec { return sigma(x) * z; }};
}

ExpMapResult exp_map(const JumpVectorField& field, const Vec& x0, const Vec& z, int substeps) {
  ExpMapResult r;
  r.endpoint = integrate_field(field, x0, z, 1.0, substeps);
  r.substep_count = substeps;
  const Vec fine = integrate_field(field, x0, z, 1.0, 2 * substeps);
  r.estimated_error = (fine - r.endpoint).norm();
  return r;
}

Vec exp_map_fractional(const JumpVectorField& field, const Vec& x0, const Vec& z, double u,
                       int substeps) {
  if (!(u >= 0.0 && u <= 1.0)) throw InputError("exp_map_fractional: u must lie in [0, 1]");
  if (u == 0.0) return x0;
  return integrate_field(field, x0, z, u, substeps);
}

StructuredJump exp_map_structured(const CoefficientSet& coeffs, const Vec& x0, double xi0,
                                  double zeta0, const Vec& z, int substeps) {
  if (substeps < 1) throw InputError("exp_map_structured: substeps must be >= 1");
  const int d = coeffs.d;
  if (x0.size() != d || z.size() != coeffs.m)
    throw InputError("exp_map_structured: dimension mismatch");
  StructuredJump out;
  if (!coeffs.has_jump_terms() || z.isZero(0.0)) {
    out.x = x0;
    out.xi = xi0;
    out.zeta = zeta0;
    return out;
  }
  // Augmented state (h, L, J):
  //   h' = -alpha(h) z,  L' = beta(h) z,  J' = exp(-L) sigma(h) z.
  auto rhs = [&](const Vec& y, int k) {
    const Vec h = y.head(d);
    Vec v(d + 2);
    v.head(d) = -(coeffs.eval_alpha(h) * z);
    v(d) = coeffs.eval_beta(h).dot(z);
    v(d + 1) = std::exp(-y(d)) * coeffs.eval_sigma(h).dot(z);
    require_finite(v, k, substeps);
    return v;
  };
  Vec y0 = Vec::Zero(d + 2);
  y0.head(d) = x0;
  const Vec y = rk4_integrate(rhs, y0, 1.0, substeps);
  require_finite(y, substeps - 1, substeps);
  out.x = y.head(d);
  out.log_factor = y(d);
  out.source_integral = y(d + 1);
  out.xi = xi0 * std::exp(-out.log_factor);
  out.zeta = zeta0 - xi0 * out.source_integral;
  return out;
}

JumpVectorField characteristics_jump_field(const CoefficientSet& coeffs) {
  return {coeffs.d + 2, [coeffs](const Vec& X, const Vec& z) -> Vec { return coeffs.system_jump(X) * z; }};
}

double exp_map_inverse_check(const JumpVectorField& field, const Vec& x0, const Vec& z,
                             int substeps) {
  const Vec forward = integrate_field(field, x0, z, 1.0, substeps);
  const Vec back = integrate_field(field, forward, Vec(-z), 1.0, substeps);
  return (back - x0).norm();
}

}  // namespace marcus
