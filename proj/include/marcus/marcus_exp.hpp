#pragma once

#include <functional>

#include "marcus/coefficients.hpp"

namespace marcus {

inline constexpr int kDefaultSubsteps = 32;

/// Jump vector field phi(x, z) of a Marcus equation; x in R^d, z in R^m.
struct JumpVectorField {
  int dimension = 1;
  std::function<Vec(const Vec& x, const Vec& z)> evaluate;

  /// phi(x, z) = Sigma(x) z for a matrix-valued Sigma.
  static JumpVectorField linear_in_z(int dimension, std::function<Mat(const Vec&)> sigma);
};

struct ExpMapResult {
  Vec endpoint;
  int substep_count = 0;
  /// |h_n(1) - h_2n(1)| from step doubling.
  double estimated_error = 0.0;
};

/// Marcus exponential map: h(1) for dh/du = phi(h, z), h(0) = x0, by
/// classical RK4 with `substeps` equal steps on [0, 1].
ExpMapResult exp_map(const JumpVectorField& field, const Vec& x0, const Vec& z,
                     int substeps = kDefaultSubsteps);

/// h(u) for u in [0, 1], RK4 with `substeps` equal steps on [0, u].
Vec exp_map_fractional(const JumpVectorField& field, const Vec& x0, const Vec& z, double u,
                       int substeps = kDefaultSubsteps);

/// Jump of the (d+2)-dimensional characteristics state through exp(Sigma z).
struct StructuredJump {
  Vec x;
  double xi = 1.0;
  double zeta = 0.0;
  /// L = int_0^1 beta(h(r)) z dr, so xi = xi0 exp(-L).
  double log_factor = 0.0;
  /// J = int_0^1 exp(-int_0^s beta z) sigma(h(s)) z ds, so zeta = zeta0 - xi0 J.
  double source_integral = 0.0;
};

/// Block form of exp(Sigma(.) z): the x-part flows along -alpha z, and xi,
/// zeta follow from quadratures along that shared trajectory.
StructuredJump exp_map_structured(const CoefficientSet& coeffs, const Vec& x0, double xi0,
                                  double zeta0, const Vec& z, int substeps = kDefaultSubsteps);

/// Full (d+2)-dimensional field X -> Sigma(X) z of the characteristics system.
JumpVectorField characteristics_jump_field(const CoefficientSet& coeffs);

/// || exp(phi(., -z))(exp(phi(., z))(x0)) - x0 ||.
double exp_map_inverse_check(const JumpVectorField& field, const Vec& x0, const Vec& z,
                             int substeps = kDefaultSubsteps);

}  // namespace marcus
