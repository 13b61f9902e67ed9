#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "marcus/characteristics.hpp"
#include "marcus/inverse_flow.hpp"

namespace marcus {

struct InitialCondition {
  std::function<double(const Vec&)> u0;
  /// Caller asserts u0 is C^2 with bounded derivatives; recorded, not checked.
  bool declared_regularity = false;

  double operator()(const Vec& x) const { return u0(x); }
};

/// Spatial sample points. For d > 1 the points form a row-major tensor grid
/// described by `shape`, `lo` and `hi`.
struct SpatialGrid {
  std::vector<Vec> points;
  std::vector<std::size_t> shape;
  Vec lo;
  Vec hi;

  int dimension() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
  std::size_t size() const { return points.size(); }

  static SpatialGrid uniform(double lo, double hi, std::size_t n);
  static SpatialGrid tensor(const Vec& lo, const Vec& hi, const std::vector<std::size_t>& shape);
  /// Points sinh(s) with s uniform on [lo_s, hi_s].
  static SpatialGrid asinh_uniform(double lo_s, double hi_s, std::size_t n);
  /// Arbitrary 1D points, in the given order.
  static SpatialGrid from_values(const std::vector<double>& values);
};

enum class PointFlag : std::uint8_t { ok = 0, out_of_range, diverged, non_monotone, no_convergence };

std::string to_string(PointFlag flag);

struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t realization_index = 0;
  double dt = 0.0;
  int substeps = 0;
  SmallJumpMode small_jump_mode = SmallJumpMode::drop;
  std::string scheme;
  std::string inversion;
  double table_lo = 0.0;
  double table_hi = 0.0;
  std::size_t table_points = 0;
};

/// u(t, x) on times x grid. Flagged entries hold NaN.
struct SolutionField {
  std::vector<double> times;
  SpatialGrid grid;
  std::vector<std::vector<double>> values;          // [time][point]
  std::vector<std::vector<PointFlag>> flags;        // [time][point]
  std::vector<std::string> messages;                // one line per distinct failure
  Provenance provenance;

  std::size_t flagged_count() const;
  double flagged_fraction() const;
};

struct SolverParams {
  IntegrationParams integration;
  InversionOptions inversion;
  /// Explicit initial grid for the forward table (d = 1). Empty: a uniform
  /// grid over the output box widened until its image covers the box.
  std::vector<double> table_grid;
  std::size_t table_points = 0;  // 0: twice the output grid size
  /// Half-width padding of the automatic table box, as a fraction of its width.
  double table_margin = 0.25;
  int max_widenings = 6;
  int threads = 1;
};

SolutionField solve(std::shared_ptr<const CoefficientSet> coeffs,
                    std::shared_ptr<const DriverRealization> driver, const InitialCondition& u0,
                    const std::vector<double>& times, const SpatialGrid& grid,
                    const SolverParams& params = {});

/// Noise-free reference: with psi' = a(psi), psi(0) = x, P' = b(psi),
/// Q' = exp(P) c(psi), returns exp(P(t)) u0(psi(t)) + Q(t) (RK4, `steps` steps).
double deterministic_solution(const CoefficientSet& coeffs, const InitialCondition& u0, double t,
                              const Vec& x, int steps = 4000);

/// H(x) = int_anchor^x dy / alpha(y) on a domain where alpha > 0.
class HTransform {
 public:
  HTransform(std::function<double(double)> alpha, double lo, double hi, double anchor = 0.0);
  /// H = arcsinh, H^{-1} = sinh (alpha(x) = sqrt(x^2 + 1)).
  static HTransform sinh_example();

  double H(double x) const;
  double inverse(double v) const;
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  HTransform() = default;

  std::function<double(double)> alpha_;
  double lo_ = 0.0;
  double hi_ = 0.0;
  double anchor_ = 0.0;
  double h_lo_ = 0.0;
  double h_hi_ = 0.0;
  bool closed_form_ = false;
};

/// u0(H^{-1}(H(x) + z)).
double h_transform_solution(const HTransform& h, const std::function<double(double)>& u0, double x,
                            double z);

struct OracleSpec {
  enum class Kind { deterministic, h_transform, sinh_example };
  Kind kind = Kind::deterministic;
  std::shared_ptr<const DriverRealization> driver;
  /// deterministic: the noise-free coefficient set.
  std::shared_ptr<const CoefficientSet> coeffs;
  /// h_transform: alpha, its positivity domain and the H anchor.
  std::function<double(double)> alpha;
  double domain_lo = -1e6;
  double domain_hi = 1e6;
  double anchor = 0.0;
  /// The path fed to H is drift_weight t + brownian_weight W_t + levy_weight Z_t,
  /// matching a(x) = A(x) = alpha(x) setups.
  double drift_weight = 0.0;
  double brownian_weight = 0.0;
  double levy_weight = 1.0;
  /// Replaces the driver-based path, e.g. a directly sampled stable path.
  std::function<double(double)> path;
  InitialCondition u0;
  int deterministic_steps = 4000;

  /// Path value fed to H at time t; t must be a driver grid point when the
  /// Brownian weight is nonzero.
  double path_value(double t) const;
};

/// Oracle values [time][point].
std::vector<std::vector<double>> evaluate_oracle(const OracleSpec& oracle,
                                                 const std::vector<double>& times,
                                                 const SpatialGrid& grid);

struct OracleTimeRow {
  double t = 0.0;
  double rmse = 0.0;
  double max_abs = 0.0;
  std::size_t valid = 0;
  std::size_t flagged = 0;
};

struct OracleReport {
  double rmse = 0.0;
  double max_abs = 0.0;
  std::size_t valid = 0;
  std::size_t flagged = 0;
  double flagged_fraction = 0.0;
  std::vector<OracleTimeRow> per_time;
};

OracleReport oracle_compare(const SolutionField& field, const OracleSpec& oracle);

/// Same statistics against precomputed reference values [time][point].
OracleReport compare_values(const SolutionField& field,
                            const std::vector<std::vector<double>>& reference);

}  // namespace marcus
