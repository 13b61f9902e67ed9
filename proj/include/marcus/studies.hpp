#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "marcus/presets.hpp"
#include "marcus/statistics.hpp"

namespace marcus {

/// Driver realization of a problem (not used for direct stable paths).
std::shared_ptr<const DriverRealization> realize_driver(const Problem& problem);

/// Z at problem.times from the stable law by increment sampling.
std::vector<double> sample_direct_stable_path(const Problem& problem);

struct SolveRun {
  std::shared_ptr<const DriverRealization> driver;
  std::vector<double> stable_path;  // direct stable problems only
  SolutionField field;
  std::optional<OracleReport> oracle;
  /// Oracle values [time][point] when an oracle exists.
  std::vector<std::vector<double>> reference;
};

/// Full pipeline. Direct stable problems build the field from the closed
/// form, with an auto grid when problem.auto_grid is set.
SolveRun run_problem(const Problem& problem);

/// asinh-spaced grid with half-width max(6, max |Z_t| + 2) in arcsinh units.
SpatialGrid fig1_grid(const std::vector<double>& path, std::size_t points = 1201);

struct Fig1Row {
  double t = 0.0;
  double z = 0.0;
  double argmax_x = 0.0;
  double target_x = 0.0;
  double cell = 0.0;
  double u_min = 0.0;
  double u_max = 0.0;
  bool ok = false;
};

/// For each time: 0 < u <= 1 + 1e-9 and the grid argmax lies within one
/// cell of sinh(-Z_t).
std::vector<Fig1Row> fig1_rows(const SolutionField& field, const std::vector<double>& path);

struct ExpMapOrder {
  std::vector<int> substeps;
  std::vector<double> errors;
  double exponent = 0.0;  // -slope of log error vs log substeps
};

/// Errors against a 4096-substep reference (or `exact` when given).
ExpMapOrder exp_map_order(const JumpVectorField& field, const Vec& x0, const Vec& z,
                          const std::vector<int>& substeps, std::optional<Vec> exact = {});

/// Max of exp_map_inverse_check over `cases` pseudo-random (x0, z) pairs
/// for phi(x, z) = -sqrt(x^2+1) z, x0 in [-3, 3], z in [-1, 1].
double sinh_inverse_sweep(int cases, int substeps, std::uint64_t seed);

struct RoundTrip {
  double residual = 0.0;
  double t = 0.0;
  std::size_t samples = 0;
  bool non_monotone = false;
  std::string message;
};

/// round_trip_residual at the last output time over `samples` points
/// spread over the forward endpoint range. The forward table starts from the
/// problem grid, or from problem.solver.table_grid when given.
RoundTrip round_trip_study(const Problem& problem, int samples, const InversionOptions& options);

struct Convergence {
  std::vector<double> dts;
  std::vector<double> errors;
  LinearFit fit;
  bool sufficient = false;
  double reference_dt = 0.0;
  int realizations = 0;
};

/// Mean over realizations and probe points of |X_dt(T) - X_ref(T)| for the
/// full characteristics state, on shared driver paths generated at the
/// reference step.
Convergence convergence_study(const Problem& problem, std::vector<double> ladder,
                              double reference_dt, int realizations,
                              std::vector<double> probes, int threads = 1);

struct SamplerStats {
  std::size_t n = 0;
  double gaussian_ks_p = 0.0;
  double cos_mean = 0.0;
  double cos_target = 0.0;
  double cos_tolerance = 0.0;
  double self_similarity_ks_p = 0.0;
};

/// Stable-sampler checks at sample size n: alpha = 2 against N(0, 2c)
/// (two-sample KS), the 1.75-stable characteristic function at lambda = 1
/// with scale 0.1, and the self-similarity KS test.
SamplerStats sampler_study(std::size_t n, std::uint64_t seed);

struct Linearity {
  double max_relative = 0.0;
  std::size_t compared = 0;
};

/// solve(lambda u0 + v0) against lambda solve(u0) + solve(v0) on one driver.
Linearity linearity_study(const Problem& problem, double lambda);

}  // namespace marcus
