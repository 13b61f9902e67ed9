#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "marcus/config.hpp"
#include "marcus/spde_solver.hpp"

namespace marcus {

/// Everything needed to run one problem end to end.
struct Problem {
  std::string name;
  std::shared_ptr<const CoefficientSet> coeffs;
  InitialCondition u0;
  DriverOptions driver;
  /// Sample Z at the output times directly from the stable law instead of
  /// simulating jump events (closed-form oracles only).
  bool direct_stable_path = false;
  SpatialGrid grid;
  /// Automatic asinh-spaced grid whose range follows the sampled path.
  bool auto_grid = false;
  std::vector<double> times;
  SolverParams solver;

  enum class OracleKind { none, deterministic, h_transform, sinh_example };
  OracleKind oracle = OracleKind::none;
  std::function<double(double)> oracle_alpha;
  double oracle_domain_lo = -1e6;
  double oracle_domain_hi = 1e6;
  double oracle_anchor = 0.0;
  double oracle_drift_weight = 0.0;
  double oracle_brownian_weight = 0.0;

  /// Source text of every coefficient, for reports.
  std::map<std::string, std::string> sources;
};

/// Preset names and one-line descriptions.
std::vector<std::pair<std::string, std::string>> preset_catalog();

/// Throws InputError for unknown names. Aliases: identity -> zero,
/// deterministic/zero-noise -> smooth-deterministic, linear-A -> linear,
/// sinh/sinh-transport/pure-transport -> sinh-example.
Problem make_preset(const std::string& name);

/// Keys accepted in configuration files.
const Config::Schema& config_schema();

struct OutputOptions {
  std::string dir = "out";
  bool field = true;
  bool driver = true;
  bool trajectories = false;
  bool report = true;
};

/// Thresholds for the checks a subcommand evaluates.
struct CheckOptions {
  double rmse_max = 5e-3;
  double max_abs_max = 1e-6;       // deterministic oracle comparisons
  double residual_max = 1e-3;      // round-trip flow identity
  double exp_map_residual_max = 1e-8;
  double slope_min = 0.45;
  double slope_max = 1e300;
  double r2_min = 0.9;
  std::vector<double> dt_ladder;   // empty: 2^-6 ... 2^-12
  double reference_dt = 0.0;       // 0: 2^-16
  int realizations = 32;
  std::vector<double> probe_points;  // initial points for convergence studies
  int samples = 101;                 // round-trip sample count
  int exp_map_cases = 100;
};

struct RunConfig {
  Problem problem;
  OutputOptions output;
  CheckOptions checks;
  Config raw;
};

/// Applies a validated configuration on top of its preset (`problem.preset`,
/// overridden by `preset_override` when non-empty).
RunConfig build_run_config(const Config& config, const std::string& preset_override = {});

/// 1D coefficient set from expression strings; empty strings mean zero.
std::shared_ptr<CoefficientSet> coefficients_from_expressions(
    const std::map<std::string, std::string>& sources);

/// Oracle wired to `driver` (or to `stable_path` when non-empty: values at
/// problem.times).
OracleSpec make_oracle(const Problem& problem, std::shared_ptr<const DriverRealization> driver,
                       const std::vector<double>& stable_path = {});

}  // namespace marcus
