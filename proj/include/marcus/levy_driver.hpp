#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "marcus/rng.hpp"

namespace marcus {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Distribution of compound-Poisson marks. Coordinates are i.i.d.
struct MarkDistribution {
  enum class Kind { uniform, normal, constant };
  Kind kind = Kind::uniform;
  double first = -1.0;   // uniform: low, normal: mean, constant: value
  double second = 1.0;   // uniform: high, normal: standard deviation

  static MarkDistribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static MarkDistribution normal(double mean, double sd) { return {Kind::normal, mean, sd}; }
  static MarkDistribution constant(double value) { return {Kind::constant, value, 0.0}; }

  double sample(Engine& rng) const;
  bool symmetric() const;
  void validate() const;
};

struct FiniteActivity {
  double intensity = 0.0;  // expected jumps per unit time
  MarkDistribution marks;
};

/// Symmetric alpha-stable with E exp(i lambda Z_1) = exp(-scale |lambda|^alpha),
/// applied independently to every coordinate.
struct AlphaStable {
  double alpha = 2.0;
  double scale = 1.0;
};

/// One-dimensional Levy density given as a piecewise-linear table.
struct TabulatedDensity {
  std::vector<double> z;
  std::vector<double> density;
};

struct LevyMeasureSpec {
  std::variant<FiniteActivity, AlphaStable, TabulatedDensity> kind;
  double truncation_epsilon = 0.0;

  bool is_finite_activity() const { return std::holds_alternative<FiniteActivity>(kind); }
  void validate(int m) const;

  /// Rate of jumps that become explicit events (norm above epsilon) per
  /// unit time, summed over coordinates for the stable case.
  double event_intensity(int m) const;
  /// Second moment per unit time of the discarded jumps |z| <= epsilon,
  /// per coordinate.
  double small_jump_variance() const;
  /// Integral of z over {epsilon < |z| <= 1}; the compensator drift of Z is
  /// its negative.
  Vec truncated_first_moment(int m) const;
};

/// Levy density of the measure at scalar z (one coordinate). Zero for the
/// finite-activity kind, which has no density representation here.
double levy_density(const LevyMeasureSpec& spec, double z);

struct JumpEvent {
  double time = 0.0;
  Vec mark;
};

enum class SmallJumpMode { drop, gaussian_substitute };

std::string to_string(SmallJumpMode mode);
SmallJumpMode small_jump_mode_from_string(const std::string& name);

/// One realized driving path on a fixed grid.
struct DriverRealization {
  double horizon = 0.0;
  int m = 1;
  std::vector<double> grid;
  std::vector<Vec> brownian_increments;
  /// Gaussian substitute for truncated small jumps; empty when not used.
  std::vector<Vec> small_jump_increments;
  std::vector<JumpEvent> jump_events;
  /// Deterministic drift of Z per unit time (compensator of small jumps).
  Vec drift;
  std::uint64_t seed = 0;
  std::uint64_t realization_index = 0;
  SmallJumpMode small_jump_mode = SmallJumpMode::drop;
  double truncation_epsilon = 0.0;
  double small_jump_variance = 0.0;

  /// Index of the grid point within tolerance of t, or -1.
  std::ptrdiff_t grid_index(double t) const;
  /// Cumulative Brownian value W_t; t must be a grid point.
  Vec brownian_value(double t) const;
  /// Cumulative Gaussian small-jump substitute at grid point t.
  Vec substitute_value(double t) const;
  /// Z_t = drift t + substitute + sum of marks with time <= t.
  Vec levy_value(double t) const;

  void build_cumulative();
  void validate() const;

 private:
  std::vector<Vec> brownian_path_;
  std::vector<Vec> substitute_path_;
};

struct DriverOptions {
  double horizon = 1.0;
  double dt = 1e-3;
  int m = 1;
  bool brownian = false;
  bool has_levy = false;
  LevyMeasureSpec levy;
  SmallJumpMode small_jump_mode = SmallJumpMode::drop;
  std::uint64_t seed = 0;
  std::uint64_t realization_index = 0;
  std::vector<double> extra_times;
};

/// Uniform grid 0, dt, 2dt, ... with T appended if not hit.
std::vector<double> uniform_time_grid(double horizon, double dt);

std::vector<Vec> sample_brownian(std::span<const double> grid, int m, Engine& rng);

std::vector<JumpEvent> sample_compound_poisson(const LevyMeasureSpec& spec, double horizon, int m,
                                               Engine& rng);

/// Events of norm above epsilon from a stable or tabulated measure.
std::vector<JumpEvent> sample_truncated_jumps(const LevyMeasureSpec& spec, double horizon, int m,
                                              Engine& rng);

/// One unit-scale symmetric stable variate (characteristic function
/// exp(-|lambda|^alpha)) by the Chambers-Mallows-Stuck transform.
double standard_symmetric_stable(double alpha, Engine& rng);

/// Per-interval increments of a scalar symmetric stable process.
std::vector<double> sample_stable_path(double alpha, double scale, std::span<const double> grid,
                                       Engine& rng);

std::pair<std::vector<JumpEvent>, std::vector<JumpEvent>> decompose_events(
    const std::vector<JumpEvent>& events, double threshold = 1.0);

/// Full realization: jumps, grid with event and extra times inserted,
/// Brownian and small-jump increments.
DriverRealization generate_driver(const DriverOptions& options);

/// Hand-built pure-jump driver without Brownian part.
DriverRealization make_driver(double horizon, std::vector<double> grid, int m,
                              std::vector<JumpEvent> events);

}  // namespace marcus
