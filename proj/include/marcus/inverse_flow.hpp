#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "marcus/characteristics.hpp"

namespace marcus {

struct InverseFlowQuery {
  std::size_t time_index = 0;
  Vec x;
};

/// phi_{t,0}(x), xi_{t,0}(x, 1) = 1 / E_t(y) and zeta_{t,0}(x, 1, 0) = I_t(y) / E_t(y).
struct InverseCoefficients {
  Vec y;
  double xi_inv = 1.0;
  double zeta_inv = 0.0;
  /// |phi_{0,t}(y) - x| as measured by the polishing route.
  double residual = 0.0;
  int iterations = 0;
};

enum class InversionMode {
  /// Table seed, then Newton iterations on re-integrated trajectories.
  shooting,
  /// Monotone cubic inverse table plus Newton polish against the linear
  /// interpolant of the forward table; E, I interpolated linearly.
  table,
};

struct InversionOptions {
  InversionMode mode = InversionMode::shooting;
  /// Absolute tolerance on |phi_{0,t}(y) - x| (scaled by max(1, |x|)).
  double tolerance = 1e-9;
  int max_iter = 50;
};

/// Inverse of the d = 1 forward table at one output time. Construction
/// validates monotonicity and builds the interpolants once.
class InverseTable1D {
 public:
  InverseTable1D(const FlowSolution& flow, std::size_t time_index);

  InverseCoefficients invert(double x, const InversionOptions& options = {}) const;
  double x_min() const { return forward_x_.front(); }
  double x_max() const { return forward_x_.back(); }

 private:
  InverseCoefficients invert_table(double x, const InversionOptions& options) const;
  double seed(double x) const;
  double forward_slope(double y) const;

  const FlowSolution* flow_;
  std::size_t time_index_;
  std::vector<double> initial_y_;
  std::vector<double> forward_x_;
  std::vector<double> e_;
  std::vector<double> i_;
  struct Interpolants;
  std::shared_ptr<const Interpolants> interp_;
};

InverseCoefficients invert_1d(const FlowSolution& flow, const InverseFlowQuery& query,
                              const InversionOptions& options = {});

/// Newton iteration for d <= 3 seeded at the nearest forward endpoint, with
/// the Jacobian from central differences over the tensor initial grid and
/// function values from re-integrated trajectories.
InverseCoefficients invert_nd(const FlowSolution& flow, const InverseFlowQuery& query,
                              int max_iter = 50, double tol = 1e-9);

/// max over samples of |phi_{0,t}(phi_{t,0}(x)) - x|, with the forward map
/// evaluated by re-integrating the trajectory from the inverted point.
double round_trip_residual(const FlowSolution& flow, std::size_t time_index,
                           const std::vector<Vec>& samples, const InversionOptions& options = {});

}  // namespace marcus
