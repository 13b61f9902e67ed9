#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "marcus/coefficients.hpp"
#include "marcus/levy_driver.hpp"
#include "marcus/marcus_exp.hpp"

namespace marcus {

/// State (phi, xi, zeta) of the characteristics system at time t.
struct CharacteristicState {
  Vec x;
  double xi = 1.0;
  double zeta = 0.0;
  double t = 0.0;

  Vec packed() const;
  static CharacteristicState unpack(const Vec& X, double t);
};

/// One step of the Stratonovich system
///   dX = f(X) dt + F(X) o dW + Sigma(X) o dZc
/// where dZc is the continuous part of the Levy driver over the step
/// (compensator drift plus Gaussian small-jump substitute). Heun
/// predictor-corrector for x; the exponent of xi and the zeta source use the
/// trapezoidal rule between the old and the corrected x.
CharacteristicState step_continuous(const CharacteristicState& state, const CoefficientSet& coeffs,
                                    double dt, const Vec& dW, const Vec& dZc = Vec());

/// Applies the Marcus jump exp(Sigma z); time is unchanged.
CharacteristicState apply_jump(const CharacteristicState& state, const CoefficientSet& coeffs,
                               const Vec& z, int substeps = kDefaultSubsteps);

/// Quadrature of int_{eps < |z| <= 1} (exp(Sigma z)(X) - X - Sigma(X) z) nu(dz),
/// the jump correction in the Ito form of the characteristics drift.
/// Coordinates of z are integrated separately (measures are supported on axes).
Vec small_jump_compensator(const CoefficientSet& coeffs, const CharacteristicState& state,
                           const LevyMeasureSpec& spec, int nodes = 400,
                           int substeps = kDefaultSubsteps, double tolerance = 1e-6);

/// f + 1/2 sum_j DF_j F_j: the Ito drift equivalent to the Stratonovich system.
Vec ito_corrected_drift(const CoefficientSet& coeffs, const CharacteristicState& state);

/// Euler-Maruyama step of the Ito form (cross-check route for step_continuous).
CharacteristicState step_ito_crosscheck(const CharacteristicState& state,
                                        const CoefficientSet& coeffs, double dt, const Vec& dW);

struct IntegrationParams {
  double dt = 1e-3;
  int substeps = kDefaultSubsteps;
  /// Trajectories leaving [-bound, bound]^d are flagged as diverged.
  double domain_bound = 1e8;
  bool record_path = false;
};

struct SchemeInfo {
  double dt = 0.0;
  int substeps = 0;
  SmallJumpMode small_jump_mode = SmallJumpMode::drop;
  std::uint64_t seed = 0;
  std::uint64_t realization_index = 0;
};

/// Precomputed stepping schedule for one (coefficients, driver, output times)
/// triple; integrates single trajectories from arbitrary initial points.
class ForwardFlow {
 public:
  struct Step {
    double t0 = 0.0;
    double dt = 0.0;
    Vec dW;
    Vec dZc;
    std::size_t jump_begin = 0;
    std::size_t jump_end = 0;
    std::ptrdiff_t output_index = -1;
  };

  ForwardFlow(std::shared_ptr<const CoefficientSet> coeffs,
              std::shared_ptr<const DriverRealization> driver, std::vector<double> output_times,
              IntegrationParams params);

  /// States at every output time. With `path`, also every intermediate
  /// state: the initial one, then one per continuous step and per jump.
  std::vector<CharacteristicState> run(const Vec& x0,
                                       std::vector<CharacteristicState>* path = nullptr) const;
  /// State at output time `time_index`, stopping there.
  CharacteristicState evaluate(const Vec& x0, std::size_t time_index) const;

  const std::vector<double>& output_times() const { return output_times_; }
  const std::vector<Step>& steps() const { return steps_; }
  const CoefficientSet& coefficients() const { return *coeffs_; }
  const DriverRealization& driver() const { return *driver_; }
  const IntegrationParams& params() const { return params_; }
  bool has_time_zero_output() const { return zero_output_ >= 0; }

 private:
  std::vector<CharacteristicState> integrate(const Vec& x0, std::size_t stop_index,
                                             std::vector<CharacteristicState>* path) const;

  std::shared_ptr<const CoefficientSet> coeffs_;
  std::shared_ptr<const DriverRealization> driver_;
  std::vector<double> output_times_;
  IntegrationParams params_;
  std::vector<Step> steps_;
  std::ptrdiff_t zero_output_ = -1;
};

/// Forward characteristics from a grid of initial points. Integration starts
/// from xi = 1, zeta = 0, so E_t(y) = xi and I_t(y) = -zeta.
struct FlowSolution {
  int d = 1;
  std::vector<Vec> initial_grid;
  /// Points per axis when initial_grid is a row-major tensor grid (d > 1).
  std::vector<std::size_t> grid_shape;
  std::vector<double> times;
  std::vector<std::vector<CharacteristicState>> states;  // [point][time]
  std::vector<std::vector<CharacteristicState>> paths;   // [point][entry], optional
  std::vector<std::uint8_t> diverged;
  std::vector<std::string> divergence_messages;
  bool non_monotone = false;
  std::vector<std::size_t> non_monotone_times;
  SchemeInfo scheme;
  std::shared_ptr<const ForwardFlow> forward;

  double E(std::size_t point, std::size_t time) const { return states[point][time].xi; }
  double I(std::size_t point, std::size_t time) const { return -states[point][time].zeta; }
  std::size_t point_count() const { return initial_grid.size(); }
};

FlowSolution integrate_path(std::shared_ptr<const CoefficientSet> coeffs,
                            std::shared_ptr<const DriverRealization> driver,
                            std::vector<Vec> x0_grid, std::vector<double> output_times,
                            const IntegrationParams& params, int threads = 1);

FlowSolution integrate_path(const CoefficientSet& coeffs, const DriverRealization& driver,
                            std::vector<Vec> x0_grid, std::vector<double> output_times,
                            const IntegrationParams& params, int threads = 1);

/// Recomputes xi along each recorded path as
///   exp(-int b dr - int B o dW - int beta <> dZ)
/// (trapezoidal sums between steps, the exp-map quadrature at jumps) and
/// returns max |xi_integrated / xi_exponential - 1|. Needs record_path.
double xi_closed_form_check(const FlowSolution& flow);

/// Grid helpers.
std::vector<Vec> uniform_points(double lo, double hi, std::size_t n);
/// Row-major tensor grid over per-axis uniform grids.
std::vector<Vec> tensor_points(const Vec& lo, const Vec& hi, const std::vector<std::size_t>& shape);

}  // namespace marcus
