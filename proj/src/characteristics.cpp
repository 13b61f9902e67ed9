#include "marcus/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "marcus/errors.hpp"
#include "marcus/parallel.hpp"

namespace marcus {

Vec CharacteristicState::packed() const {
  Vec X(x.size() + 2);
  X.head(x.size()) = x;
  X(x.size()) = xi;
  X(x.size() + 1) = zeta;
  return X;
}

CharacteristicState CharacteristicState::unpack(const Vec& X, double t) {
  const auto d = X.size() - 2;
  return {X.head(d), X(d), X(d + 1), t};
}

namespace {

void require_finite_state(const Vec& X, double t, const char* where) {
  if (!X.allFinite()) {
    std::ostringstream msg;
    msg << where << ": non-finite characteristics state at t=" << t;
    throw DivergenceError(msg.str());
  }
}

// Increment of the x-component over one step for the frozen point x.
Vec x_increment(const CoefficientSet& c, const Vec& x, double dt, const Vec& dW, const Vec& dZc) {
  Vec g = -c.eval_a(x) * dt;
  if (dW.size() > 0 && c.A) g -= c.eval_A(x) * dW;
  if (dZc.size() > 0 && c.alpha) g -= c.eval_alpha(x) * dZc;
  return g;
}

// (b dt + B dW + beta dZc, c dt + C dW + sigma dZc) at x.
std::pair<double, double> scalar_rates(const CoefficientSet& c, const Vec& x, double dt,
                                       const Vec& dW, const Vec& dZc) {
  double log_rate = c.eval_b(x) * dt;
  double source = c.eval_c(x) * dt;
  if (dW.size() > 0 && c.has_brownian_terms()) {
    log_rate += c.eval_B(x).dot(dW);
    source += c.eval_C(x).dot(dW);
  }
  if (dZc.size() > 0 && c.has_jump_terms()) {
    log_rate += c.eval_beta(x).dot(dZc);
    source += c.eval_sigma(x).dot(dZc);
  }
  return {log_rate, source};
}

}  // namespace

// Heun for x; xi and zeta by the trapezoidal rule along the corrected x-path,
// which keeps xi an exact exponential of its accumulated exponent.
CharacteristicState step_continuous(const CharacteristicState& state, const CoefficientSet& coeffs,
                                    double dt, const Vec& dW, const Vec& dZc) {
  if (!(dt > 0.0)) throw InputError("step_continuous: dt must be > 0");
  const Vec& x0 = state.x;
  const Vec g0 = x_increment(coeffs, x0, dt, dW, dZc);
  const Vec predictor = x0 + g0;
  require_finite_state(predictor, state.t + dt, "step_continuous");
  const Vec x1 = x0 + 0.5 * (g0 + x_increment(coeffs, predictor, dt, dW, dZc));
  const auto [l0, s0] = scalar_rates(coeffs, x0, dt, dW, dZc);
  const auto [l1, s1] = scalar_rates(coeffs, x1, dt, dW, dZc);
  CharacteristicState next;
  next.x = x1;
  next.xi = state.xi * std::exp(-0.5 * (l0 + l1));
  next.zeta = state.zeta - 0.5 * (state.xi * s0 + next.xi * s1);
  next.t = state.t + dt;
  require_finite_state(next.packed(), next.t, "step_continuous");
  return next;
}

CharacteristicState apply_jump(const CharacteristicState& state, const CoefficientSet& coeffs,
                               const Vec& z, int substeps) {
  const auto j = exp_map_structured(coeffs, state.x, state.xi, state.zeta, z, substeps);
  return {j.x, j.xi, j.zeta, state.t};
}

Vec small_jump_compensator(const CoefficientSet& coeffs, const CharacteristicState& state,
                           const LevyMeasureSpec& spec, int nodes, int substeps, double tolerance) {
  const int d = coeffs.d;
  if (spec.truncation_epsilon >= 1.0) return Vec::Zero(d + 2);  // empty band
  spec.validate(coeffs.m);
  const int m = coeffs.m;
  const Vec X = state.packed();
  const Mat S = coeffs.system_jump(X);
  const double eps = spec.truncation_epsilon;

  auto jump_defect = [&](int coord, double s) -> Vec {
    Vec z = Vec::Zero(m);
    z(coord) = s;
    const auto j = exp_map_structured(coeffs, state.x, state.xi, state.zeta, z, substeps);
    Vec after(d + 2);
    after.head(d) = j.x;
    after(d) = j.xi;
    after(d + 1) = j.zeta;
    return after - X - S * z;
  };

  Vec total = Vec::Zero(d + 2);
  if (const auto* f = std::get_if<FiniteActivity>(&spec.kind)) {
    if (m > 1) throw InputError("small_jump_compensator: compound Poisson marks need m = 1");
    if (f->intensity == 0.0) return total;
    if (f->marks.kind == MarkDistribution::Kind::constant) {
      const double c = f->marks.first;
      if (std::abs(c) > eps && std::abs(c) <= 1.0) total = f->intensity * jump_defect(0, c);
      return total;
    }
  }
  if (eps >= 1.0) return total;

  auto density = [&](double s) -> double {
    if (const auto* f = std::get_if<FiniteActivity>(&spec.kind)) {
      const auto& mk = f->marks;
      if (mk.kind == MarkDistribution::Kind::uniform)
        return (s >= mk.first && s <= mk.second) ? f->intensity / (mk.second - mk.first) : 0.0;
      const double u = (s - mk.first) / mk.second;
      return f->intensity * std::exp(-0.5 * u * u) / (mk.second * std::sqrt(2.0 * M_PI));
    }
    return levy_density(spec, s);
  };

  // Composite Simpson on [eps, 1] and [-1, -eps].
  auto simpson_band = [&](int coord, int panels) -> Vec {
    Vec acc = Vec::Zero(d + 2);
    const int n = panels + (panels % 2);
    for (double sign : {1.0, -1.0}) {
      const double h = (1.0 - eps) / n;
      for (int k = 0; k <= n; ++k) {
        const double s = sign * (eps + k * h);
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        const double rho = density(s);
        if (rho == 0.0 || s == 0.0) continue;
        acc += (w * h / 3.0 * rho) * jump_defect(coord, s);
      }
    }
    return acc;
  };

  for (int coord = 0; coord < m; ++coord) {
    const Vec coarse = simpson_band(coord, nodes);
    const Vec fine = simpson_band(coord, 2 * nodes);
    const double scale = std::max(fine.norm(), 1e-300);
    if ((fine - coarse).norm() > tolerance * scale && (fine - coarse).norm() > 1e-14)
      throw ToleranceError("small_jump_compensator: quadrature did not converge (relative change " +
                           std::to_string((fine - coarse).norm() / scale) + ")");
    total += fine;
  }
  return total;
}

Vec ito_corrected_drift(const CoefficientSet& coeffs, const CharacteristicState& state) {
  const int d = coeffs.d;
  const int n = d + 2;
  const Vec X = state.packed();
  Vec drift = coeffs.system_drift(X);
  if (!coeffs.has_brownian_terms()) return drift;
  const Mat F = coeffs.system_brownian(X);
  for (int j = 0; j < coeffs.m; ++j) {
    Mat DF(n, n);
    for (int k = 0; k < n; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(X(k)));
      Vec Xp = X;
      Vec Xm = X;
      Xp(k) += h;
      Xm(k) -= h;
      DF.col(k) = (coeffs.system_brownian(Xp).col(j) - coeffs.system_brownian(Xm).col(j)) / (2.0 * h);
    }
    if (coeffs.A) DF.topLeftCorner(d, d) = -coeffs.eval_dA(state.x, j);
    drift += 0.5 * DF * F.col(j);
  }
  return drift;
}

CharacteristicState step_ito_crosscheck(const CharacteristicState& state,
                                        const CoefficientSet& coeffs, double dt, const Vec& dW) {
  Vec X = state.packed();
  X += ito_corrected_drift(coeffs, state) * dt;
  if (coeffs.has_brownian_terms()) X += coeffs.system_brownian(state.packed()) * dW;
  require_finite_state(X, state.t + dt, "step_ito_crosscheck");
  return CharacteristicState::unpack(X, state.t + dt);
}

// ---------------------------------------------------------------------------
// ForwardFlow

ForwardFlow::ForwardFlow(std::shared_ptr<const CoefficientSet> coeffs,
                         std::shared_ptr<const DriverRealization> driver,
                         std::vector<double> output_times, IntegrationParams params)
    : coeffs_(std::move(coeffs)),
      driver_(std::move(driver)),
      output_times_(std::move(output_times)),
      params_(params) {
  if (!coeffs_ || !driver_) throw InputError("ForwardFlow: null coefficients or driver");
  if (!(params_.dt > 0.0)) throw InputError("integration dt must be > 0");
  if (params_.substeps < 1) throw InputError("substeps must be >= 1");
  if (coeffs_->m != driver_->m) throw InputError("coefficient m does not match driver m");
  if (output_times_.empty()) throw InputError("at least one output time is required");
  for (std::size_t i = 0; i < output_times_.size(); ++i) {
    if (output_times_[i] < 0.0) throw InputError("output times must be >= 0");
    if (i > 0 && !(output_times_[i] > output_times_[i - 1]))
      throw InputError("output times must be strictly increasing");
  }
  const DriverRealization& drv = *driver_;
  const double horizon = drv.horizon;
  const double tol = 1e-9 * std::max(1.0, horizon);
  const double t_end = output_times_.back();
  if (t_end > horizon + tol) throw InputError("output time beyond the driver horizon");

  // Stepping points: uniform dt grid, event times, output times.
  std::vector<double> points;
  const auto n_uniform = static_cast<std::size_t>(std::floor(t_end / params_.dt + 1e-9));
  for (std::size_t k = 0; k <= n_uniform; ++k) points.push_back(static_cast<double>(k) * params_.dt);
  std::vector<double> anchors(output_times_.begin(), output_times_.end());
  for (const auto& e : drv.jump_events)
    if (e.time <= t_end + tol) anchors.push_back(e.time);
  // Anchors replace nearby uniform points so event and output times are exact.
  std::sort(anchors.begin(), anchors.end());
  points.insert(points.end(), anchors.begin(), anchors.end());
  std::sort(points.begin(), points.end());
  std::vector<double> grid;
  for (double t : points) {
    if (t > t_end + tol) break;
    const bool is_anchor = std::binary_search(anchors.begin(), anchors.end(), t);
    if (!grid.empty() && t - grid.back() <= tol) {
      if (is_anchor) grid.back() = t;
      continue;
    }
    grid.push_back(t);
  }
  if (grid.front() != 0.0) grid.insert(grid.begin(), 0.0);

  const bool need_brownian = !drv.brownian_increments.empty() && coeffs_->has_brownian_terms();
  const bool need_substitute = !drv.small_jump_increments.empty() && coeffs_->has_jump_terms();
  auto brownian_at = [&](double t) {
    if (!need_brownian) return Vec(Vec::Zero(drv.m));
    if (drv.grid_index(t) < 0)
      throw InputError("stepping point t=" + std::to_string(t) +
                       " is not on the driver grid; generate the driver on a grid that contains "
                       "the stepping grid");
    return drv.brownian_value(t);
  };
  auto substitute_at = [&](double t) {
    if (!need_substitute) return Vec(Vec::Zero(drv.m));
    if (drv.grid_index(t) < 0)
      throw InputError("stepping point t=" + std::to_string(t) + " is not on the driver grid");
    return drv.substitute_value(t);
  };

  std::size_t next_output = 0;
  if (std::abs(output_times_.front()) <= tol) zero_output_ = 0, next_output = 1;
  std::size_t next_jump = 0;
  Vec w_prev = brownian_at(0.0);
  Vec s_prev = substitute_at(0.0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    Step step;
    step.t0 = grid[i];
    step.dt = grid[i + 1] - grid[i];
    const double t1 = grid[i + 1];
    const Vec w = brownian_at(t1);
    const Vec s = substitute_at(t1);
    if (need_brownian) step.dW = w - w_prev;
    Vec dzc = drv.drift.size() == drv.m ? Vec(drv.drift * step.dt) : Vec(Vec::Zero(drv.m));
    if (need_substitute) dzc += s - s_prev;
    if (!dzc.isZero(0.0)) step.dZc = dzc;
    w_prev = w;
    s_prev = s;
    step.jump_begin = next_jump;
    while (next_jump < drv.jump_events.size() && drv.jump_events[next_jump].time <= t1 + tol)
      ++next_jump;
    step.jump_end = next_jump;
    if (next_output < output_times_.size() && std::abs(output_times_[next_output] - t1) <= tol)
      step.output_index = static_cast<std::ptrdiff_t>(next_output++);
    steps_.push_back(std::move(step));
  }
  if (next_output != output_times_.size())
    throw InputError("output times could not be placed on the stepping grid");
}

std::vector<CharacteristicState> ForwardFlow::integrate(
    const Vec& x0, std::size_t stop_index, std::vector<CharacteristicState>* path) const {
  const CoefficientSet& c = *coeffs_;
  if (x0.size() != c.d) throw InputError("initial point has wrong dimension");
  std::vector<CharacteristicState> out;
  out.reserve(stop_index + 1);
  CharacteristicState s{x0, 1.0, 0.0, 0.0};
  if (path) path->push_back(s);
  auto guard = [&](const CharacteristicState& st) {
    if (!st.x.allFinite() || !std::isfinite(st.xi) || !std::isfinite(st.zeta) ||
        st.x.cwiseAbs().maxCoeff() > params_.domain_bound || !(st.xi > 0.0)) {
      std::ostringstream msg;
      msg << "trajectory from x0=" << x0.transpose() << " left the domain box (bound "
          << params_.domain_bound << ") or lost xi > 0 at t=" << st.t;
      throw DivergenceError(msg.str());
    }
  };
  if (zero_output_ == 0) {
    out.push_back(s);
    if (stop_index == 0) return out;
  }
  for (const auto& step : steps_) {
    const bool active = step.dt > 0.0 &&
                        (c.a || c.b || c.c || (step.dW.size() > 0) || (step.dZc.size() > 0));
    if (active) {
      try {
        s = step_continuous(s, c, step.dt, step.dW, step.dZc);
      } catch (const DivergenceError& e) {
        std::ostringstream msg;
        msg << e.what() << " (trajectory from x0=" << x0.transpose() << ")";
        throw DivergenceError(msg.str());
      }
    } else {
      s.t = step.t0 + step.dt;
    }
    if (path && active) path->push_back(s);
    guard(s);
    for (std::size_t j = step.jump_begin; j < step.jump_end; ++j) {
      s = apply_jump(s, c, driver_->jump_events[j].mark, params_.substeps);
      if (path) path->push_back(s);
      guard(s);
    }
    if (step.output_index >= 0) {
      out.push_back(s);
      if (static_cast<std::size_t>(step.output_index) == stop_index) break;
    }
  }
  return out;
}

std::vector<CharacteristicState> ForwardFlow::run(const Vec& x0,
                                                  std::vector<CharacteristicState>* path) const {
  return integrate(x0, output_times_.size() - 1, path);
}

CharacteristicState ForwardFlow::evaluate(const Vec& x0, std::size_t time_index) const {
  if (time_index >= output_times_.size()) throw InputError("time index out of range");
  return integrate(x0, time_index, nullptr).back();
}

// ---------------------------------------------------------------------------
// integrate_path

FlowSolution integrate_path(std::shared_ptr<const CoefficientSet> coeffs,
                            std::shared_ptr<const DriverRealization> driver,
                            std::vector<Vec> x0_grid, std::vector<double> output_times,
                            const IntegrationParams& params, int threads) {
  if (x0_grid.empty()) throw InputError("integrate_path: empty initial grid");
  for (const auto& x : x0_grid) coeffs->check_dimensions(x);

  FlowSolution flow;
  flow.d = coeffs->d;
  flow.scheme = {params.dt, params.substeps, driver->small_jump_mode, driver->seed,
                 driver->realization_index};
  auto forward = std::make_shared<const ForwardFlow>(coeffs, driver, std::move(output_times), params);
  flow.times = forward->output_times();
  flow.forward = forward;
  flow.initial_grid = std::move(x0_grid);

  const std::size_t n = flow.initial_grid.size();
  flow.states.resize(n);
  flow.diverged.assign(n, 0);
  flow.divergence_messages.resize(n);
  if (params.record_path) flow.paths.resize(n);

  parallel_for(n, threads, [&](std::size_t p) {
    try {
      flow.states[p] = forward->run(flow.initial_grid[p], params.record_path ? &flow.paths[p] : nullptr);
    } catch (const DivergenceError& e) {
      flow.diverged[p] = 1;
      flow.divergence_messages[p] = e.what();
      const CharacteristicState nan_state{
          Vec::Constant(flow.d, std::numeric_limits<double>::quiet_NaN()),
          std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), 0.0};
      flow.states[p].assign(flow.times.size(), nan_state);
      for (std::size_t k = 0; k < flow.times.size(); ++k) flow.states[p][k].t = flow.times[k];
    }
  });

  if (flow.d == 1) {
    for (std::size_t k = 0; k < flow.times.size(); ++k) {
      double prev = -std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < n; ++p) {
        if (flow.diverged[p]) continue;
        const double x = flow.states[p][k].x(0);
        if (!(x > prev)) {
          flow.non_monotone = true;
          flow.non_monotone_times.push_back(k);
          break;
        }
        prev = x;
      }
    }
  }
  return flow;
}

FlowSolution integrate_path(const CoefficientSet& coeffs, const DriverRealization& driver,
                            std::vector<Vec> x0_grid, std::vector<double> output_times,
                            const IntegrationParams& params, int threads) {
  return integrate_path(std::make_shared<const CoefficientSet>(coeffs),
                        std::make_shared<const DriverRealization>(driver), std::move(x0_grid),
                        std::move(output_times), params, threads);
}

// ---------------------------------------------------------------------------
// xi_closed_form_check

double xi_closed_form_check(const FlowSolution& flow) {
  if (!flow.forward) throw InputError("xi_closed_form_check: flow has no forward schedule");
  if (flow.paths.empty()) throw InputError("xi_closed_form_check: integrate with record_path = true");
  const ForwardFlow& fwd = *flow.forward;
  const CoefficientSet& c = fwd.coefficients();
  const auto& events = fwd.driver().jump_events;
  double worst = 0.0;
  for (std::size_t p = 0; p < flow.paths.size(); ++p) {
    if (flow.diverged[p]) continue;
    const auto& path = flow.paths[p];
    std::size_t i = 0;
    double exponent = 0.0;
    auto compare = [&](const CharacteristicState& s) {
      const double closed = std::exp(-exponent);
      worst = std::max(worst, std::abs(s.xi / closed - 1.0));
    };
    compare(path[i]);
    for (const auto& step : fwd.steps()) {
      if (i + 1 >= path.size()) break;
      const bool active = step.dt > 0.0 &&
                          (c.a || c.b || c.c || (step.dW.size() > 0) || (step.dZc.size() > 0));
      if (active) {
        const Vec& x0 = path[i].x;
        const Vec& x1 = path[i + 1].x;
        exponent += 0.5 * (c.eval_b(x0) + c.eval_b(x1)) * step.dt;
        if (step.dW.size() > 0) exponent += 0.5 * (c.eval_B(x0) + c.eval_B(x1)).dot(step.dW);
        if (step.dZc.size() > 0) exponent += 0.5 * (c.eval_beta(x0) + c.eval_beta(x1)).dot(step.dZc);
        ++i;
        compare(path[i]);
      }
      for (std::size_t j = step.jump_begin; j < step.jump_end && i + 1 < path.size(); ++j) {
        const auto jump = exp_map_structured(c, path[i].x, 1.0, 0.0, events[j].mark,
                                             fwd.params().substeps);
        exponent += jump.log_factor;
        ++i;
        compare(path[i]);
      }
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------

std::vector<Vec> uniform_points(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw InputError("uniform grid needs n >= 2 and hi > lo");
  std::vector<Vec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = static_cast<double>(i) / static_cast<double>(n - 1);
    out.push_back(Vec::Constant(1, i + 1 == n ? hi : lo + (hi - lo) * w));
  }
  return out;
}

std::vector<Vec> tensor_points(const Vec& lo, const Vec& hi, const std::vector<std::size_t>& shape) {
  const auto d = static_cast<std::size_t>(lo.size());
  if (hi.size() != lo.size() || shape.size() != d) throw InputError("tensor grid dimension mismatch");
  std::size_t total = 1;
  for (auto s : shape) {
    if (s < 2) throw InputError("tensor grid needs >= 2 points per axis");
    total *= s;
  }
  std::vector<Vec> out;
  out.reserve(total);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t n = 0; n < total; ++n) {
    Vec p(d);
    for (std::size_t k = 0; k < d; ++k)
      p(k) = lo(k) + (hi(k) - lo(k)) * static_cast<double>(idx[k]) / static_cast<double>(shape[k] - 1);
    out.push_back(std::move(p));
    for (std::size_t k = d; k-- > 0;) {  // last axis fastest
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

}  // namespace marcus
