#include "marcus/spde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "marcus/errors.hpp"
#include "marcus/parallel.hpp"

namespace marcus {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Grids and fields

SpatialGrid SpatialGrid::uniform(double lo, double hi, std::size_t n) {
  SpatialGrid g;
  g.points = uniform_points(lo, hi, n);
  g.shape = {n};
  g.lo = Vec::Constant(1, lo);
  g.hi = Vec::Constant(1, hi);
  return g;
}

SpatialGrid SpatialGrid::tensor(const Vec& lo, const Vec& hi, const std::vector<std::size_t>& shape) {
  SpatialGrid g;
  g.points = tensor_points(lo, hi, shape);
  g.shape = shape;
  g.lo = lo;
  g.hi = hi;
  return g;
}

SpatialGrid SpatialGrid::asinh_uniform(double lo_s, double hi_s, std::size_t n) {
  std::vector<double> v;
  for (const auto& s : uniform_points(lo_s, hi_s, n)) v.push_back(std::sinh(s(0)));
  return from_values(v);
}

SpatialGrid SpatialGrid::from_values(const std::vector<double>& values) {
  if (values.empty()) throw InputError("spatial grid needs at least one point");
  SpatialGrid g;
  for (double v : values) g.points.push_back(Vec::Constant(1, v));
  g.shape = {values.size()};
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  g.lo = Vec::Constant(1, *mn);
  g.hi = Vec::Constant(1, *mx);
  return g;
}

std::string to_string(PointFlag flag) {
  switch (flag) {
    case PointFlag::ok: return "ok";
    case PointFlag::out_of_range: return "out_of_range";
    case PointFlag::diverged: return "diverged";
    case PointFlag::non_monotone: return "non_monotone";
    case PointFlag::no_convergence: return "no_convergence";
  }
  return "unknown";
}

std::size_t SolutionField::flagged_count() const {
  std::size_t n = 0;
  for (const auto& row : flags)
    for (auto f : row) n += f != PointFlag::ok;
  return n;
}

double SolutionField::flagged_fraction() const {
  const std::size_t total = times.size() * grid.size();
  return total ? static_cast<double>(flagged_count()) / static_cast<double>(total) : 0.0;
}

// ---------------------------------------------------------------------------
// solve

namespace {

class MessageLog {
 public:
  void add(const std::string& msg) {
    std::lock_guard lock(mutex_);
    if (seen_.size() < 64) seen_.insert(msg);
  }
  std::vector<std::string> lines() const { return {seen_.begin(), seen_.end()}; }

 private:
  std::mutex mutex_;
  std::set<std::string> seen_;
};

// Table coverage of [lo, hi] by the valid forward endpoints at every time.
bool covers(const FlowSolution& flow, const Vec& lo, const Vec& hi) {
  for (std::size_t k = 0; k < flow.times.size(); ++k) {
    Vec mn = Vec::Constant(flow.d, std::numeric_limits<double>::infinity());
    Vec mx = -mn;
    for (std::size_t p = 0; p < flow.point_count(); ++p) {
      if (flow.diverged[p]) continue;
      mn = mn.cwiseMin(flow.states[p][k].x);
      mx = mx.cwiseMax(flow.states[p][k].x);
    }
    if ((mn.array() > lo.array()).any() || (mx.array() < hi.array()).any()) return false;
  }
  return true;
}

bool any_diverged(const FlowSolution& flow) {
  return std::any_of(flow.diverged.begin(), flow.diverged.end(), [](auto v) { return v != 0; });
}

}  // namespace

SolutionField solve(std::shared_ptr<const CoefficientSet> coeffs,
                    std::shared_ptr<const DriverRealization> driver, const InitialCondition& u0,
                    const std::vector<double>& times, const SpatialGrid& grid,
                    const SolverParams& params) {
  if (!coeffs || !driver) throw InputError("solve: coefficients and driver are required");
  if (!u0.u0) throw InputError("solve: initial condition is not set");
  if (grid.size() == 0) throw InputError("solve: empty spatial grid");
  const int d = coeffs->d;
  if (grid.dimension() != d) throw InputError("solve: grid dimension does not match coefficients");
  if (d > 1 && grid.shape.size() != static_cast<std::size_t>(d))
    throw InputError("solve: d > 1 needs a tensor grid");
  if (d > 3) throw InputError("solve: d <= 3 supported");
  driver->validate();

  SolutionField field;
  field.times = times;
  field.grid = grid;
  field.values.assign(times.size(), std::vector<double>(grid.size(), kNaN));
  field.flags.assign(times.size(), std::vector<PointFlag>(grid.size(), PointFlag::ok));
  auto& prov = field.provenance;
  prov.seed = driver->seed;
  prov.realization_index = driver->realization_index;
  prov.dt = params.integration.dt;
  prov.substeps = params.integration.substeps;
  prov.small_jump_mode = driver->small_jump_mode;
  prov.scheme = "heun-stratonovich+rk4-exp-map";
  prov.inversion = params.inversion.mode == InversionMode::shooting ? "shooting" : "table";

  // Forward table from an initial grid whose image covers the output box.
  FlowSolution flow;
  IntegrationParams ip = params.integration;
  ip.record_path = false;
  if (d == 1 && !params.table_grid.empty()) {
    std::vector<Vec> pts;
    for (double v : params.table_grid) pts.push_back(Vec::Constant(1, v));
    flow = integrate_path(coeffs, driver, pts, times, ip, params.threads);
    const auto [mn, mx] = std::minmax_element(params.table_grid.begin(), params.table_grid.end());
    prov.table_lo = *mn;
    prov.table_hi = *mx;
    prov.table_points = pts.size();
  } else {
    const Vec width = (grid.hi - grid.lo).cwiseMax(1e-6);
    double margin = params.table_margin;
    std::vector<std::size_t> shape = grid.shape;
    if (d == 1) {
      const std::size_t n = params.table_points ? params.table_points : 2 * grid.size();
      shape = {std::max<std::size_t>(n, 16)};
    }
    for (int attempt = 0;; ++attempt) {
      const Vec lo = grid.lo - margin * width;
      const Vec hi = grid.hi + margin * width;
      flow = integrate_path(coeffs, driver, tensor_points(lo, hi, shape), times, ip, params.threads);
      flow.grid_shape = shape;
      prov.table_lo = lo(0);
      prov.table_hi = hi(0);
      prov.table_points = flow.point_count();
      if (attempt >= params.max_widenings || covers(flow, grid.lo, grid.hi) || any_diverged(flow))
        break;
      margin = 2.0 * margin + 0.5;
    }
  }

  MessageLog log;
  for (std::size_t p = 0; p < flow.point_count(); ++p)
    if (flow.diverged[p]) log.add(flow.divergence_messages[p]);

  auto evaluate = [&](std::size_t k, std::size_t p, const InverseCoefficients& inv) {
    const double value = inv.xi_inv * u0(inv.y) + inv.zeta_inv;
    if (!std::isfinite(value)) {
      field.flags[k][p] = PointFlag::diverged;
      return;
    }
    field.values[k][p] = value;
  };
  auto flag = [&](std::size_t k, std::size_t p, PointFlag f, const std::string& msg) {
    field.flags[k][p] = f;
    field.values[k][p] = kNaN;
    log.add(msg);
  };

  const std::size_t n_times = times.size();
  const std::size_t n_points = grid.size();
  if (d == 1) {
    std::vector<std::shared_ptr<const InverseTable1D>> tables(n_times);
    for (std::size_t k = 0; k < n_times; ++k) {
      try {
        tables[k] = std::make_shared<const InverseTable1D>(flow, k);
      } catch (const DiffeomorphismError& e) {
        for (std::size_t p = 0; p < n_points; ++p) flag(k, p, PointFlag::non_monotone, e.what());
      }
    }
    parallel_for(n_times * n_points, params.threads, [&](std::size_t q) {
      const std::size_t k = q / n_points;
      const std::size_t p = q % n_points;
      if (!tables[k]) return;
      try {
        evaluate(k, p, tables[k]->invert(grid.points[p](0), params.inversion));
      } catch (const RangeError& e) {
        flag(k, p, PointFlag::out_of_range, e.what());
      } catch (const DivergenceError& e) {
        flag(k, p, PointFlag::diverged, e.what());
      } catch (const IterationError& e) {
        flag(k, p, PointFlag::no_convergence, e.what());
      }
    });
  } else {
    parallel_for(n_times * n_points, params.threads, [&](std::size_t q) {
      const std::size_t k = q / n_points;
      const std::size_t p = q % n_points;
      try {
        evaluate(k, p,
                 invert_nd(flow, {k, grid.points[p]}, params.inversion.max_iter,
                           params.inversion.tolerance));
      } catch (const RangeError& e) {
        flag(k, p, PointFlag::out_of_range, e.what());
      } catch (const DivergenceError& e) {
        flag(k, p, PointFlag::diverged, e.what());
      } catch (const IterationError& e) {
        flag(k, p, PointFlag::no_convergence, e.what());
      } catch (const ConditioningError& e) {
        flag(k, p, PointFlag::no_convergence, e.what());
      }
    });
  }
  field.messages = log.lines();
  return field;
}

// ---------------------------------------------------------------------------
// Deterministic reference

double deterministic_solution(const CoefficientSet& coeffs, const InitialCondition& u0, double t,
                              const Vec& x, int steps) {
  if (!coeffs.noise_free())
    throw InputError("deterministic_solution needs A = B = C = alpha = beta = sigma = 0");
  if (t < 0.0) throw InputError("deterministic_solution: t must be >= 0");
  if (steps < 1) throw InputError("deterministic_solution: steps must be >= 1");
  const int d = coeffs.d;
  // State (psi, P, Q).
  auto rhs = [&](const Vec& s) {
    const Vec psi = s.head(d);
    Vec out(d + 2);
    out.head(d) = coeffs.eval_a(psi);
    out(d) = coeffs.eval_b(psi);
    out(d + 1) = std::exp(s(d)) * coeffs.eval_c(psi);
    return out;
  };
  Vec s = Vec::Zero(d + 2);
  s.head(d) = x;
  const double h = t / steps;
  if (t > 0.0) {
    for (int k = 0; k < steps; ++k) {
      const Vec k1 = rhs(s);
      const Vec k2 = rhs(s + 0.5 * h * k1);
      const Vec k3 = rhs(s + 0.5 * h * k2);
      const Vec k4 = rhs(s + h * k3);
      s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!s.allFinite()) {
        std::ostringstream msg;
        msg << "deterministic characteristics diverged at step " << k + 1 << "/" << steps;
        throw DivergenceError(msg.str());
      }
    }
  }
  return std::exp(s(d)) * u0(s.head(d)) + s(d + 1);
}

// ---------------------------------------------------------------------------
// H-transform

HTransform::HTransform(std::function<double(double)> alpha, double lo, double hi, double anchor)
    : alpha_(std::move(alpha)), lo_(lo), hi_(hi), anchor_(anchor) {
  if (!alpha_) throw InputError("HTransform: alpha is not set");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw InputError("HTransform: domain must be a finite interval lo < hi");
  if (!(anchor >= lo && anchor <= hi)) throw InputError("HTransform: anchor outside the domain");
  for (int k = 0; k <= 64; ++k) {
    const double x = lo + (hi - lo) * k / 64.0;
    if (!(alpha_(x) > 0.0)) {
      std::ostringstream msg;
      msg << "HTransform: alpha must be > 0 on the domain, alpha(" << x << ") = " << alpha_(x);
      throw InputError(msg.str());
    }
  }
  h_lo_ = H(lo);
  h_hi_ = H(hi);
}

HTransform HTransform::sinh_example() {
  HTransform h;
  h.alpha_ = [](double x) { return std::sqrt(x * x + 1.0); };
  h.lo_ = -std::numeric_limits<double>::infinity();
  h.hi_ = std::numeric_limits<double>::infinity();
  h.h_lo_ = h.lo_;
  h.h_hi_ = h.hi_;
  h.closed_form_ = true;
  return h;
}

double HTransform::H(double x) const {
  if (closed_form_) return std::asinh(x);
  if (!(x >= lo_ && x <= hi_)) {
    std::ostringstream msg;
    msg << "H: x=" << x << " outside the domain [" << lo_ << ", " << hi_ << "]";
    throw RangeError(msg.str());
  }
  if (x == anchor_) return 0.0;
  auto f = [&](double y) { return 1.0 / alpha_(y); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, anchor_, x, 15, 1e-12);
}

double HTransform::inverse(double v) const {
  if (closed_form_) {
    const double x = std::sinh(v);
    if (!std::isfinite(x)) throw RangeError("H^{-1}: sinh overflow");
    return x;
  }
  if (!(v >= h_lo_ && v <= h_hi_)) {
    std::ostringstream msg;
    msg << "H^{-1}: target " << v << " outside the range [" << h_lo_ << ", " << h_hi_
        << "] of H on the domain";
    throw RangeError(msg.str());
  }
  // H is increasing; keep a bracket [a, b] and fall back to bisection
  // whenever a Newton step leaves it.
  double a = lo_;
  double b = hi_;
  double x = std::clamp(anchor_ + v * alpha_(anchor_), a, b);
  const double tol = 1e-14 * std::max(1.0, std::abs(v));
  for (int it = 0; it < 200; ++it) {
    const double r = H(x) - v;
    if (std::abs(r) <= tol) return x;
    if (r > 0.0)
      b = x;
    else
      a = x;
    double next = x - r * alpha_(x);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)))
      return next;
    x = next;
  }
  throw IterationError("H^{-1}: no convergence");
}

double h_transform_solution(const HTransform& h, const std::function<double(double)>& u0, double x,
                            double z) {
  return u0(h.inverse(h.H(x) + z));
}

// ---------------------------------------------------------------------------
// Oracles

double OracleSpec::path_value(double t) const {
  if (path) return path(t);
  if (!driver) throw InputError("oracle: no driver or path supplied");
  if (driver->m != 1) throw InputError("oracle: path oracles need m = 1");
  double z = drift_weight * t;
  if (brownian_weight != 0.0) z += brownian_weight * driver->brownian_value(t)(0);
  if (levy_weight != 0.0) z += levy_weight * driver->levy_value(t)(0);
  return z;
}

std::vector<std::vector<double>> evaluate_oracle(const OracleSpec& oracle,
                                                 const std::vector<double>& times,
                                                 const SpatialGrid& grid) {
  if (!oracle.u0.u0) throw InputError("oracle: initial condition is not set");
  std::vector<std::vector<double>> out(times.size(), std::vector<double>(grid.size(), kNaN));
  if (oracle.kind == OracleSpec::Kind::deterministic) {
    if (!oracle.coeffs) throw InputError("deterministic oracle needs coefficients");
    for (std::size_t k = 0; k < times.size(); ++k)
      for (std::size_t p = 0; p < grid.size(); ++p)
        out[k][p] = deterministic_solution(*oracle.coeffs, oracle.u0, times[k], grid.points[p],
                                           oracle.deterministic_steps);
    return out;
  }
  if (grid.dimension() != 1) throw InputError("H-transform oracles need d = 1");
  const HTransform h = oracle.kind == OracleSpec::Kind::sinh_example
                           ? HTransform::sinh_example()
                           : HTransform(oracle.alpha, oracle.domain_lo, oracle.domain_hi,
                                        oracle.anchor);
  auto u0 = [&](double y) { return oracle.u0(Vec::Constant(1, y)); };
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double z = oracle.path_value(times[k]);
    for (std::size_t p = 0; p < grid.size(); ++p) {
      try {
        out[k][p] = h_transform_solution(h, u0, grid.points[p](0), z);
      } catch (const RangeError&) {
        out[k][p] = kNaN;
      }
    }
  }
  return out;
}

OracleReport compare_values(const SolutionField& field,
                            const std::vector<std::vector<double>>& reference) {
  if (reference.size() != field.times.size())
    throw InputError("oracle_compare: time lists differ");
  OracleReport report;
  double sq_total = 0.0;
  for (std::size_t k = 0; k < field.times.size(); ++k) {
    if (reference[k].size() != field.grid.size())
      throw InputError("oracle_compare: spatial grids differ");
    OracleTimeRow row;
    row.t = field.times[k];
    double sq = 0.0;
    for (std::size_t p = 0; p < field.grid.size(); ++p) {
      const double u = field.values[k][p];
      const double ref = reference[k][p];
      if (field.flags[k][p] != PointFlag::ok || !std::isfinite(u) || !std::isfinite(ref)) {
        ++row.flagged;
        continue;
      }
      const double e = std::abs(u - ref);
      sq += e * e;
      row.max_abs = std::max(row.max_abs, e);
      ++row.valid;
    }
    row.rmse = row.valid ? std::sqrt(sq / static_cast<double>(row.valid)) : kNaN;
    sq_total += sq;
    report.valid += row.valid;
    report.flagged += row.flagged;
    report.max_abs = std::max(report.max_abs, row.max_abs);
    report.per_time.push_back(row);
  }
  report.rmse = report.valid ? std::sqrt(sq_total / static_cast<double>(report.valid)) : kNaN;
  const std::size_t total = report.valid + report.flagged;
  report.flagged_fraction = total ? static_cast<double>(report.flagged) / static_cast<double>(total) : 0.0;
  return report;
}

OracleReport oracle_compare(const SolutionField& field, const OracleSpec& oracle) {
  if (oracle.kind != OracleSpec::Kind::deterministic && oracle.driver && !oracle.path) {
    const auto& f = field.provenance;
    if (oracle.driver->seed != f.seed || oracle.driver->realization_index != f.realization_index)
      throw InputError("oracle_compare: oracle driver is not the realization used for the field");
  }
  return compare_values(field, evaluate_oracle(oracle, field.times, field.grid));
}

}  // namespace marcus
