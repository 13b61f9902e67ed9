#include "marcus/inverse_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

// pchip.hpp in Boost 1.74 calls isnan unqualified; math.h puts it in scope.
#include <math.h>

#include <boost/math/interpolators/pchip.hpp>

#include "marcus/errors.hpp"

namespace marcus {

namespace {

using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

// Monotone interpolant that falls back to linear for fewer than 4 nodes.
class MonotoneCurve {
 public:
  MonotoneCurve(std::vector<double> x, std::vector<double> y) : x_(x), y_(y) {
    if (x.size() >= 4) pchip_.emplace(std::move(x), std::move(y));
  }
  double operator()(double t) const {
    if (pchip_) return (*pchip_)(t);
    const std::size_t k = cell(t);
    const double w = (t - x_[k]) / (x_[k + 1] - x_[k]);
    return (1.0 - w) * y_[k] + w * y_[k + 1];
  }
  double prime(double t) const {
    if (pchip_) return pchip_->prime(t);
    const std::size_t k = cell(t);
    return (y_[k + 1] - y_[k]) / (x_[k + 1] - x_[k]);
  }

 private:
  std::size_t cell(double t) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - x_.begin()));
    return std::min(k, x_.size() - 1) - 1;
  }

  std::vector<double> x_;
  std::vector<double> y_;
  std::optional<Pchip> pchip_;
};

double scaled_tolerance(double tol, double x) { return tol * std::max(1.0, std::abs(x)); }

}  // namespace

struct InverseTable1D::Interpolants {
  MonotoneCurve inverse;  // forward x -> initial y
  MonotoneCurve forward;  // initial y -> forward x
};

InverseTable1D::InverseTable1D(const FlowSolution& flow, std::size_t time_index)
    : flow_(&flow), time_index_(time_index) {
  if (flow.d != 1) throw InputError("InverseTable1D needs d = 1");
  if (time_index >= flow.times.size()) throw InputError("inverse query time index out of range");
  for (std::size_t p = 0; p < flow.point_count(); ++p) {
    if (flow.diverged[p]) continue;
    const double y = flow.initial_grid[p](0);
    const double x = flow.states[p][time_index].x(0);
    if (!initial_y_.empty() && !(y > initial_y_.back()))
      throw DiffeomorphismError(
          "initial grid is not strictly increasing at index " + std::to_string(p) +
          "; the forward table cannot represent a diffeomorphism (refine or sort the grid)");
    if (!forward_x_.empty() && !(x > forward_x_.back())) {
      std::ostringstream msg;
      msg << "forward endpoints not strictly increasing at t=" << flow.times[time_index]
          << " near initial point " << y
          << "; diffeomorphism violated, refine the initial grid or the time step";
      throw DiffeomorphismError(msg.str());
    }
    initial_y_.push_back(y);
    forward_x_.push_back(x);
    e_.push_back(flow.E(p, time_index));
    i_.push_back(flow.I(p, time_index));
  }
  if (initial_y_.size() < 2) throw InputError("inverse table needs at least two valid points");
  interp_ = std::make_shared<const Interpolants>(
      Interpolants{MonotoneCurve(forward_x_, initial_y_), MonotoneCurve(initial_y_, forward_x_)});
}

double InverseTable1D::seed(double x) const { return interp_->inverse(x); }

double InverseTable1D::forward_slope(double y) const {
  const double s = interp_->forward.prime(std::clamp(y, initial_y_.front(), initial_y_.back()));
  if (s > 0.0 && std::isfinite(s)) return s;
  // pchip can flatten at extrema of the data; fall back to the secant slope.
  return (forward_x_.back() - forward_x_.front()) / (initial_y_.back() - initial_y_.front());
}

InverseCoefficients InverseTable1D::invert(double x, const InversionOptions& options) const {
  if (!(x >= x_min() && x <= x_max())) {
    std::ostringstream msg;
    msg << "inverse query x=" << x << " outside the forward endpoint range [" << x_min() << ", "
        << x_max() << "] at t=" << flow_->times[time_index_] << " (extrapolation refused)";
    throw RangeError(msg.str());
  }
  if (options.mode == InversionMode::table || !flow_->forward) return invert_table(x, options);

  const ForwardFlow& fwd = *flow_->forward;
  const double tol = scaled_tolerance(options.tolerance, x);
  double y = seed(x);
  double slope = forward_slope(y);
  double prev_y = 0.0;
  double prev_r = 0.0;
  bool have_prev = false;
  InverseCoefficients out;
  for (int it = 1; it <= options.max_iter; ++it) {
    const auto state = fwd.evaluate(Vec::Constant(1, y), time_index_);
    const double r = state.x(0) - x;
    if (std::abs(r) <= tol) {
      out.y = Vec::Constant(1, y);
      out.xi_inv = 1.0 / state.xi;
      out.zeta_inv = -state.zeta / state.xi;
      out.residual = std::abs(r);
      out.iterations = it;
      return out;
    }
    if (have_prev && y != prev_y) {
      const double secant = (r - prev_r) / (y - prev_y);
      if (secant > 0.0 && std::isfinite(secant)) slope = secant;
    }
    prev_y = y;
    prev_r = r;
    have_prev = true;
    y -= r / slope;
  }
  std::ostringstream msg;
  msg << "inverse flow Newton iteration did not converge for x=" << x << " after "
      << options.max_iter << " iterations";
  throw IterationError(msg.str());
}

InverseCoefficients InverseTable1D::invert_table(double x, const InversionOptions& options) const {
  double y = std::clamp(seed(x), initial_y_.front(), initial_y_.back());
  auto cell_of = [&](double v) {
    auto it = std::upper_bound(initial_y_.begin(), initial_y_.end(), v);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - initial_y_.begin()));
    return std::min(k, initial_y_.size() - 1) - 1;
  };
  InverseCoefficients out;
  std::size_t k = cell_of(y);
  double residual = 0.0;
  int it = 0;
  for (; it < std::max(1, options.max_iter); ++it) {
    const double dy = initial_y_[k + 1] - initial_y_[k];
    const double slope = (forward_x_[k + 1] - forward_x_[k]) / dy;
    const double linear = forward_x_[k] + slope * (y - initial_y_[k]);
    y -= (linear - x) / slope;  // Newton on the linear interpolant
    if (y < initial_y_[k] && k > 0) {
      --k;
      continue;
    }
    if (y > initial_y_[k + 1] && k + 2 < initial_y_.size()) {
      ++k;
      continue;
    }
    residual = std::abs(forward_x_[k] + slope * (y - initial_y_[k]) - x);
    ++it;
    break;
  }
  const double w = (y - initial_y_[k]) / (initial_y_[k + 1] - initial_y_[k]);
  const double e = (1.0 - w) * e_[k] + w * e_[k + 1];
  const double i = (1.0 - w) * i_[k] + w * i_[k + 1];
  out.y = Vec::Constant(1, y);
  out.xi_inv = 1.0 / e;
  out.zeta_inv = i / e;
  out.residual = residual;
  out.iterations = it;
  return out;
}

InverseCoefficients invert_1d(const FlowSolution& flow, const InverseFlowQuery& query,
                              const InversionOptions& options) {
  if (query.x.size() != 1) throw InputError("invert_1d: query must be one-dimensional");
  return InverseTable1D(flow, query.time_index).invert(query.x(0), options);
}

// ---------------------------------------------------------------------------
// invert_nd

namespace {

std::vector<std::size_t> unravel(std::size_t flat, const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> idx(shape.size());
  for (std::size_t k = shape.size(); k-- > 0;) {
    idx[k] = flat % shape[k];
    flat /= shape[k];
  }
  return idx;
}

std::size_t ravel(const std::vector<std::size_t>& idx, const std::vector<std::size_t>& shape) {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < shape.size(); ++k) flat = flat * shape[k] + idx[k];
  return flat;
}

}  // namespace

InverseCoefficients invert_nd(const FlowSolution& flow, const InverseFlowQuery& query, int max_iter,
                              double tol) {
  const int d = flow.d;
  if (d > 3) throw InputError("invert_nd supports d <= 3");
  if (query.x.size() != d) throw InputError("invert_nd: query dimension mismatch");
  if (query.time_index >= flow.times.size()) throw InputError("inverse query time index out of range");
  if (!flow.forward) throw InputError("invert_nd: flow has no forward evaluator");
  std::vector<std::size_t> shape = flow.grid_shape;
  if (shape.empty()) shape = {flow.point_count()};
  std::size_t total = 1;
  for (auto s : shape) total *= s;
  if (shape.size() != static_cast<std::size_t>(d) || total != flow.point_count())
    throw InputError("invert_nd: flow initial grid is not a tensor grid of matching shape");

  const std::size_t k = query.time_index;
  const Vec& x = query.x;

  // Bounding box of the valid forward endpoints guards against extrapolation.
  Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  std::size_t nearest = total;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < total; ++p) {
    if (flow.diverged[p]) continue;
    const Vec& e = flow.states[p][k].x;
    lo = lo.cwiseMin(e);
    hi = hi.cwiseMax(e);
    const double dist = (e - x).norm();
    if (dist < best) {
      best = dist;
      nearest = p;
    }
  }
  if (nearest == total) throw InputError("invert_nd: no valid forward trajectories");
  if ((x.array() < lo.array()).any() || (x.array() > hi.array()).any())
    throw RangeError("invert_nd: query outside the range of forward endpoints");

  auto jacobian_at = [&](std::size_t node) {
    const auto idx = unravel(node, shape);
    Mat J(d, d);
    for (int axis = 0; axis < d; ++axis) {
      auto plus = idx;
      auto minus = idx;
      if (idx[axis] + 1 < shape[axis]) ++plus[axis];
      if (idx[axis] > 0) --minus[axis];
      const std::size_t pp = ravel(plus, shape);
      const std::size_t pm = ravel(minus, shape);
      if (flow.diverged[pp] || flow.diverged[pm])
        throw ConditioningError("invert_nd: Jacobian stencil touches a diverged trajectory");
      const double dy = flow.initial_grid[pp](axis) - flow.initial_grid[pm](axis);
      J.col(axis) = (flow.states[pp][k].x - flow.states[pm][k].x) / dy;
    }
    Eigen::FullPivLU<Mat> lu(J);
    if (lu.rank() < d || lu.rcond() < 1e-12)
      throw ConditioningError("invert_nd: finite-difference Jacobian is singular");
    return J;
  };
  auto nearest_node = [&](const Vec& y) {
    std::size_t node = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < total; ++p) {
      const double dd = (flow.initial_grid[p] - y).norm();
      if (dd < dist) {
        dist = dd;
        node = p;
      }
    }
    return node;
  };

  Vec y = flow.initial_grid[nearest];
  const double scaled = tol * std::max(1.0, x.norm());
  InverseCoefficients out;
  for (int it = 1; it <= max_iter; ++it) {
    const auto state = flow.forward->evaluate(y, k);
    const Vec r = state.x - x;
    if (r.norm() <= scaled) {
      out.y = y;
      out.xi_inv = 1.0 / state.xi;
      out.zeta_inv = -state.zeta / state.xi;
      out.residual = r.norm();
      out.iterations = it - 1;  // Newton updates taken
      return out;
    }
    const Mat J = jacobian_at(nearest_node(y));
    y -= J.fullPivLu().solve(r);
  }
  throw IterationError("invert_nd: Newton iteration did not converge in " +
                       std::to_string(max_iter) + " iterations");
}

double round_trip_residual(const FlowSolution& flow, std::size_t time_index,
                           const std::vector<Vec>& samples, const InversionOptions& options) {
  if (!flow.forward) throw InputError("round_trip_residual: flow has no forward evaluator");
  double worst = 0.0;
  if (flow.d == 1) {
    const InverseTable1D table(flow, time_index);
    for (const auto& x : samples) {
      const auto inv = table.invert(x(0), options);
      const auto state = flow.forward->evaluate(inv.y, time_index);
      worst = std::max(worst, (state.x - x).norm());
    }
    return worst;
  }
  for (const auto& x : samples) {
    const auto inv = invert_nd(flow, {time_index, x}, options.max_iter, options.tolerance);
    const auto state = flow.forward->evaluate(inv.y, time_index);
    worst = std::max(worst, (state.x - x).norm());
  }
  return worst;
}

}  // namespace marcus
