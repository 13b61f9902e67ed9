#include "marcus/levy_driver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "marcus/errors.hpp"

namespace marcus {

namespace {

constexpr double kPi = std::numbers::pi;

// Relative tolerance used to identify time points with grid points.
double time_tolerance(double horizon) { return 1e-9 * std::max(1.0, horizon); }

// 2 * int_0^inf (1 - cos u) u^{-1-alpha} du, so that the stable Levy
// density C |z|^{-1-alpha} with C = scale / kappa has exponent scale |lambda|^alpha.
double stable_kappa(double alpha) {
  if (std::abs(alpha - 1.0) < 1e-12) return kPi;
  return 2.0 * std::tgamma(1.0 - alpha) * std::cos(kPi * alpha / 2.0) / alpha;
}

double stable_density_constant(const AlphaStable& s) { return s.scale / stable_kappa(s.alpha); }

// Simpson rule on [lo, hi]; exact for cubics, which covers z^k times a
// piecewise-linear density for k <= 2.
template <class F>
double simpson(F&& f, double lo, double hi) {
  if (hi <= lo) return 0.0;
  const double mid = 0.5 * (lo + hi);
  return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi));
}

double table_density(const TabulatedDensity& t, double z) {
  if (t.z.empty() || z < t.z.front() || z > t.z.back()) return 0.0;
  auto it = std::upper_bound(t.z.begin(), t.z.end(), z);
  if (it == t.z.end()) return t.density.back();
  const auto j = static_cast<std::size_t>(it - t.z.begin());
  if (j == 0) return t.density.front();
  const double w = (z - t.z[j - 1]) / (t.z[j] - t.z[j - 1]);
  return (1.0 - w) * t.density[j - 1] + w * t.density[j];
}

// Integral of z^power * density over {lo_abs < |z| <= hi_abs}.
double table_moment(const TabulatedDensity& t, int power, double lo_abs, double hi_abs) {
  double total = 0.0;
  auto integrand = [&](double z) { return std::pow(z, power) * table_density(t, z); };
  for (std::size_t j = 0; j + 1 < t.z.size(); ++j) {
    const double a = t.z[j];
    const double b = t.z[j + 1];
    // positive band
    total += simpson(integrand, std::max(a, lo_abs), std::min(b, hi_abs));
    // negative band
    total += simpson(integrand, std::max(a, -hi_abs), std::min(b, -lo_abs));
  }
  return total;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

}  // namespace

// ---------------------------------------------------------------------------
// MarkDistribution

double MarkDistribution::sample(Engine& rng) const {
  switch (kind) {
    case Kind::uniform:
      return std::uniform_real_distribution<double>(first, second)(rng);
    case Kind::normal:
      return std::normal_distribution<double>(first, second)(rng);
    case Kind::constant:
      return first;
  }
  return 0.0;
}

bool MarkDistribution::symmetric() const {
  switch (kind) {
    case Kind::uniform: return first == -second;
    case Kind::normal: return first == 0.0;
    case Kind::constant: return false;
  }
  return false;
}

void MarkDistribution::validate() const {
  if (!std::isfinite(first) || !std::isfinite(second))
    throw InputError("mark distribution parameters must be finite");
  if (kind == Kind::uniform && !(first < second))
    throw InputError("uniform marks need low < high");
  if (kind == Kind::normal && !(second > 0.0))
    throw InputError("normal marks need a positive standard deviation");
  if (kind == Kind::constant && first == 0.0) throw InputError("constant marks must be nonzero");
}

// ---------------------------------------------------------------------------
// LevyMeasureSpec

void LevyMeasureSpec::validate(int m) const {
  if (m < 1) throw InputError("driver dimension m must be >= 1");
  if (!(truncation_epsilon >= 0.0 && truncation_epsilon < 1.0))
    throw InputError("truncation_epsilon must lie in [0, 1)");
  if (const auto* f = std::get_if<FiniteActivity>(&kind)) {
    if (!(f->intensity >= 0.0) || !std::isfinite(f->intensity))
      throw InputError("compound Poisson intensity must be >= 0");
    if (truncation_epsilon != 0.0)
      throw InputError("finite-activity measures take truncation_epsilon = 0");
    f->marks.validate();
    if (m > 1 && !f->marks.symmetric())
      throw InputError("multi-dimensional compound Poisson marks must be symmetric about 0");
  } else if (const auto* s = std::get_if<AlphaStable>(&kind)) {
    if (!(s->alpha > 0.0 && s->alpha <= 2.0)) throw InputError("stable alpha must lie in (0, 2]");
    if (!(s->scale > 0.0)) throw InputError("stable scale must be > 0");
    if (s->alpha < 2.0 && truncation_epsilon <= 0.0)
      throw InputError("alpha-stable jumps need truncation_epsilon in (0, 1)");
  } else {
    const auto& t = std::get<TabulatedDensity>(kind);
    if (m != 1) throw InputError("tabulated Levy densities are one-dimensional");
    if (t.z.size() < 2 || t.z.size() != t.density.size())
      throw InputError("tabulated density needs >= 2 matching (z, density) rows");
    for (std::size_t i = 0; i < t.z.size(); ++i) {
      if (!(t.density[i] >= 0.0)) throw InputError("tabulated density must be >= 0");
      if (i > 0 && !(t.z[i] > t.z[i - 1])) throw InputError("tabulated z must be strictly increasing");
    }
    if (truncation_epsilon <= 0.0 && table_density(t, 0.0) > 0.0)
      throw InputError("tabulated density with mass at 0 needs truncation_epsilon > 0");
  }
}

double LevyMeasureSpec::event_intensity(int m) const {
  if (const auto* f = std::get_if<FiniteActivity>(&kind)) return f->intensity;
  if (const auto* s = std::get_if<AlphaStable>(&kind)) {
    if (s->alpha >= 2.0) return 0.0;
    const double c = stable_density_constant(*s);
    return m * 2.0 * c * std::pow(truncation_epsilon, -s->alpha) / s->alpha;
  }
  const auto& t = std::get<TabulatedDensity>(kind);
  const double far = std::max(std::abs(t.z.front()), std::abs(t.z.back())) + 1.0;
  return table_moment(t, 0, truncation_epsilon, far);
}

double LevyMeasureSpec::small_jump_variance() const {
  if (std::holds_alternative<FiniteActivity>(kind)) return 0.0;
  if (const auto* s = std::get_if<AlphaStable>(&kind)) {
    if (s->alpha >= 2.0) return 2.0 * s->scale;  // pure Gaussian
    const double c = stable_density_constant(*s);
    return 2.0 * c * std::pow(truncation_epsilon, 2.0 - s->alpha) / (2.0 - s->alpha);
  }
  return table_moment(std::get<TabulatedDensity>(kind), 2, 0.0, truncation_epsilon);
}

Vec LevyMeasureSpec::truncated_first_moment(int m) const {
  Vec out = Vec::Zero(m);
  if (const auto* f = std::get_if<FiniteActivity>(&kind)) {
    if (m > 1 || f->intensity == 0.0) return out;  // symmetric marks enforced for m > 1
    const auto& mk = f->marks;
    double mean_small = 0.0;  // E[z 1{|z| <= 1}]
    switch (mk.kind) {
      case MarkDistribution::Kind::uniform: {
        const double lo = std::max(mk.first, -1.0);
        const double hi = std::min(mk.second, 1.0);
        if (hi > lo) mean_small = 0.5 * (hi * hi - lo * lo) / (mk.second - mk.first);
        break;
      }
      case MarkDistribution::Kind::normal: {
        const double a = (-1.0 - mk.first) / mk.second;
        const double b = (1.0 - mk.first) / mk.second;
        mean_small = mk.first * (normal_cdf(b) - normal_cdf(a)) +
                     mk.second * (normal_pdf(a) - normal_pdf(b));
        break;
      }
      case MarkDistribution::Kind::constant:
        mean_small = std::abs(mk.first) <= 1.0 ? mk.first : 0.0;
        break;
    }
    out(0) = f->intensity * mean_small;
    return out;
  }
  if (std::holds_alternative<AlphaStable>(kind)) return out;  // symmetric
  out(0) = table_moment(std::get<TabulatedDensity>(kind), 1, truncation_epsilon, 1.0);
  return out;
}

double levy_density(const LevyMeasureSpec& spec, double z) {
  if (const auto* s = std::get_if<AlphaStable>(&spec.kind)) {
    if (s->alpha >= 2.0 || z == 0.0) return 0.0;
    return stable_density_constant(*s) * std::pow(std::abs(z), -1.0 - s->alpha);
  }
  if (const auto* t = std::get_if<TabulatedDensity>(&spec.kind)) return table_density(*t, z);
  return 0.0;
}

std::string to_string(SmallJumpMode mode) {
  return mode == SmallJumpMode::drop ? "drop" : "gaussian_substitute";
}

SmallJumpMode small_jump_mode_from_string(const std::string& name) {
  if (name == "drop") return SmallJumpMode::drop;
  if (name == "gaussian_substitute" || name == "gaussian") return SmallJumpMode::gaussian_substitute;
  throw InputError("unknown small_jump_mode '" + name + "'");
}

// ---------------------------------------------------------------------------
// DriverRealization

std::ptrdiff_t DriverRealization::grid_index(double t) const {
  auto it = std::lower_bound(grid.begin(), grid.end(), t);
  const double tol = time_tolerance(horizon);
  std::ptrdiff_t best = -1;
  double best_gap = tol;
  for (auto cand : {it, it == grid.begin() ? it : std::prev(it)}) {
    if (cand == grid.end()) continue;
    const double gap = std::abs(*cand - t);
    if (gap <= best_gap) {
      best_gap = gap;
      best = cand - grid.begin();
    }
  }
  return best;
}

Vec DriverRealization::brownian_value(double t) const {
  if (brownian_path_.empty()) return Vec::Zero(m);
  const auto i = grid_index(t);
  if (i < 0) throw InputError("time " + std::to_string(t) + " is not a point of the driver grid");
  return brownian_path_[static_cast<std::size_t>(i)];
}

Vec DriverRealization::substitute_value(double t) const {
  if (substitute_path_.empty()) return Vec::Zero(m);
  const auto i = grid_index(t);
  if (i < 0) throw InputError("time " + std::to_string(t) + " is not a point of the driver grid");
  return substitute_path_[static_cast<std::size_t>(i)];
}

Vec DriverRealization::levy_value(double t) const {
  Vec z = substitute_value(t);
  if (drift.size() == m) z += drift * t;
  const double tol = time_tolerance(horizon);
  for (const auto& e : jump_events) {
    if (e.time > t + tol) break;
    z += e.mark;
  }
  return z;
}

void DriverRealization::build_cumulative() {
  auto accumulate = [&](const std::vector<Vec>& inc, std::vector<Vec>& path) {
    path.clear();
    if (inc.empty()) return;
    path.reserve(inc.size() + 1);
    path.push_back(Vec::Zero(m));
    for (const auto& d : inc) path.push_back(path.back() + d);
  };
  accumulate(brownian_increments, brownian_path_);
  accumulate(small_jump_increments, substitute_path_);
  if (drift.size() != m) drift = Vec::Zero(m);
}

void DriverRealization::validate() const {
  if (grid.size() < 1 || grid.front() != 0.0) throw InputError("driver grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw InputError("driver grid must be strictly increasing");
  if (!brownian_increments.empty() && brownian_increments.size() + 1 != grid.size())
    throw InputError("brownian_increments must have len(grid) - 1 entries");
  if (!small_jump_increments.empty() && small_jump_increments.size() + 1 != grid.size())
    throw InputError("small_jump_increments must have len(grid) - 1 entries");
  double last = 0.0;
  for (const auto& e : jump_events) {
    if (!(e.time > last) || e.time > horizon + time_tolerance(horizon))
      throw InputError("jump events must be strictly increasing in (0, T]");
    if (e.mark.size() != m || e.mark.norm() == 0.0) throw InputError("jump marks must be nonzero m-vectors");
    last = e.time;
  }
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<double> uniform_time_grid(double horizon, double dt) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw InputError("horizon and dt must be positive");
  std::vector<double> grid;
  const auto n = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
  grid.reserve(n + 2);
  for (std::size_t k = 0; k <= n; ++k) grid.push_back(static_cast<double>(k) * dt);
  if (horizon - grid.back() > time_tolerance(horizon))
    grid.push_back(horizon);
  else
    grid.back() = horizon;
  return grid;
}

std::vector<Vec> sample_brownian(std::span<const double> grid, int m, Engine& rng) {
  if (m < 1) throw InputError("Brownian dimension must be >= 1");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw InputError("time grid must be strictly increasing");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec> out;
  if (grid.size() < 2) return out;
  out.reserve(grid.size() - 1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double sd = std::sqrt(grid[i + 1] - grid[i]);
    Vec dw(m);
    for (int j = 0; j < m; ++j) dw(j) = sd * normal(rng);
    out.push_back(std::move(dw));
  }
  return out;
}

namespace {

// Draw `count` distinct uniform times in (0, T], sorted; duplicates are redrawn.
std::vector<double> sorted_event_times(std::size_t count, double horizon, Engine& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> times;
  times.reserve(count);
  for (std::size_t i = 0; i < count; ++i) times.push_back(horizon * (1.0 - unit(rng)));
  std::sort(times.begin(), times.end());
  for (;;) {
    auto dup = std::adjacent_find(times.begin(), times.end());
    if (dup == times.end()) break;
    *dup = horizon * (1.0 - unit(rng));
    std::sort(times.begin(), times.end());
  }
  return times;
}

std::size_t poisson_count(double mean, Engine& rng) {
  if (mean <= 0.0) return 0;
  return static_cast<std::size_t>(std::poisson_distribution<long long>(mean)(rng));
}

}  // namespace

std::vector<JumpEvent> sample_compound_poisson(const LevyMeasureSpec& spec, double horizon, int m,
                                               Engine& rng) {
  const auto* f = std::get_if<FiniteActivity>(&spec.kind);
  if (f == nullptr) throw InputError("sample_compound_poisson needs a finite-activity measure");
  if (f->intensity < 0.0) throw InputError("compound Poisson intensity must be >= 0");
  spec.validate(m);
  const auto times = sorted_event_times(poisson_count(f->intensity * horizon, rng), horizon, rng);
  std::vector<JumpEvent> events;
  events.reserve(times.size());
  for (double t : times) {
    Vec mark(m);
    do {
      for (int j = 0; j < m; ++j) mark(j) = f->marks.sample(rng);
    } while (mark.norm() == 0.0);
    events.push_back({t, std::move(mark)});
  }
  return events;
}

std::vector<JumpEvent> sample_truncated_jumps(const LevyMeasureSpec& spec, double horizon, int m,
                                              Engine& rng) {
  spec.validate(m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<JumpEvent> events;
  if (const auto* s = std::get_if<AlphaStable>(&spec.kind)) {
    if (s->alpha >= 2.0) return events;
    const double eps = spec.truncation_epsilon;
    const double per_coordinate = spec.event_intensity(1);
    for (int j = 0; j < m; ++j) {
      for (double t : sorted_event_times(poisson_count(per_coordinate * horizon, rng), horizon, rng)) {
        // Pareto tail of |z| restricted to |z| > eps, random sign.
        const double size = eps * std::pow(1.0 - unit(rng), -1.0 / s->alpha);
        Vec mark = Vec::Zero(m);
        mark(j) = unit(rng) < 0.5 ? -size : size;
        events.push_back({t, std::move(mark)});
      }
    }
  } else if (const auto* t = std::get_if<TabulatedDensity>(&spec.kind)) {
    const double eps = spec.truncation_epsilon;
    double peak = 0.0;
    for (std::size_t i = 0; i < t->z.size(); ++i)
      if (std::abs(t->z[i]) > eps || i + 1 < t->z.size()) peak = std::max(peak, t->density[i]);
    const double lo = t->z.front();
    const double hi = t->z.back();
    for (double time : sorted_event_times(poisson_count(spec.event_intensity(1) * horizon, rng),
                                          horizon, rng)) {
      double z = 0.0;
      for (;;) {  // rejection from the piecewise-linear density on |z| > eps
        z = lo + (hi - lo) * unit(rng);
        if (std::abs(z) <= eps) continue;
        if (unit(rng) * peak <= table_density(*t, z)) break;
      }
      Vec mark(1);
      mark(0) = z;
      events.push_back({time, std::move(mark)});
    }
  } else {
    return sample_compound_poisson(spec, horizon, m, rng);
  }
  auto by_time = [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; };
  auto same_time = [](const JumpEvent& a, const JumpEvent& b) { return a.time == b.time; };
  std::sort(events.begin(), events.end(), by_time);
  // Coordinates are sampled independently; equal times across them are redrawn.
  for (auto dup = std::adjacent_find(events.begin(), events.end(), same_time); dup != events.end();
       dup = std::adjacent_find(events.begin(), events.end(), same_time)) {
    dup->time = horizon * (1.0 - unit(rng));
    std::sort(events.begin(), events.end(), by_time);
  }
  return events;
}

double standard_symmetric_stable(double alpha, Engine& rng) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw InputError("stable alpha must lie in (0, 2]");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double v = 0.0;
  do {
    v = kPi * (unit(rng) - 0.5);
  } while (v <= -kPi / 2.0);
  double w = 0.0;
  do {
    w = std::exponential_distribution<double>(1.0)(rng);
  } while (w == 0.0);
  if (std::abs(alpha - 1.0) < 1e-12) return std::tan(v);
  return std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
         std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
}

std::vector<double> sample_stable_path(double alpha, double scale, std::span<const double> grid,
                                       Engine& rng) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw InputError("stable alpha must lie in (0, 2]");
  if (!(scale > 0.0)) throw InputError("stable scale must be > 0");
  std::vector<double> out;
  if (grid.size() < 2) return out;
  out.reserve(grid.size() - 1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double dt = grid[i + 1] - grid[i];
    if (!(dt > 0.0)) throw InputError("time grid must be strictly increasing");
    out.push_back(std::pow(scale * dt, 1.0 / alpha) * standard_symmetric_stable(alpha, rng));
  }
  return out;
}

std::pair<std::vector<JumpEvent>, std::vector<JumpEvent>> decompose_events(
    const std::vector<JumpEvent>& events, double threshold) {
  std::pair<std::vector<JumpEvent>, std::vector<JumpEvent>> out;
  for (const auto& e : events) (e.mark.norm() <= threshold ? out.first : out.second).push_back(e);
  return out;
}

namespace {

std::vector<double> merge_times(std::vector<double> base, const std::vector<double>& extra,
                                double horizon) {
  const double tol = time_tolerance(horizon);
  for (double t : extra) {
    if (t < -tol || t > horizon + tol) throw InputError("inserted time outside [0, T]");
    base.push_back(std::clamp(t, 0.0, horizon));
  }
  std::sort(base.begin(), base.end());
  std::vector<double> out;
  out.reserve(base.size());
  for (double t : base)
    if (out.empty() || t - out.back() > tol) out.push_back(t);
  return out;
}

}  // namespace

DriverRealization generate_driver(const DriverOptions& options) {
  if (!(options.horizon > 0.0)) throw InputError("driver horizon must be > 0");
  if (!(options.dt > 0.0)) throw InputError("driver dt must be > 0");
  if (options.m < 1) throw InputError("driver dimension m must be >= 1");

  DriverRealization d;
  d.horizon = options.horizon;
  d.m = options.m;
  d.seed = options.seed;
  d.realization_index = options.realization_index;
  d.small_jump_mode = options.small_jump_mode;
  d.drift = Vec::Zero(options.m);

  if (options.has_levy) {
    const auto& spec = options.levy;
    spec.validate(options.m);
    d.truncation_epsilon = spec.truncation_epsilon;
    Engine jump_rng = make_stream(options.seed, options.realization_index, SubStream::jumps);
    d.jump_events = spec.is_finite_activity()
                        ? sample_compound_poisson(spec, options.horizon, options.m, jump_rng)
                        : sample_truncated_jumps(spec, options.horizon, options.m, jump_rng);
    d.drift = -spec.truncated_first_moment(options.m);
    d.small_jump_variance = spec.small_jump_variance();
  }

  // Event times become grid points; an event within tolerance of an existing
  // grid point is moved onto it.
  std::vector<double> extra = options.extra_times;
  auto base = uniform_time_grid(options.horizon, options.dt);
  const double tol = time_tolerance(options.horizon);
  for (auto& e : d.jump_events) {
    auto it = std::lower_bound(base.begin(), base.end(), e.time);
    if (it != base.end() && std::abs(*it - e.time) <= tol) e.time = *it;
    else if (it != base.begin() && std::abs(*std::prev(it) - e.time) <= tol) e.time = *std::prev(it);
    extra.push_back(e.time);
  }
  d.grid = merge_times(std::move(base), extra, options.horizon);

  if (options.brownian) {
    Engine bm_rng = make_stream(options.seed, options.realization_index, SubStream::brownian);
    d.brownian_increments = sample_brownian(d.grid, options.m, bm_rng);
  }
  if (options.has_levy && options.small_jump_mode == SmallJumpMode::gaussian_substitute &&
      d.small_jump_variance > 0.0) {
    Engine sj_rng = make_stream(options.seed, options.realization_index, SubStream::small_jumps);
    d.small_jump_increments = sample_brownian(d.grid, options.m, sj_rng);
    const double sd = std::sqrt(d.small_jump_variance);
    for (auto& v : d.small_jump_increments) v *= sd;
  }
  d.build_cumulative();
  d.validate();
  return d;
}

DriverRealization make_driver(double horizon, std::vector<double> grid, int m,
                              std::vector<JumpEvent> events) {
  DriverRealization d;
  d.horizon = horizon;
  d.m = m;
  d.jump_events = std::move(events);
  std::vector<double> extra;
  for (const auto& e : d.jump_events) extra.push_back(e.time);
  d.grid = merge_times(std::move(grid), extra, horizon);
  d.drift = Vec::Zero(m);
  d.build_cumulative();
  d.validate();
  return d;
}

}  // namespace marcus
