#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "marcus/config.hpp"
#include "marcus/errors.hpp"
#include "marcus/marcus_exp.hpp"
#include "marcus/presets.hpp"
#include "marcus/studies.hpp"

namespace py = pybind11;
using namespace marcus;

namespace {

RunConfig load(const std::string& config, const std::string& preset, const std::optional<std::string>& seed) {
  Config cfg = Config::parse(config);
  if (seed) {
    parse_seed(*seed);
    ConfigValue v;
    v.kind = ConfigValue::Kind::string;
    v.text = *seed;
    cfg.set("driver", "seed", v);
  }
  return build_run_config(cfg, preset);
}

JumpVectorField py_field(py::function phi, int d) {
  return {d, [phi = std::move(phi)](const Vec& x, const Vec& z) {
            py::gil_scoped_acquire gil;
            return phi(x, z).cast<Vec>();
          }};
}

py::array_t<double> matrix(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.empty() ? 0 : rows.front().size();
  py::array_t<double> out({rows.size(), n});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = rows[i][j];
  return out;
}

py::array_t<double> points(const SpatialGrid& grid) {
  const int d = grid.dimension();
  if (d == 1) {
    py::array_t<double> out(grid.size());
    auto m = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < grid.size(); ++i) m(i) = grid.points[i](0);
    return out;
  }
  py::array_t<double> out({grid.size(), static_cast<std::size_t>(d)});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (int k = 0; k < d; ++k) m(i, k) = grid.points[i](k);
  return out;
}

py::dict oracle_dict(const OracleReport& r) {
  py::dict d;
  d["rmse"] = r.rmse;
  d["max_abs"] = r.max_abs;
  d["valid"] = r.valid;
  d["flagged"] = r.flagged;
  return d;
}

py::dict solve_config(const std::string& config, const std::string& preset, const std::optional<std::string>& seed) {
  const RunConfig rc = load(config, preset, seed);
  SolveRun run;
  {
    py::gil_scoped_release release;
    run = run_problem(rc.problem);
  }
  const auto& f = run.field;
  py::array_t<std::uint8_t> flags({f.flags.size(), f.grid.size()});
  auto fm = flags.mutable_unchecked<2>();
  for (std::size_t k = 0; k < f.flags.size(); ++k)
    for (std::size_t p = 0; p < f.grid.size(); ++p) fm(k, p) = static_cast<std::uint8_t>(f.flags[k][p]);
  py::dict out;
  out["preset"] = rc.problem.name;
  out["times"] = f.times;
  out["grid"] = points(f.grid);
  out["values"] = matrix(f.values);
  out["flags"] = flags;
  out["messages"] = f.messages;
  out["seed"] = f.provenance.seed;
  out["oracle"] = run.oracle ? py::object(oracle_dict(*run.oracle)) : py::object(py::none());
  if (!run.reference.empty()) out["reference"] = matrix(run.reference);
  if (!run.stable_path.empty()) out["stable_path"] = run.stable_path;
  return out;
}

py::dict sample_config(const std::string& config, const std::string& preset, const std::optional<std::string>& seed) {
  const RunConfig rc = load(config, preset, seed);
  const auto drv = realize_driver(rc.problem);
  const std::size_t m = static_cast<std::size_t>(drv->m);
  py::array_t<double> dw({drv->brownian_increments.size(), m});
  auto wm = dw.mutable_unchecked<2>();
  for (std::size_t i = 0; i < drv->brownian_increments.size(); ++i)
    for (std::size_t k = 0; k < m; ++k) wm(i, k) = drv->brownian_increments[i](k);
  std::vector<double> times;
  py::array_t<double> marks({drv->jump_events.size(), m});
  auto mm = marks.mutable_unchecked<2>();
  for (std::size_t i = 0; i < drv->jump_events.size(); ++i) {
    times.push_back(drv->jump_events[i].time);
    for (std::size_t k = 0; k < m; ++k) mm(i, k) = drv->jump_events[i].mark(k);
  }
  std::vector<double> z;
  for (double t : rc.problem.times) z.push_back(drv->levy_value(t)(0));
  py::dict out;
  out["grid"] = drv->grid;
  out["brownian_increments"] = dw;
  out["event_times"] = times;
  out["event_marks"] = marks;
  out["times"] = rc.problem.times;
  out["levy_values"] = z;
  out["seed"] = drv->seed;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Levy-driven linear transport SPDEs solved by stochastic characteristics";

  auto base = py::register_exception<Error>(mod, "MarcusError", PyExc_RuntimeError);
  py::register_exception<InputError>(mod, "InputError", base.ptr());
  py::register_exception<ConfigError>(mod, "ConfigError", base.ptr());
  py::register_exception<RangeError>(mod, "RangeError", base.ptr());
  py::register_exception<DivergenceError>(mod, "DivergenceError", base.ptr());
  py::register_exception<DiffeomorphismError>(mod, "DiffeomorphismError", base.ptr());

  mod.def("presets", &preset_catalog, "(name, description) for every preset");

  mod.def(
      "exp_map",
      [](py::function phi, const Vec& x0, const Vec& z, int substeps) {
        const auto r = exp_map(py_field(std::move(phi), static_cast<int>(x0.size())), x0, z, substeps);
        py::dict out;
        out["endpoint"] = r.endpoint;
        out["substeps"] = r.substep_count;
        out["estimated_error"] = r.estimated_error;
        return out;
      },
      py::arg("phi"), py::arg("x0"), py::arg("z"), py::arg("substeps") = kDefaultSubsteps,
      "h(1) for dh/du = phi(h, z), h(0) = x0; phi(x, z) takes and returns arrays");

  mod.def(
      "exp_map_inverse_check",
      [](py::function phi, const Vec& x0, const Vec& z, int substeps) {
        return exp_map_inverse_check(py_field(std::move(phi), static_cast<int>(x0.size())), x0, z, substeps);
      },
      py::arg("phi"), py::arg("x0"), py::arg("z"), py::arg("substeps") = kDefaultSubsteps);

  mod.def("solve", &solve_config, py::arg("config") = "", py::arg("preset") = "", py::arg("seed") = py::none(),
          "Run a configuration (TOML-style text) end to end");

  mod.def("sample_driver", &sample_config, py::arg("config") = "", py::arg("preset") = "",
          py::arg("seed") = py::none());

  mod.def(
      "round_trip",
      [](const std::string& config, const std::string& preset, const std::optional<std::string>& seed,
         int samples, const std::string& mode) {
        const RunConfig rc = load(config, preset, seed);
        InversionOptions inv = rc.problem.solver.inversion;
        if (mode == "table") inv.mode = InversionMode::table;
        else if (mode == "shooting") inv.mode = InversionMode::shooting;
        else throw InputError("mode must be 'table' or 'shooting'");
        const auto rt = round_trip_study(rc.problem, samples, inv);
        py::dict out;
        out["residual"] = rt.residual;
        out["t"] = rt.t;
        out["samples"] = rt.samples;
        return out;
      },
      py::arg("config") = "", py::arg("preset") = "", py::arg("seed") = py::none(), py::arg("samples") = 101,
      py::arg("mode") = "table");

  mod.def(
      "h_transform_solution",
      [](std::function<double(double)> alpha, std::function<double(double)> u0, double x, double z,
         double lo, double hi, double anchor) {
        const HTransform h(std::move(alpha), lo, hi, anchor);
        return h_transform_solution(h, u0, x, z);
      },
      py::arg("alpha"), py::arg("u0"), py::arg("x"), py::arg("z"), py::arg("lo") = -1e6, py::arg("hi") = 1e6,
      py::arg("anchor") = 0.0, "u0(H^{-1}(H(x) + z)) with H' = 1 / alpha");

  mod.def(
      "sampler_study",
      [](std::size_t n, std::uint64_t seed) {
        const auto s = marcus::sampler_study(n, seed);
        py::dict out;
        out["n"] = s.n;
        out["gaussian_ks_p"] = s.gaussian_ks_p;
        out["cos_mean"] = s.cos_mean;
        out["cos_target"] = s.cos_target;
        out["cos_tolerance"] = s.cos_tolerance;
        out["self_similarity_ks_p"] = s.self_similarity_ks_p;
        return out;
      },
      py::arg("n") = 10000, py::arg("seed") = 1);
}
