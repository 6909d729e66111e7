#include "subheat/analysis.hpp"
#include "subheat/errors.hpp"
#include "subheat/scenario.hpp"
#include "subheat/subordinator.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace subheat;

namespace {

std::vector<TestFunction> to_family(const std::map<std::string, Eigen::VectorXd>& functions)
{
  std::vector<TestFunction> out;
  for (const auto& [id, values] : functions)
    out.push_back({id, values});
  return out;
}

py::dict fit_dict(const SlopeFit& fit)
{
  py::dict d;
  d["slope"] = fit.slope;
  d["intercept"] = fit.intercept;
  d["r_squared"] = fit.r_squared;
  d["window"] = py::make_tuple(fit.window_lo, fit.window_hi);
  return d;
}

py::dict report_dict(const InequalityReport& r)
{
  py::dict d;
  d["name"] = r.name;
  d["space"] = r.space;
  d["delta"] = r.delta;
  d["p"] = r.p;
  d["resolution"] = r.resolution;
  d["lhs"] = r.lhs;
  d["rhs"] = r.rhs;
  d["constant"] = r.constant;
  d["tolerance"] = r.tolerance;
  d["pass"] = r.pass;
  d["inconclusive"] = r.inconclusive;
  d["window"] = py::make_tuple(r.window_lo, r.window_hi);
  py::dict values;
  for (const auto& [k, v] : r.values)
    values[py::str(k)] = v;
  d["values"] = values;
  d["note"] = r.note;
  return d;
}

} // namespace

PYBIND11_MODULE(_subheat, m)
{
  m.doc() = "Subordinated heat semigroups on metric measure spaces";

  py::register_exception<Error>(m, "SubheatError", PyExc_RuntimeError);
  py::register_exception<WrongRegime>(m, "WrongRegime", m.attr("SubheatError").ptr());
  static PyObject* config_invalid = PyErr_NewException("subheat._subheat.ConfigInvalid", PyExc_ValueError, nullptr);
  m.add_object("ConfigInvalid", py::handle(config_invalid));
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p)
        std::rethrow_exception(p);
    } catch (const ConfigInvalid& e) {
      py::object exc = py::reinterpret_borrow<py::object>(config_invalid)(e.what());
      exc.attr("field") = e.field();
      PyErr_SetObject(config_invalid, exc.ptr());
    }
  });

  py::class_<MetricMeasureGraph>(m, "Space")
    .def_property_readonly("kind", [](const MetricMeasureGraph& g) { return to_string(g.descriptor().kind); })
    .def_property_readonly("resolution", [](const MetricMeasureGraph& g) { return g.descriptor().resolution; })
    .def_property_readonly("node_count", &MetricMeasureGraph::node_count)
    .def_property_readonly("measure", &MetricMeasureGraph::measure)
    .def_property_readonly("positions", &MetricMeasureGraph::positions)
    .def_property_readonly("boundary", &MetricMeasureGraph::boundary)
    .def_property_readonly("killed", &MetricMeasureGraph::killed)
    .def_property_readonly("spacing", &MetricMeasureGraph::spacing)
    .def_property_readonly("diameter", &MetricMeasureGraph::diameter)
    .def_property_readonly("d_H", [](const MetricMeasureGraph& g) { return g.geometry().d_H; })
    .def_property_readonly("d_W", [](const MetricMeasureGraph& g) { return g.geometry().d_W; })
    .def_property_readonly("kappa", [](const MetricMeasureGraph& g) { return g.geometry().kappa; })
    .def("distance", &MetricMeasureGraph::distance, py::arg("i"), py::arg("j"))
    .def("distance_matrix", &MetricMeasureGraph::distance_matrix)
    .def("form_matrix", &MetricMeasureGraph::form_matrix)
    .def("quadratic_form",
         [](const MetricMeasureGraph& g, const std::vector<double>& f) { return g.quadratic_form(f); })
    .def("coordinate", [](const MetricMeasureGraph& g) { return coordinate(g); })
    .def("with_kappa", [](const MetricMeasureGraph& g, double kappa) { return g.with_kappa(kappa, Provenance::estimated); })
    .def("__repr__", [](const MetricMeasureGraph& g) { return "<Space " + space_label(g) + ">"; });

  m.def("build_space",
        [](const std::string& kind, int resolution, const std::string& boundary) {
          SpaceDescriptor d;
          d.kind = parse_space_kind(kind);
          d.resolution = resolution;
          d.boundary = parse_boundary_mode(boundary);
          return build_space(d);
        },
        py::arg("kind"), py::arg("resolution"), py::arg("boundary") = "reflecting");
  m.def("ball", &ball, py::arg("space"), py::arg("center"), py::arg("r"));
  m.def("ahlfors_fit",
        [](const MetricMeasureGraph& g) {
          const auto fit = ahlfors_fit(g, default_radius_grid(g));
          return py::dict(py::arg("d_H") = fit.d_H, py::arg("c1") = fit.c1, py::arg("c2") = fit.c2,
                          py::arg("radii") = fit.radii);
        },
        py::arg("space"));

  py::class_<SpectralDecomposition>(m, "Spectrum")
    .def_readonly("eigenvalues", &SpectralDecomposition::eigenvalues)
    .def_readonly("eigenvectors", &SpectralDecomposition::eigenvectors)
    .def_readonly("measure", &SpectralDecomposition::measure)
    .def_readonly("killed", &SpectralDecomposition::killed)
    .def("spectral_gap", &SpectralDecomposition::spectral_gap);
  m.def("eigendecompose", [](const MetricMeasureGraph& g) { return eigendecompose(g); }, py::arg("space"));

  m.def("subordinator_density", &subordinator_density, py::arg("delta"), py::arg("t"), py::arg("s"));
  m.def("subordinator_moment",
        [](double delta, double t, double alpha) -> py::object {
          const auto r = subordinator_moment(delta, t, alpha);
          if (r.divergent)
            return py::none();
          return py::float_(r.value);
        },
        py::arg("delta"), py::arg("t"), py::arg("alpha"),
        "Moment of order alpha; None when alpha >= delta (divergent).");
  m.def("laplace_check",
        [](double delta, double t, double lambda) {
          const auto r = laplace_check(delta, t, lambda, 1e-6);
          return py::make_tuple(r.quadrature, r.reference, r.abs_error);
        },
        py::arg("delta"), py::arg("t"), py::arg("lam"));

  m.def("heat_kernel", [](const SpectralDecomposition& s, double t) { return heat_kernel(s, t).entries; },
        py::arg("spectrum"), py::arg("t"));
  m.def("subordinated_kernel",
        [](const SpectralDecomposition& s, double delta, double t) { return subordinated_kernel(s, delta, t).entries; },
        py::arg("spectrum"), py::arg("delta"), py::arg("t"));
  m.def("fractional_laplacian",
        [](const SpectralDecomposition& s, double delta) { return fractional_laplacian(s, delta).operator_matrix(); },
        py::arg("spectrum"), py::arg("delta"));
  m.def("resolved_time_grid", &resolved_time_grid, py::arg("space"), py::arg("spectrum"), py::arg("delta"),
        py::arg("count") = 24);
  m.def("exponent_grid", &exponent_grid, py::arg("space"), py::arg("spectrum"), py::arg("delta"),
        py::arg("count") = 24, py::arg("decades") = 0.5);

  m.def("canonical_family",
        [](const MetricMeasureGraph& g, const SpectralDecomposition& s, std::uint64_t seed) {
          std::map<std::string, Eigen::VectorXd> out;
          for (auto& f : canonical_family(g, s, seed))
            out[f.id] = f.values;
          return out;
        },
        py::arg("space"), py::arg("spectrum"), py::arg("seed") = 1);
  m.def("besov_energy",
        [](const SpectralDecomposition& s, double delta, double t, const Eigen::VectorXd& f, double p) {
          return besov_energy(subordinated_kernel(s, delta, t), s.measure, f, p);
        },
        py::arg("spectrum"), py::arg("delta"), py::arg("t"), py::arg("f"), py::arg("p"));
  m.def("w_norm", &w_norm, py::arg("space"), py::arg("f"), py::arg("lam"), py::arg("p"));

  m.def("critical_exponent",
        [](const SpectralDecomposition& s, const MetricMeasureGraph& g, double delta, double p,
           const std::map<std::string, Eigen::VectorXd>& family, std::optional<std::vector<double>> t_grid,
           std::optional<double> kappa) {
          const auto grid = t_grid ? *t_grid : exponent_grid(g, s, delta);
          const auto fam = to_family(family);
          const auto r = critical_exponent(s, g, delta, p, fam, grid, kappa);
          py::dict fits;
          for (const auto& [id, fit] : r.fits)
            fits[py::str(id)] = fit_dict(fit);
          return py::dict(py::arg("estimate") = r.estimate, py::arg("witness") = r.witness,
                          py::arg("prediction") = r.prediction,
                          py::arg("has_point_prediction") = r.has_point_prediction,
                          py::arg("bracket") = py::make_tuple(r.bracket_lo, r.bracket_hi),
                          py::arg("pass") = r.pass, py::arg("inconclusive") = r.inconclusive,
                          py::arg("fits") = fits);
        },
        py::arg("spectrum"), py::arg("space"), py::arg("delta"), py::arg("p"), py::arg("family"),
        py::arg("t_grid") = py::none(), py::arg("kappa") = py::none());
  m.def("weak_be_fit",
        [](const SpectralDecomposition& s, const MetricMeasureGraph& g, double delta,
           const std::map<std::string, Eigen::VectorXd>& family) {
          const auto fam = to_family(family);
          const auto r = weak_be_fit(s, g, delta, fam, exponent_grid(g, s, delta));
          return py::dict(py::arg("kappa_hat") = r.kappa_hat, py::arg("constant") = r.constant,
                          py::arg("converged") = r.converged, py::arg("residual") = r.fixed_point_residual,
                          py::arg("fit") = fit_dict(r.fit));
        },
        py::arg("spectrum"), py::arg("space"), py::arg("delta"), py::arg("family"));
  m.def("capacity",
        [](const SpectralDecomposition& s, const MetricMeasureGraph& g, double delta, const std::vector<int>& nodes) {
          return capacity(s, g, delta, nodes);
        },
        py::arg("spectrum"), py::arg("space"), py::arg("delta"), py::arg("nodes"));
  m.def("sobolev_check",
        [](const MetricMeasureGraph& g, double delta, double p, const std::map<std::string, Eigen::VectorXd>& family) {
          const auto fam = to_family(family);
          return report_dict(sobolev_check(g, delta, p, fam));
        },
        py::arg("space"), py::arg("delta"), py::arg("p"), py::arg("family"));

  m.def("parse_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
        py::arg("text"), "Validate a config and return its canonical serialization.");
  m.def("config_hash", [](const std::string& text) { return config_hash(parse_config(text)); }, py::arg("text"));
  m.def("suite_names", &suite_names);
  m.def("evaluate",
        [](const std::string& text) {
          const auto config = parse_config(text);
          RunResult r;
          {
            py::gil_scoped_release release;
            r = evaluate_scenario(config);
          }
          return py::make_tuple(r.exit_code, r.report);
        },
        py::arg("text"), "Run a config in memory; returns (exit_code, report_json).");
  m.def("run",
        [](const std::string& text, const std::filesystem::path& out_dir) {
          const auto config = parse_config(text);
          py::gil_scoped_release release;
          return run_scenario(config, out_dir).exit_code;
        },
        py::arg("text"), py::arg("out_dir"));
  m.def("version_info", &version_info);
}
