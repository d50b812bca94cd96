#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "glpin/bessel.hpp"
#include "glpin/error.hpp"
#include "glpin/experiment.hpp"

namespace py = pybind11;
using namespace glpin;
using nlohmann::json;

namespace {

py::object to_python(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

// str: path to an INI/JSON file; dict: the JSON layout.
RunConfig config_from(const py::object& cfg) {
  if (py::isinstance<py::dict>(cfg)) {
    const std::string text = py::module_::import("json").attr("dumps")(cfg).cast<std::string>();
    return parse_config(text, true);
  }
  return load_config(cfg.cast<std::string>());
}

template <class F>
py::object run(const py::object& cfg, F&& f) {
  const RunConfig c = config_from(cfg);
  json out;
  {
    py::gil_scoped_release release;
    out = f(c);
  }
  return to_python(out);
}

}  // namespace

PYBIND11_MODULE(_glpin, m) {
  m.doc() = "Hole-vortex degrees in perforated Ginzburg-Landau domains";

  static py::handle error = PyErr_NewException("glpin.GlpinError", PyExc_RuntimeError, nullptr);
  m.attr("GlpinError") = error;
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error(py::str(e.what()));
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.attr("REPORT_SCHEMA") = kReportSchema;

  m.def("bessel_i0", &bessel_i0);
  m.def("bessel_i1", &bessel_i1);
  m.def("bessel_k0", &bessel_k0);
  m.def("bessel_k1", &bessel_k1);

  m.def("config", [](const py::object& cfg) { return to_python(config_to_json(config_from(cfg))); },
        "Parsed and normalised configuration.");
  m.def("predict", [](const py::object& cfg) { return run(cfg, [](const RunConfig& c) { return to_json(run_predict(c)); }); });
  m.def("london", [](const py::object& cfg) { return run(cfg, [](const RunConfig& c) { return to_json(run_london(c)); }); });
  m.def("gl", [](const py::object& cfg, bool fields) {
    return run(cfg, [fields](const RunConfig& c) {
      const GLRun r = run_gl(c);
      json j = to_json(r);
      j["timings"] = r.timings;
      if (fields) {
        const auto& s = r.best.state;
        const auto& g = s.topology->grid();
        json x = json::array(), y = json::array(), re = json::array(), im = json::array();
        for (int k = 0; k < s.topology->state_node_count(); ++k) {
          const Point p = g.position(s.topology->state_node(k));
          x.push_back(p.x);
          y.push_back(p.y);
          re.push_back(s.u[k].real());
          im.push_back(s.u[k].imag());
        }
        j["fields"] = {{"x", x}, {"y", y}, {"re", re}, {"im", im}};
      }
      return j;
    });
  }, py::arg("config"), py::arg("fields") = false);
  m.def("sweep_sigma", [](const py::object& cfg) { return run(cfg, [](const RunConfig& c) { return to_json(run_sweep_sigma(c)); }); });
  m.def("sweep_delta", [](const py::object& cfg) { return run(cfg, [](const RunConfig& c) { return to_json(run_sweep_delta(c)); }); });
  m.def("merge_reports", [](const std::string& dir) {
    const ReportTable t = merge_reports(dir);
    return py::make_tuple(t.columns, t.rows);
  });
}
