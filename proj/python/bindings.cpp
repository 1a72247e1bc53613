#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "membench/attacks.hpp"
#include "membench/error.hpp"
#include "membench/metrics.hpp"
#include "membench/riskmeter.hpp"
#include "membench/scenario.hpp"
#include "membench/version.hpp"

namespace py = pybind11;
using namespace membench;

namespace {

risk::Calibration calibration_arg(const py::object& cal) {
  if (py::isinstance<py::str>(cal)) return risk::calibration_preset(cal.cast<std::string>());
  return cal.cast<risk::Calibration>();
}

// Reports cross the boundary as their JSON-lines text.
std::string report_line(const harness::ExperimentReport& r) { return harness::report_to_json(r).dump(); }

}  // namespace

PYBIND11_MODULE(_membench, m) {
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base);
  py::register_exception<IndexError>(m, "IndexError", base);
  py::register_exception<StateError>(m, "StateError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<DegenerateInput>(m, "DegenerateInput", base);
  py::register_exception<IoError>(m, "IoError", base);

  py::class_<risk::Calibration>(m, "Calibration")
      .def(py::init<>())
      .def(py::init([](double slope, double intercept) { return risk::Calibration{slope, intercept, 0.0}; }),
           py::arg("slope"), py::arg("intercept"))
      .def_readwrite("slope", &risk::Calibration::slope)
      .def_readwrite("intercept", &risk::Calibration::intercept)
      .def_readwrite("r", &risk::Calibration::r)
      .def("__repr__", [](const risk::Calibration& c) {
        std::ostringstream o;
        o << "Calibration(slope=" << c.slope << ", intercept=" << c.intercept << ", r=" << c.r << ")";
        return o.str();
      });

  py::class_<metrics::AttackMetrics>(m, "AttackMetrics")
      .def_readonly("accuracy", &metrics::AttackMetrics::accuracy)
      .def_readonly("precision", &metrics::AttackMetrics::precision)
      .def_readonly("recall", &metrics::AttackMetrics::recall)
      .def_readonly("f1", &metrics::AttackMetrics::f1)
      .def_readonly("auc", &metrics::AttackMetrics::auc);

  m.def("softmax", [](const std::vector<double>& z) { return nn::softmax(z); }, py::arg("logits"));
  m.def("entropy", &attacks::entropy, py::arg("posteriors"));
  m.def(
      "ment",
      [](const attacks::Posteriors& p, int y, const std::string& variant) {
        if (variant != "as_printed" && variant != "original") throw InvalidInput("unknown ment variant: " + variant);
        return attacks::ment(p, y, variant == "original" ? attacks::MentVariant::original : attacks::MentVariant::as_printed);
      },
      py::arg("posteriors"), py::arg("label"), py::arg("variant") = "as_printed");
  m.def("metric_corr", &attacks::metric_corr, py::arg("posteriors"), py::arg("label"));

  m.def(
      "js_distance", [](const std::vector<double>& p, const std::vector<double>& q) { return risk::js_distance(p, q); },
      py::arg("p"), py::arg("q"));
  m.def(
      "pearson",
      [](const std::vector<double>& xs, const std::vector<double>& ys) {
        const auto r = risk::pearson(xs, ys);
        return py::make_tuple(r.r, r.degenerate);
      },
      py::arg("xs"), py::arg("ys"));
  m.def(
      "fit_line", [](const std::vector<double>& xs, const std::vector<double>& ys) { return risk::fit_line(xs, ys); },
      py::arg("xs"), py::arg("ys"));
  m.def("calibration_preset", &risk::calibration_preset, py::arg("name"));
  m.def(
      "estimate_risk", [](double js, const py::object& cal) { return risk::estimate_risk(js, calibration_arg(cal)); },
      py::arg("js"), py::arg("calibration") = "sorted");
  m.def("overfitting_level", &risk::overfitting_level, py::arg("train_accuracy"), py::arg("test_accuracy"));

  m.def(
      "auc",
      [](const std::vector<double>& members, const std::vector<double>& nonmembers) {
        return metrics::auc(members, nonmembers);
      },
      py::arg("member_scores"), py::arg("nonmember_scores"));

  m.def(
      "attack_names",
      [] {
        std::vector<std::string> out;
        for (auto k : attacks::standard_attacks()) out.emplace_back(attacks::attack_name(k));
        return out;
      });

  m.def(
      "parse_scenario", [](const std::string& yaml) { return harness::scenario_to_json(harness::parse_scenario(yaml)).dump(); },
      py::arg("yaml"), "Validated, normalized scenario as JSON text.");
  m.def(
      "run_scenario",
      [](const std::string& yaml) {
        const auto s = harness::parse_scenario(yaml);
        py::gil_scoped_release release;
        return report_line(harness::run_scenario(s));
      },
      py::arg("yaml"), "Runs a scenario given as YAML text; returns the report as one JSON line.");
  m.def(
      "run_scenario_file",
      [](const std::filesystem::path& path) {
        const auto s = harness::load_scenario(path);
        py::gil_scoped_release release;
        return report_line(harness::run_scenario(s));
      },
      py::arg("path"));
}
