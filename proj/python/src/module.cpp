#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "causaldebias/errors.hpp"
#include "causaldebias/pipeline.hpp"
#include "causaldebias/service.hpp"
#include "causaldebias/synthetic.hpp"

namespace py = pybind11;
using namespace cdb;

namespace {

CsvOptions make_options(std::string label, std::vector<std::string> nominal,
                        std::vector<std::string> ordinal, std::optional<std::string> favorable) {
  CsvOptions o;
  o.label = std::move(label);
  o.nominal = std::move(nominal);
  o.ordinal = std::move(ordinal);
  o.favorable = std::move(favorable);
  return o;
}

std::vector<double> column_values(const Dataset& d, const std::string& name) {
  auto v = d.column(name).values();
  return {v.begin(), v.end()};
}

}  // namespace

PYBIND11_MODULE(_causaldebias, m) {
  m.doc() = "Causal-model based dataset debiasing (C++ core)";

  static py::exception<Error> error(m, "CausalDebiasError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error((e.kind() + ": " + e.what()).c_str());
    }
  });

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("rows", &Dataset::rows)
      .def_property_readonly("columns", &Dataset::column_names)
      .def_property_readonly("label", &Dataset::label)
      .def_property_readonly("favorable", &Dataset::favorable_level)
      .def("column", &column_values, py::arg("name"))
      .def("levels", [](const Dataset& d, const std::string& name) { return d.column(name).schema().levels; })
      .def("kind", [](const Dataset& d, const std::string& name) { return std::string(to_string(d.column(name).kind())); })
      .def("to_csv", [](const Dataset& d) { return write_csv(d); })
      .def("__len__", &Dataset::rows)
      .def("__eq__", [](const Dataset& a, const Dataset& b) { return a == b; });

  m.def("load_csv",
        [](const std::string& text, std::string label, std::vector<std::string> nominal,
           std::vector<std::string> ordinal, std::optional<std::string> favorable) {
          return load_csv(text, make_options(std::move(label), std::move(nominal), std::move(ordinal),
                                             std::move(favorable)));
        },
        py::arg("text"), py::arg("label"), py::arg("nominal") = std::vector<std::string>{},
        py::arg("ordinal") = std::vector<std::string>{}, py::arg("favorable") = py::none());

  m.def("load_csv_like", [](const std::string& text, const Dataset& ref) { return load_csv_like(text, ref); },
        py::arg("text"), py::arg("reference"));

  m.def("default_hiring_spec", [] { return dump(to_json(default_hiring_spec())); });
  m.def("synthesize",
        [](std::uint64_t seed, std::optional<std::string> spec_json) {
          SyntheticSpec spec = spec_json ? synthetic_spec_from_json(Json::parse(*spec_json))
                                         : default_hiring_spec();
          return generate_synthetic(spec, seed);
        },
        py::arg("seed"), py::arg("spec_json") = py::none());

  py::class_<CausalModel>(m, "CausalModel")
      .def_property_readonly("stage", [](const CausalModel& mdl) { return std::string(to_string(mdl.stage())); })
      .def_property_readonly("total_bic", &CausalModel::total_bic)
      .def("graph_json", [](const CausalModel& mdl) { return dump(to_json(mdl.graph())); })
      .def("view_json", [](const CausalModel& mdl, const Dataset& d) { return dump(model_view_json(mdl, d)); })
      .def("logs_json", [](const CausalModel& mdl) { return dump(to_json(edit_log_view(mdl))); })
      .def("alpha", &CausalModel::alpha)
      .def("apply",
           [](CausalModel& mdl, const Dataset& d, const std::string& edit_json) {
             const Edit e = edit_from_json(Json::parse(edit_json), mdl.stage());
             return mdl.apply(d, e).bic_delta;
           },
           py::arg("data"), py::arg("edit_json"))
      .def("apply_script",
           [](CausalModel& mdl, const Dataset& d, const std::string& script_json) {
             std::vector<double> deltas;
             for (const auto& s : apply_script(mdl, d, edit_script_from_json(Json::parse(script_json))))
               deltas.push_back(s.outcome.bic_delta);
             return deltas;
           },
           py::arg("data"), py::arg("script_json"))
      .def("set_stage", [](CausalModel& mdl, const std::string& s) { return mdl.set_stage(stage_from_string(s)); })
      .def("find_paths", [](const CausalModel& mdl, const std::string& s, const std::string& t) { return find_paths(mdl, s, t); })
      .def("affected_nodes", [](const CausalModel& mdl) { return affected_nodes(mdl); })
      .def("to_json",
           [](const CausalModel& mdl, const std::string& options_json) {
             return dump(model_file_json(mdl, csv_options_from_json(Json::parse(options_json))));
           },
           py::arg("data_options_json"));

  m.def("discover",
        [](const Dataset& d, double p, bool exclude_label, int max_depth) {
          PcOptions o;
          o.p_threshold = p;
          o.exclude_label = exclude_label;
          o.max_depth = max_depth;
          return discover_model(d, o);
        },
        py::arg("data"), py::arg("p") = 0.01, py::arg("exclude_label") = false, py::arg("max_depth") = 3,
        py::call_guard<py::gil_scoped_release>());

  m.def("load_model",
        [](const std::string& model_json, const Dataset& d) {
          return replay_model_file(model_file_from_json(Json::parse(model_json)), d);
        },
        py::arg("model_json"), py::arg("data"));

  m.def("debias",
        [](const CausalModel& mdl, const Dataset& d, std::uint64_t seed, const std::string& noise) {
          DebiasOptions o;
          o.noise = noise_mode_from_string(noise);
          DebiasResult r = generate_debiased(mdl, d, seed, o);
          return py::make_tuple(r.data, dump(debias_metadata_json(r)));
        },
        py::arg("model"), py::arg("data"), py::arg("seed"), py::arg("noise") = "per-term");

  m.def("evaluate",
        [](const Dataset& original, const Dataset& debiased, const std::string& groups_json,
           const std::string& classifier, std::size_t k, std::uint64_t seed) {
          EvaluateOptions o;
          o.classifier = classifier;
          o.k = k;
          o.seed = seed;
          Evaluation ev;
          const GroupSpec g = group_spec_from_json(Json::parse(groups_json));
          {
            py::gil_scoped_release release;
            ev = evaluate(original, debiased, g, o);
          }
          return dump(to_json(ev));
        },
        py::arg("original"), py::arg("debiased"), py::arg("groups_json"),
        py::arg("classifier") = "logistic", py::arg("k") = 10, py::arg("seed") = 0);

  m.def("statistical_parity_diff",
        [](const Dataset& d, const std::string& column, const std::string& privileged) {
          return statistical_parity_diff(d, GroupSpec::simple(column, privileged));
        },
        py::arg("data"), py::arg("column"), py::arg("privileged"));
  m.def("individual_bias", [](const Dataset& d, std::size_t k) { return individual_bias(d, k); },
        py::arg("data"), py::arg("k") = 10);
  m.def("gower_distortion", &gower_distortion, py::arg("original"), py::arg("debiased"));

  py::class_<Service>(m, "Service")
      .def(py::init([](const std::string& snapshot_dir) {
             ServiceOptions o;
             o.snapshot_dir = snapshot_dir;
             return std::make_unique<Service>(o);
           }),
           py::arg("snapshot_dir") = "")
      .def("handle",
           [](Service& s, const std::string& method, const std::string& path, const std::string& body,
              std::map<std::string, std::string> query, const std::string& content_type) {
             HttpRequest r{method, path, std::move(query), body, content_type};
             HttpResponse out;
             {
               py::gil_scoped_release release;
               out = s.handle(r);
             }
             return py::make_tuple(out.status, out.content_type, py::bytes(out.body));
           },
           py::arg("method"), py::arg("path"), py::arg("body") = "",
           py::arg("query") = std::map<std::string, std::string>{},
           py::arg("content_type") = "application/json");

  m.attr("__version__") = "0.1.0";
}
