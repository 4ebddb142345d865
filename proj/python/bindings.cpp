#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "malbehave/error.hpp"
#include "malbehave/evaluation.hpp"
#include "malbehave/features.hpp"
#include "malbehave/model_io.hpp"
#include "malbehave/synthgen.hpp"

namespace py = pybind11;
using namespace malbehave;

namespace {

Algorithm parse_algorithm(const std::string& id) {
  const auto a = algorithm_from_id(id);
  if (!a) throw py::value_error("unknown algorithm '" + id + "'");
  return *a;
}

std::vector<AlgorithmConfig> configs_for(const std::optional<std::vector<std::string>>& ids, double cost,
                                         std::size_t min_split, std::size_t k) {
  std::vector<AlgorithmConfig> out;
  if (!ids) {
    for (Algorithm a : kAllAlgorithms) out.push_back({.algorithm = a, .cost = cost, .min_split = min_split, .k = k});
  } else {
    for (const auto& id : *ids) {
      out.push_back({.algorithm = parse_algorithm(id), .cost = cost, .min_split = min_split, .k = k});
    }
  }
  return out;
}

py::dict report_dict(const ErrorReport& r) {
  py::dict counts;
  counts["a"] = r.counts.a;
  counts["b"] = r.counts.b;
  counts["n_target"] = r.counts.n_target;
  counts["n_nontarget"] = r.counts.n_nontarget;
  py::dict target, nontarget, d;
  target["fp_pct"] = r.target.fp_pct;
  target["fn_pct"] = r.target.fn_pct;
  nontarget["fp_pct"] = r.nontarget.fp_pct;
  nontarget["fn_pct"] = r.nontarget.fn_pct;
  d["counts"] = counts;
  d["target"] = target;
  d["nontarget"] = nontarget;
  d["combined_error_pct"] = 100.0 * r.combined_error();
  return d;
}

py::list reports_list(const std::vector<NamedReport>& reports) {
  py::list out;
  for (const auto& r : reports) {
    py::dict d = report_dict(r.report);
    d["algorithm"] = r.id;
    d["name"] = r.name;
    out.append(d);
  }
  return out;
}

NamedReport report_from_dict(const py::dict& d) {
  const py::dict c = d["counts"].cast<py::dict>();
  return {d["algorithm"].cast<std::string>(), d["name"].cast<std::string>(),
          error_report({c["a"].cast<std::uint64_t>(), c["b"].cast<std::uint64_t>(),
                        c["n_target"].cast<std::uint64_t>(), c["n_nontarget"].cast<std::uint64_t>()})};
}

// Opaque holder: stl.h would otherwise convert the variant itself.
struct Model {
  TrainedModel inner;
};

Dataset extract_log(const std::string& text) {
  const auto runs = parse_artifact_log(std::string_view(text));
  for (const auto& run : runs) {
    const auto problems = validate_run(run);
    if (!problems.empty()) throw DatasetError("sample '" + run.sample_id + "': " + problems.front());
  }
  return build_dataset(runs, DatasetPurpose::Raw);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the malbehave library";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::list algorithms;
  for (Algorithm a : kAllAlgorithms) algorithms.append(std::string(algorithm_id(a)));
  m.attr("ALGORITHMS") = algorithms;

  m.def("feature_names", [] {
    const auto& names = default_layout().names();
    return std::vector<std::string>(names.begin(), names.end());
  });

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def_property_readonly("n_target", [](const Dataset& d) { return d.count(Label::Target); })
      .def_property_readonly("n_nontarget", [](const Dataset& d) { return d.count(Label::NonTarget); })
      .def_property_readonly("sample_ids",
                             [](const Dataset& d) {
                               std::vector<std::string> ids;
                               for (const auto& r : d.rows) ids.push_back(r.sample_id);
                               return ids;
                             })
      .def_property_readonly("labels",
                             [](const Dataset& d) {
                               std::vector<std::optional<std::string>> out;
                               for (const auto& r : d.rows) {
                                 out.push_back(r.label ? std::optional<std::string>(to_string(*r.label))
                                                       : std::nullopt);
                               }
                               return out;
                             })
      .def("features",
           [](const Dataset& d) {
             std::vector<std::vector<double>> out;
             for (const auto& r : d.rows) out.emplace_back(r.values.begin(), r.values.end());
             return out;
           })
      .def("to_matrix", [](const Dataset& d) {
        std::ostringstream out;
        write_feature_matrix(out, d, default_layout());
        return out.str();
      });

  m.def(
      "synthesize",
      [](std::uint64_t seed, std::size_t n_target, std::size_t n_nontarget, double separation) {
        if (separation < 0.0 || separation > 1.0) throw py::value_error("separation must lie in [0, 1]");
        return emit_log(generate(
            {.seed = seed, .n_target = n_target, .n_nontarget = n_nontarget, .separation = separation}));
      },
      py::arg("seed"), py::arg("n_target"), py::arg("n_nontarget"), py::arg("separation") = 1.0,
      "Artifact-log text for a synthetic corpus.");

  m.def("extract", &extract_log, py::arg("log"), "Parse, validate and extract an artifact log.");

  m.def(
      "read_matrix",
      [](const std::string& text) {
        std::istringstream in(text);
        return read_feature_matrix(in);
      },
      py::arg("text"));

  py::class_<Model>(m, "Model")
      .def_property_readonly("algorithm",
                             [](const Model& model) { return std::string(algorithm_id(algorithm_of(model.inner))); })
      .def("predict",
           [](const Model& model, const Dataset& data) {
             std::vector<std::string> out;
             for (const auto& row : data.rows) out.emplace_back(to_string(predict(model.inner, row)));
             return out;
           })
      .def("save", [](const Model& model) { return py::bytes(save_model(model.inner)); });

  m.def(
      "train",
      [](const Dataset& data, const std::string& algorithm, std::uint64_t seed, double cost,
         std::size_t min_split, std::size_t k) {
        return Model{train({.algorithm = parse_algorithm(algorithm), .cost = cost, .min_split = min_split, .k = k},
                           data, seed)};
      },
      py::arg("data"), py::arg("algorithm") = "svm", py::arg("seed") = 0, py::arg("cost") = 0.01,
      py::arg("min_split") = 5, py::arg("k") = 980);

  m.def(
      "load_model",
      [](const py::bytes& bytes) {
        const std::string text = bytes;
        return Model{load_model(std::string_view(text))};
      },
      py::arg("data"));

  m.def(
      "evaluate",
      [](const Model& model, const Dataset& test) {
        return report_dict(evaluate([&model](const FeatureVector& x) { return predict(model.inner, x); }, test));
      },
      py::arg("model"), py::arg("test"));

  m.def(
      "error_report",
      [](std::uint64_t a, std::uint64_t b, std::uint64_t n_target, std::uint64_t n_nontarget) {
        return report_dict(error_report({a, b, n_target, n_nontarget}));
      },
      py::arg("a"), py::arg("b"), py::arg("n_target"), py::arg("n_nontarget"));

  m.def(
      "format_errors",
      [](double fp_pct, double fn_pct) { return format_errors({fp_pct, fn_pct}); }, py::arg("fp_pct"),
      py::arg("fn_pct"));

  m.def(
      "run_experiment",
      [](const Dataset& train_set, const Dataset& test_set, std::optional<std::vector<std::string>> algorithms,
         std::uint64_t seed, double cost, std::size_t min_split, std::size_t k) {
        return reports_list(run_experiment(train_set, test_set, configs_for(algorithms, cost, min_split, k), seed));
      },
      py::arg("train"), py::arg("test"), py::arg("algorithms") = py::none(), py::arg("seed") = 0,
      py::arg("cost") = 0.01, py::arg("min_split") = 5, py::arg("k") = 980);

  m.def(
      "flip_experiment",
      [](const Dataset& a, const Dataset& b, std::optional<std::vector<std::string>> algorithms, std::uint64_t seed,
         double cost, std::size_t min_split, std::size_t k) {
        const auto r = flip_experiment(a, b, configs_for(algorithms, cost, min_split, k), seed);
        py::dict d;
        d["forward"] = reports_list(r.forward);
        d["flipped"] = reports_list(r.flipped);
        return d;
      },
      py::arg("a"), py::arg("b"), py::arg("algorithms") = py::none(), py::arg("seed") = 0, py::arg("cost") = 0.01,
      py::arg("min_split") = 5, py::arg("k") = 980);

  m.def(
      "render_table",
      [](const py::list& reports) {
        std::vector<NamedReport> named;
        for (const auto& r : reports) named.push_back(report_from_dict(r.cast<py::dict>()));
        return render_table(named);
      },
      py::arg("reports"));
}
