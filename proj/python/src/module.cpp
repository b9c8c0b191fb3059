// Python bindings. Matrices cross the boundary as float64 numpy arrays; concept
// matrices passed as ground truth must be 0/1.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cqa/cbm.hpp"
#include "cqa/config.hpp"
#include "cqa/error.hpp"
#include "cqa/io.hpp"
#include "cqa/log.hpp"
#include "cqa/metrics.hpp"
#include "cqa/pipeline.hpp"
#include "cqa/report.hpp"
#include "cqa/synth.hpp"

namespace py = pybind11;
using namespace cqa;

namespace {

ConceptMatrix truth_matrix(const Matrix& m) { return ConceptMatrix(m, ConceptKind::kBinaryLabels); }
ConceptMatrix score_matrix(const Matrix& m) { return ConceptMatrix(m, ConceptKind::kScores); }

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  for (const auto& name : metric_names()) d[py::str(name)] = metric_value(r, name);
  d["leak_unclamped"] = r.leak_unclamped;
  d["gap_curve"] = py::dict(py::arg("gaps") = r.gap_curve.gaps, py::arg("order") = r.gap_curve.order,
                            py::arg("f1_cbm") = r.gap_curve.f1_cbm, py::arg("f1_gt") = r.gap_curve.f1_gt);
  d["relevance_learned"] = r.relevance_learned.entries();
  d["relevance_gt"] = r.relevance_gt.entries();
  d["skipped_concepts"] = r.skipped_concepts;
  d["seed"] = r.metadata.seed;
  return d;
}

WorldSpec preset_world(const std::string& preset, std::uint64_t seed, int n, int k, double feature_noise) {
  WorldSpec spec;
  if (preset == "shapes3d_like") {
    spec = shapes3d_like_world(seed, n);
  } else if (preset == "attributes") {
    spec = attribute_world(seed, k, n);
  } else {
    throw ConfigError("unknown world preset '" + preset + "' (shapes3d_like, attributes)");
  }
  spec.feature_noise = feature_noise;
  return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Concept quality analysis for concept bottleneck models";

  auto base = py::register_exception<Error>(m, "CqaError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  m.def("set_quiet", [](bool quiet) {
    if (quiet) set_log_sink(nullptr);
  }, py::arg("quiet") = true, "Silence library warnings.");

  py::class_<LabeledDataset>(m, "Dataset")
      .def_property_readonly("features", &LabeledDataset::features)
      .def_property_readonly("concepts", [](const LabeledDataset& d) { return d.concepts().values(); })
      .def_property_readonly("labels", [](const LabeledDataset& d) { return d.labels().values(); })
      .def_property_readonly("num_classes", &LabeledDataset::num_classes)
      .def_property_readonly("concept_names", [](const LabeledDataset& d) { return d.vocabulary().names(); })
      .def_property_readonly("groups", [](const LabeledDataset& d) { return d.vocabulary().groups(); })
      .def_property_readonly("split",
                             [](const LabeledDataset& d) {
                               std::vector<std::string> s;
                               for (Split x : d.split()) s.emplace_back(to_string(x));
                               return s;
                             })
      .def("rows", [](const LabeledDataset& d, const std::string& split) {
        const auto s = split_from_string(split);
        if (!s) throw DataError("unknown split '" + split + "'");
        return d.rows(*s);
      })
      .def("save", [](const LabeledDataset& d, const fs::path& p) { save_dataset(d, p); })
      .def("__len__", &LabeledDataset::size);

  m.def("generate_world", [](const std::string& preset, std::uint64_t seed, int n, int k, double noise) {
    return generate_world(preset_world(preset, seed, n, k, noise));
  }, py::arg("preset") = "shapes3d_like", py::arg("seed") = 0, py::arg("n") = 6000, py::arg("k") = 16,
        py::arg("feature_noise") = 0.0, "Synthetic dataset from a preset world; k applies to 'attributes'.");
  m.def("load_dataset", [](const fs::path& p) { return load_dataset(p); });

  m.def("calibrate_flip_rates", [](double precision, double recall, double prevalence) {
    const FlipRates f = calibrate_flip_rates(precision, recall, prevalence);
    return std::make_pair(f.fpr, f.fnr);
  }, py::arg("precision"), py::arg("recall"), py::arg("prevalence") = 0.5, "Returns (fpr, fnr).");

  m.def(
      "simulate_annotator",
      [](const LabeledDataset& ds, double fpr, double fnr, std::optional<double> label_leak, std::uint64_t seed) {
        AnnotatorSpec a;
        a.flips = {FlipRates{fpr, fnr}};
        a.label_leak = label_leak;
        a.seed = seed;
        return simulate_annotator(ds, a).values();
      },
      py::arg("dataset"), py::arg("fpr") = 0.0, py::arg("fnr") = 0.0, py::arg("label_leak") = py::none(),
      py::arg("seed") = 0);

  m.def("entangle", [](const Matrix& predicted, double t) {
    return entangle(score_matrix(predicted), interpolated_mixing(static_cast<int>(predicted.cols()), t)).values();
  }, py::arg("predicted"), py::arg("t"), "Mix columns toward their mean: (1 - t) I + t / k.");

  // ---- metrics
  m.def("roc_auc", [](const std::vector<double>& scores, const std::vector<double>& truth) {
    return roc_auc(scores, truth);
  });
  m.def("concept_auc", [](const Matrix& predicted, const Matrix& truth) {
    return concept_auc(score_matrix(predicted), truth_matrix(truth)).mean;
  });
  m.def("macro_f1", [](const std::vector<int>& predicted, const std::vector<int>& truth, int num_classes) {
    return macro_f1(LabelVector(predicted, num_classes), LabelVector(truth, num_classes));
  }, py::arg("predicted"), py::arg("truth"), py::arg("num_classes") = 2);
  m.def("leak", [](const std::vector<double>& gaps, const std::vector<double>& f1_gt) {
    GapCurve c;
    c.gaps = gaps;
    c.f1_gt = f1_gt;
    return leak(c).value;
  }, py::arg("gaps"), py::arg("f1_gt"));
  m.def("dci_from_relevance", [](const Matrix& r) { return dci_from_relevance(RelevanceMatrix(r)).dis; });
  m.def("dci", [](const Matrix& predicted, const Matrix& truth, std::uint64_t seed) {
    SolverConfig cfg;
    cfg.seed = seed;
    return dci(score_matrix(predicted), truth_matrix(truth), cfg).dis;
  }, py::arg("predicted"), py::arg("truth"), py::arg("seed") = 0);
  m.def("ois", [](const Matrix& predicted, const Matrix& truth, std::uint64_t seed) {
    SolverConfig cfg;
    cfg.seed = seed;
    return ois(score_matrix(predicted), truth_matrix(truth), cfg).ois;
  }, py::arg("predicted"), py::arg("truth"), py::arg("seed") = 0);
  m.def("annotation_agreement", [](const Matrix& annotations, const LabeledDataset& ds) {
    const bool binary = (annotations.array() == 0.0 || annotations.array() == 1.0).all();
    const AgreementResult r = annotation_agreement(
        ConceptMatrix(annotations, binary ? ConceptKind::kBinaryLabels : ConceptKind::kScores), ds.concepts(),
        ds.vocabulary(), ds.rows(Split::kTrain));
    return std::make_pair(r.macro_precision, r.macro_recall);
  }, "Returns (macro precision, macro recall).");

  // ---- model
  py::class_<CbmModel>(m, "CbmModel")
      .def_property_readonly("num_concepts", &CbmModel::num_concepts)
      .def_property_readonly("inference_weights", [](const CbmModel& c) { return c.inference.weights(); })
      .def("predict_concepts", [](const CbmModel& c, const Matrix& x) { return predict_concepts(c, x).values(); })
      .def("predict_labels", [](const CbmModel& c, const Matrix& x) { return predict_labels(c, x).labels.values(); })
      .def("explain",
           [](const CbmModel& c, const Vector& x, int class_id) {
             const Explanation e = explain(c, x, class_id);
             std::vector<std::pair<int, double>> parts;
             for (const auto& p : e.contributions) parts.emplace_back(p.concept_index, p.value);
             return py::dict(py::arg("contributions") = parts, py::arg("bias") = e.bias,
                             py::arg("score") = e.score);
           })
      .def("save", [](const CbmModel& c, const fs::path& p) { save_model(c, p); });
  m.def("load_model", [](const fs::path& p) { return load_model(p); });

  m.def(
      "train_cbm",
      [](const LabeledDataset& ds, std::optional<Matrix> supervision, double concept_l2, std::uint64_t seed) {
        TrainConfig cfg;
        cfg.concept_l2 = concept_l2;
        cfg.solver.seed = seed;
        if (!supervision) return train_cbm(ds, cfg);
        const bool binary = (supervision->array() == 0.0 || supervision->array() == 1.0).all();
        return train_cbm(ds, ConceptMatrix(*supervision, binary ? ConceptKind::kBinaryLabels : ConceptKind::kScores),
                         cfg);
      },
      py::arg("dataset"), py::arg("supervision") = py::none(), py::arg("concept_l2") = 0.1, py::arg("seed") = 0,
      "Ground-truth supervision when none is given.");

  m.def("evaluate", [](const LabeledDataset& ds, const CbmModel& model, std::uint64_t seed) {
    SolverConfig cfg;
    cfg.seed = seed;
    return report_dict(
        evaluate_model(ds, predict_concepts(model, ds.features()), predict_labels(model, ds.features()).labels, cfg));
  }, py::arg("dataset"), py::arg("model"), py::arg("seed") = 0);

  // ---- pipeline
  m.def("run_pipeline", [](const std::string& config_json, std::uint64_t seed) {
    return report_dict(run_pipeline(parse_run_config(config_json), seed));
  }, py::arg("config_json"), py::arg("seed"), "Full pipeline for one seed from a JSON config string.");
  m.def(
      "run_suite",
      [](const fs::path& config, const std::vector<std::uint64_t>& seeds, const fs::path& out, int jobs) {
        const RunConfig cfg = load_run_config(config);
        std::ostringstream sink;
        const AggregateReport agg = cmd_suite(cfg, seeds.empty() ? cfg.seeds : seeds, out, jobs, sink);
        py::dict d;
        for (const auto& [name, s] : agg.metrics) d[py::str(name)] = std::make_pair(s.mean, s.std);
        return d;
      },
      py::arg("config"), py::arg("seeds") = std::vector<std::uint64_t>{}, py::arg("out") = fs::path("."),
      py::arg("jobs") = 1, "Returns {metric: (mean, std)}.");
}
