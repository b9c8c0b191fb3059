#include "cqa/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cqa/error.hpp"
#include "cqa/io.hpp"

namespace cqa {
namespace {

using json = nlohmann::json;

constexpr std::string_view kReportHeader = "#cqa-report v1";

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const Index n = static_cast<Index>(rows.size());
  const Index k = n ? static_cast<Index>(rows[0].size()) : 0;
  Matrix m(n, k);
  for (Index i = 0; i < n; ++i) {
    if (static_cast<Index>(rows[i].size()) != k) throw DataError("report: ragged matrix");
    for (Index c = 0; c < k; ++c) m(i, c) = rows[i][c];
  }
  return m;
}

json eval_to_json(const EvalReport& r) {
  const GapCurve& g = r.gap_curve;
  return json{{"kind", "eval"},
              {"f1_y", r.f1_y},
              {"auc_c", r.auc_c},
              {"leak", r.leak},
              {"leak_unclamped", r.leak_unclamped},
              {"dis", r.dis},
              {"ois", r.ois},
              {"ois_clamped", r.ois_clamped},
              {"skipped_concepts", r.skipped_concepts},
              {"concept_names", r.concept_names},
              {"gap_curve", {{"gaps", g.gaps}, {"order", g.order}, {"f1_cbm", g.f1_cbm}, {"f1_gt", g.f1_gt}}},
              {"relevance_learned", matrix_to_json(r.relevance_learned.entries())},
              {"relevance_gt", matrix_to_json(r.relevance_gt.entries())},
              {"metadata",
               {{"model", r.metadata.model},
                {"seed", r.metadata.seed},
                {"created_at", r.metadata.created_at},
                {"config_digest", r.metadata.config_digest}}}};
}

EvalReport eval_from_json(const json& j) {
  if (j.at("kind") != "eval") throw DataError("report: expected an eval report");
  EvalReport r;
  r.f1_y = j.at("f1_y").get<double>();
  r.auc_c = j.at("auc_c").get<double>();
  r.leak = j.at("leak").get<double>();
  r.leak_unclamped = j.at("leak_unclamped").get<double>();
  r.dis = j.at("dis").get<double>();
  r.ois = j.at("ois").get<double>();
  r.ois_clamped = j.at("ois_clamped").get<double>();
  r.skipped_concepts = j.at("skipped_concepts").get<std::vector<int>>();
  r.concept_names = j.at("concept_names").get<std::vector<std::string>>();
  const auto& g = j.at("gap_curve");
  r.gap_curve.gaps = g.at("gaps").get<std::vector<double>>();
  r.gap_curve.order = g.at("order").get<std::vector<int>>();
  r.gap_curve.f1_cbm = g.at("f1_cbm").get<std::vector<double>>();
  r.gap_curve.f1_gt = g.at("f1_gt").get<std::vector<double>>();
  r.relevance_learned = RelevanceMatrix(matrix_from_json(j.at("relevance_learned")));
  r.relevance_gt = RelevanceMatrix(matrix_from_json(j.at("relevance_gt")));
  const auto& m = j.at("metadata");
  r.metadata.model = m.at("model").get<std::string>();
  r.metadata.seed = m.at("seed").get<std::uint64_t>();
  r.metadata.created_at = m.at("created_at").get<std::string>();
  r.metadata.config_digest = m.at("config_digest").get<std::string>();
  return r;
}

json parse_body(std::string_view text) {
  const auto nl = text.find('\n');
  if (text.substr(0, nl) != kReportHeader) throw DataError("report: missing '#cqa-report v1' header");
  if (nl == std::string_view::npos) throw DataError("report: missing body");
  try {
    return json::parse(text.substr(nl + 1));
  } catch (const json::exception& e) {
    throw DataError(std::string("report: malformed JSON: ") + e.what());
  }
}

std::string with_header(const json& body) { return std::string(kReportHeader) + "\n" + body.dump(1) + "\n"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"f1_y", "auc_c", "leak", "dis", "ois", "ois_clamped"};
  return names;
}

double metric_value(const EvalReport& r, const std::string& name) {
  if (name == "f1_y") return r.f1_y;
  if (name == "auc_c") return r.auc_c;
  if (name == "leak") return r.leak;
  if (name == "dis") return r.dis;
  if (name == "ois") return r.ois;
  if (name == "ois_clamped") return r.ois_clamped;
  throw DataError("report: unknown metric '" + name + "'");
}

EvalReport evaluate_model(const LabeledDataset& ds, const ConceptMatrix& predicted_concepts,
                          const LabelVector& predicted_labels, const SolverConfig& cfg) {
  const auto test = ds.rows(Split::kTest);
  if (test.empty()) throw DataError("evaluate: test split is empty");
  if (predicted_concepts.rows() != ds.size() || predicted_concepts.cols() != ds.num_concepts()) {
    throw DataError("evaluate: predicted concepts must be " + std::to_string(ds.size()) + "x" +
                    std::to_string(ds.num_concepts()));
  }
  LabelVector labels_test;
  if (predicted_labels.size() == ds.size()) {
    labels_test = predicted_labels.select(test);
  } else if (predicted_labels.size() == static_cast<Index>(test.size())) {
    labels_test = predicted_labels;
  } else {
    throw DataError("evaluate: predicted labels cover neither all rows nor the test rows");
  }

  const ConceptMatrix pred_test = predicted_concepts.select_rows(test);
  const ConceptMatrix truth_test = ds.concepts().select_rows(test);

  EvalReport r;
  auto step = [](const char* what, auto&& fn) {
    try {
      return fn();
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("evaluate (") + what + "): " + e.what());
    } catch (const DataError& e) {
      throw DataError(std::string("evaluate (") + what + "): " + e.what());
    }
  };
  r.f1_y = step("f1", [&] { return macro_f1(labels_test, ds.labels().select(test)); });
  const ConceptAuc auc = step("auc", [&] { return concept_auc(pred_test, truth_test); });
  r.auc_c = auc.mean;
  r.skipped_concepts = auc.skipped;
  r.gap_curve = step("leak", [&] { return leak_gaps(ds, predicted_concepts, cfg); });
  const LeakScore ls = step("leak", [&] { return leak(r.gap_curve); });
  r.leak = ls.value;
  r.leak_unclamped = ls.unclamped;
  ProbeMetrics probes = step("dci/ois", [&] { return dci_and_ois(pred_test, truth_test, cfg); });
  r.dis = probes.dci.dis;
  r.ois = probes.ois.ois;
  r.ois_clamped = probes.ois.ois_clamped;
  r.relevance_learned = std::move(probes.ois.learned);
  r.relevance_gt = std::move(probes.ois.ground_truth);
  r.concept_names = ds.vocabulary().names();
  r.metadata.seed = cfg.seed;
  return r;
}

AggregateReport aggregate(std::vector<EvalReport> reports) {
  if (reports.empty()) throw DataError("aggregate: no runs");
  std::stable_sort(reports.begin(), reports.end(),
                   [](const EvalReport& a, const EvalReport& b) { return a.metadata.seed < b.metadata.seed; });
  AggregateReport out;
  out.run_count = static_cast<int>(reports.size());
  const double n = static_cast<double>(reports.size());
  for (const auto& name : metric_names()) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(metric_value(r, name));
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    MetricSummary s;
    s.mean = sum / n;
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.std = std::sqrt(ss / (n - 1.0));
    }
    out.metrics[name] = s;
  }
  out.runs = std::move(reports);
  return out;
}

std::string format_report(const EvalReport& report) { return with_header(eval_to_json(report)); }

EvalReport parse_report(std::string_view text) {
  const json body = parse_body(text);
  try {
    return eval_from_json(body);
  } catch (const json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

std::string format_aggregate(const AggregateReport& report) {
  json metrics = json::object();
  for (const auto& [name, s] : report.metrics) metrics[name] = {{"mean", s.mean}, {"std", s.std}};
  json runs = json::array();
  for (const auto& r : report.runs) runs.push_back(eval_to_json(r));
  return with_header(json{{"kind", "aggregate"},
                          {"run_count", report.run_count},
                          {"metrics", std::move(metrics)},
                          {"runs", std::move(runs)}});
}

AggregateReport parse_aggregate(std::string_view text) {
  const json body = parse_body(text);
  try {
    if (body.at("kind") != "aggregate") throw DataError("report: expected an aggregate report");
    AggregateReport out;
    out.run_count = body.at("run_count").get<int>();
    for (const auto& [name, s] : body.at("metrics").items()) {
      out.metrics[name] = {s.at("mean").get<double>(), s.at("std").get<double>()};
    }
    for (const auto& r : body.at("runs")) out.runs.push_back(eval_from_json(r));
    if (out.run_count < 1 || out.run_count != static_cast<int>(out.runs.size())) {
      throw DataError("report: run_count does not match the runs array");
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

std::string format_gap_curves(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "model,seed,l,concept_index,concept_name,gap,f1_cbm,f1_gt\n";
  for (const auto& r : reports) {
    const GapCurve& g = r.gap_curve;
    for (std::size_t l = 0; l < g.gaps.size(); ++l) {
      const int c = g.order[l];
      const std::string name = c < static_cast<int>(r.concept_names.size()) ? r.concept_names[c] : "";
      os << csv_field(r.metadata.model) << ',' << r.metadata.seed << ',' << l + 1 << ',' << c << ','
         << csv_field(name) << ',' << format_real(g.gaps[l]) << ',' << format_real(g.f1_cbm[l]) << ','
         << format_real(g.f1_gt[l]) << '\n';
    }
  }
  return os.str();
}

void export_gap_curves(const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
  write_file_atomic(path, format_gap_curves(reports));
}

std::string format_relevance_heatmaps(const EvalReport& report) {
  std::ostringstream os;
  os << "matrix,source,target,value\n";
  auto emit = [&](const char* tag, const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) os << tag << ',' << i << ',' << j << ',' << format_real(m(i, j)) << '\n';
    }
  };
  emit("learned", report.relevance_learned.entries());
  emit("ground_truth", report.relevance_gt.entries());
  return os.str();
}

void export_relevance_heatmaps(const EvalReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, format_relevance_heatmaps(report));
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace cqa
