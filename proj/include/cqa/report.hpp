#pragma once

// Evaluation reports, cross-seed aggregation and plot-ready CSV exports.
//
// Report file: a "#cqa-report v1" line followed by one JSON document whose
// "kind" is "eval" or "aggregate".

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cqa/datamodel.hpp"
#include "cqa/learners.hpp"
#include "cqa/metrics.hpp"

namespace cqa {

struct ReportMetadata {
  std::string model = "cbm";
  std::uint64_t seed = 0;
  std::string created_at;     // excluded from determinism comparisons
  std::string config_digest;  // hex; computed without timestamps
};

struct EvalReport {
  double f1_y = 0.0;
  double auc_c = 0.0;
  double leak = 0.0;
  double leak_unclamped = 0.0;
  double dis = 0.0;
  double ois = 0.0;
  double ois_clamped = 0.0;
  GapCurve gap_curve;
  RelevanceMatrix relevance_learned;
  RelevanceMatrix relevance_gt;
  std::vector<int> skipped_concepts;
  std::vector<std::string> concept_names;
  ReportMetadata metadata;
};

// Metric names in report order.
const std::vector<std::string>& metric_names();
// Value of a metric by name ("f1_y", "auc_c", "leak", "dis", "ois", "ois_clamped").
double metric_value(const EvalReport& report, const std::string& name);

// predicted_concepts covers every row of ds (LEAK trains on the train split);
// predicted_labels covers every row or just the test rows. Everything else is
// scored on the test rows.
EvalReport evaluate_model(const LabeledDataset& ds, const ConceptMatrix& predicted_concepts,
                          const LabelVector& predicted_labels, const SolverConfig& cfg);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) estimator; 0 for one run
};

struct AggregateReport {
  std::map<std::string, MetricSummary> metrics;
  int run_count = 0;
  std::vector<EvalReport> runs;  // ordered by seed
};

// Throws DataError on an empty list. Sums are taken over sorted values, so the
// result does not depend on run order.
AggregateReport aggregate(std::vector<EvalReport> reports);

std::string format_report(const EvalReport& report);
EvalReport parse_report(std::string_view text);
std::string format_aggregate(const AggregateReport& report);
AggregateReport parse_aggregate(std::string_view text);

// One line per run and prefix length:
//   model,seed,l,concept_index,concept_name,gap,f1_cbm,f1_gt
std::string format_gap_curves(const std::vector<EvalReport>& reports);
void export_gap_curves(const std::vector<EvalReport>& reports, const std::filesystem::path& path);

// Long format: matrix,source,target,value with matrix in {learned, ground_truth}.
std::string format_relevance_heatmaps(const EvalReport& report);
void export_relevance_heatmaps(const EvalReport& report, const std::filesystem::path& path);

// Current UTC time as ISO-8601.
std::string utc_timestamp();

}  // namespace cqa
