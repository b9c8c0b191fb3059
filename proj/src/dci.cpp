#include <algorithm>
#include <cmath>

#include "cqa/error.hpp"
#include "cqa/metrics.hpp"
#include "cqa/random.hpp"

namespace cqa {
namespace {

void check_probe_inputs(const ConceptMatrix& predicted, const ConceptMatrix& truth) {
  if (predicted.rows() != truth.rows()) throw DataError("dci: predicted and truth row counts differ");
  if (predicted.cols() != truth.cols()) throw DataError("dci: predicted and truth concept counts differ");
  if (!truth.is_binary()) throw DataError("dci: truth must be binary labels");
  if (truth.cols() < 2) throw NumericalError("dci: needs k >= 2 concepts (entropy base k)");
}

std::uint64_t gt_probe_seed(const SolverConfig& cfg) {
  // Shared seeding makes the ground-truth probe identical to the learned probe
  // whenever the inputs coincide.
  return cfg.probe_seeding == ProbeSeeding::kShared ? cfg.seed : derive_seed(cfg.seed, "gt");
}

}  // namespace

RelevanceMatrix probe_relevance(const Matrix& sources, const ConceptMatrix& targets,
                                const SolverConfig& cfg, std::string_view stream) {
  if (sources.rows() != targets.rows()) throw DataError("probe: row counts differ");
  if (!targets.is_binary()) throw DataError("probe: targets must be binary labels");
  const Index k_src = sources.cols();
  const Index k_tgt = targets.cols();
  if (k_src != k_tgt) throw DataError("probe: relevance matrix must be square");
  Matrix r = Matrix::Zero(k_src, k_tgt);
  for (Index j = 0; j < k_tgt; ++j) {
    std::vector<int> y(static_cast<std::size_t>(targets.rows()));
    for (Index i = 0; i < targets.rows(); ++i) y[i] = targets.values()(i, j) != 0.0 ? 1 : 0;
    SolverConfig forest_cfg = cfg;
    forest_cfg.seed = derive_seed(cfg.seed, stream, static_cast<std::uint64_t>(j));
    forest_cfg.forest_feature_fraction = cfg.probe_feature_fraction;
    const ForestModel forest = train_forest(sources, LabelVector(std::move(y), 2), forest_cfg);
    r.col(j) = forest.importances();
  }
  return RelevanceMatrix(std::move(r));
}

DciResult dci_from_relevance(const RelevanceMatrix& relevance) {
  const Index k = relevance.size();
  if (k < 2) throw NumericalError("dci: needs k >= 2 concepts (entropy base k)");
  const Matrix& r = relevance.entries();
  const double log_k = std::log(static_cast<double>(k));
  const double total = r.sum();
  if (!(total > 0.0)) throw NumericalError("dci: relevance matrix is all zero (no informative targets)");

  DciResult out;
  out.per_concept_d.assign(static_cast<std::size_t>(k), 0.0);
  out.weights.assign(static_cast<std::size_t>(k), 0.0);
  for (Index i = 0; i < k; ++i) {
    const double row_sum = r.row(i).sum();
    if (row_sum <= 0.0) continue;
    double entropy = 0.0;
    for (Index j = 0; j < k; ++j) {
      const double pij = r(i, j) / row_sum;
      if (pij > 0.0) entropy -= pij * std::log(pij) / log_k;
    }
    out.per_concept_d[i] = std::clamp(1.0 - entropy, 0.0, 1.0);
    out.weights[i] = row_sum / total;
  }
  for (Index i = 0; i < k; ++i) out.dis += out.weights[i] * out.per_concept_d[i];
  out.dis = std::clamp(out.dis, 0.0, 1.0);
  out.relevance = relevance;
  return out;
}

DciResult dci(const ConceptMatrix& predicted, const ConceptMatrix& truth, const SolverConfig& cfg) {
  check_probe_inputs(predicted, truth);
  return dci_from_relevance(probe_relevance(predicted.values(), truth, cfg, "probe"));
}

double ois_from_relevance(const RelevanceMatrix& learned, const RelevanceMatrix& ground_truth) {
  if (learned.size() != ground_truth.size()) throw DataError("ois: relevance matrix sizes differ");
  const Index k = learned.size();
  if (k == 0) throw DataError("ois: empty relevance matrices");
  return 2.0 / static_cast<double>(k) * (learned.entries() - ground_truth.entries()).squaredNorm();
}

OisResult ois(const ConceptMatrix& predicted, const ConceptMatrix& truth, const SolverConfig& cfg) {
  return dci_and_ois(predicted, truth, cfg).ois;
}

ProbeMetrics dci_and_ois(const ConceptMatrix& predicted, const ConceptMatrix& truth, const SolverConfig& cfg) {
  check_probe_inputs(predicted, truth);
  RelevanceMatrix learned = probe_relevance(predicted.values(), truth, cfg, "probe");
  SolverConfig gt_cfg = cfg;
  gt_cfg.seed = gt_probe_seed(cfg);
  RelevanceMatrix gt = probe_relevance(truth.values(), truth, gt_cfg, "probe");

  ProbeMetrics out;
  out.dci = dci_from_relevance(learned);
  out.ois.ois = ois_from_relevance(learned, gt);
  out.ois.ois_clamped = std::min(out.ois.ois, 1.0);
  out.ois.learned = std::move(learned);
  out.ois.ground_truth = std::move(gt);
  return out;
}

}  // namespace cqa
