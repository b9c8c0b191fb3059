#pragma once

// Concept-quality metrics: label F1, concept AUC, the leakage gap curve and
// LEAK score, DCI disentanglement, the oracle impurity score, and
// annotator-vs-ground-truth agreement.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cqa/datamodel.hpp"
#include "cqa/learners.hpp"

namespace cqa {

// ---- Accuracy --------------------------------------------------------------

// Mann-Whitney estimate of ROC-AUC, ties counted 1/2. nullopt when truth is
// single-class.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const double> truth);

struct ConceptAuc {
  double mean = 0.0;
  std::vector<std::optional<double>> per_concept;  // nullopt for skipped concepts
  std::vector<int> skipped;                         // single-class truth columns
};

// Mean per-concept AUC over concepts whose truth column has both classes.
// Throws NumericalError when every concept is skipped.
ConceptAuc concept_auc(const ConceptMatrix& predicted, const ConceptMatrix& truth);

// Positive-class F1 for binary labels, unweighted macro-F1 otherwise. A class
// with a zero denominator scores 0.
double macro_f1(const LabelVector& predicted, const LabelVector& truth);

// ---- Leakage ---------------------------------------------------------------

double pearson(std::span<const double> a, std::span<const double> b);

// Binary labels: Pearson r between each concept column and the 0/1 label.
// Multiclass: max over classes of |r| against the one-hot class indicator.
// Zero-variance columns give 0.
std::vector<double> concept_label_correlations(const ConceptMatrix& concepts, const LabelVector& labels);

struct GapCurve {
  std::vector<double> gaps;    // f1_cbm - f1_gt per prefix length
  std::vector<int> order;      // concept indices, least label-correlated first
  std::vector<double> f1_cbm;  // label F1 from the first l predicted concepts
  std::vector<double> f1_gt;   // label F1 from the first l ground-truth concepts
};

// Sorts concepts by |correlation| with the label on the train split
// (ties by index), then for each prefix length trains one SVM on predicted and
// one on ground-truth concepts (train split) and scores both on the test
// split.
GapCurve leak_gaps(const LabeledDataset& ds, const ConceptMatrix& predicted, const SolverConfig& cfg);

struct LeakScore {
  double value = 0.0;      // clamped to [0, 1]
  double unclamped = 0.0;
  bool clamped = false;
};

// sum_l max(gap_l, 0) / (k Z) with Z = 1 - mean(f1_gt). Throws NumericalError
// when Z <= 1e-9.
LeakScore leak(const GapCurve& curve);

// ---- Disentanglement and impurity -----------------------------------------

struct DciResult {
  std::vector<double> per_concept_d;
  std::vector<double> weights;
  double dis = 0.0;
  RelevanceMatrix relevance;
};

// Relevance of each source column for each binary target column: one forest
// per target, seeded from (cfg.seed, stream, target index).
RelevanceMatrix probe_relevance(const Matrix& sources, const ConceptMatrix& targets,
                                const SolverConfig& cfg, std::string_view stream);

// Disentanglement from a given relevance matrix. Rows with zero total
// relevance get D_i = 0 and weight 0.
DciResult dci_from_relevance(const RelevanceMatrix& relevance);

DciResult dci(const ConceptMatrix& predicted, const ConceptMatrix& truth, const SolverConfig& cfg);

struct OisResult {
  double ois = 0.0;          // (2/k) sum_ij (R_ij - Rgt_ij)^2, unnormalized
  double ois_clamped = 0.0;  // min(ois, 1)
  RelevanceMatrix learned;
  RelevanceMatrix ground_truth;
};

double ois_from_relevance(const RelevanceMatrix& learned, const RelevanceMatrix& ground_truth);

OisResult ois(const ConceptMatrix& predicted, const ConceptMatrix& truth, const SolverConfig& cfg);

struct ProbeMetrics {
  DciResult dci;
  OisResult ois;
};

// DCI and OIS sharing one learned-concept probing pass.
ProbeMetrics dci_and_ois(const ConceptMatrix& predicted, const ConceptMatrix& truth, const SolverConfig& cfg);

// ---- Annotator agreement --------------------------------------------------

struct ConceptAgreement {
  std::optional<double> precision;  // undefined without predicted positives
  std::optional<double> recall;     // undefined without true positives in truth
  int support = 0;
};

struct AgreementResult {
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  std::vector<ConceptAgreement> per_concept;
};

// Binary annotations are compared directly. Score annotations are binarized
// first: grouped concepts keep only the per-row argmax within their group;
// ungrouped concepts are thresholded at probability 0.5 by a per-concept
// logistic fit of truth on score over fit_rows (all rows when empty).
AgreementResult annotation_agreement(const ConceptMatrix& annotations, const ConceptMatrix& truth,
                                     const Vocabulary& vocab, std::span<const int> fit_rows = {});

// Binarization step of annotation_agreement, exposed for reuse.
ConceptMatrix binarize_annotations(const ConceptMatrix& annotations, const ConceptMatrix& truth,
                                   const Vocabulary& vocab, std::span<const int> fit_rows = {});

}  // namespace cqa
