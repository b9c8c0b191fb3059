#pragma once

// Sequential concept bottleneck model: per-concept linear heads over the
// features, frozen, then an elastic-net inference layer over the concept
// logits.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cqa/datamodel.hpp"
#include "cqa/learners.hpp"
#include "cqa/synth.hpp"

namespace cqa {

enum class SupervisionMode { kLabelSupervised, kScoreSupervised };
enum class InferenceInput { kLogits, kProbs };

std::string_view to_string(SupervisionMode mode);
std::string_view to_string(InferenceInput input);
InferenceInput inference_input_from_string(std::string_view s);

struct TrainConfig {
  double concept_l2 = 0.1;
  // Inverse-prevalence class weights in each logistic head.
  bool balanced = true;
  InferenceInput inference_input = InferenceInput::kLogits;
  SolverConfig solver;
  // Ground-truth supervision when unset.
  std::optional<AnnotatorSpec> annotator;

  void validate() const;
};

struct CbmModel {
  SupervisionMode mode = SupervisionMode::kLabelSupervised;
  InferenceInput inference_input = InferenceInput::kLogits;
  // One 1 x d head per concept; constant heads have zero weights.
  std::vector<LinearModel> extractor;
  // Per-concept affine standardization of the inference input, fitted on the
  // training rows.
  Vector input_mean;
  Vector input_scale;
  LinearModel inference;

  int num_concepts() const { return static_cast<int>(extractor.size()); }
  Index feature_dim() const;
};

// Concept supervision for the training run: ground truth, or the configured
// annotator's output.
ConceptMatrix concept_supervision(const LabeledDataset& ds, const TrainConfig& cfg);

// Stage A on the given supervision, then stage B.
CbmModel train_cbm(const LabeledDataset& ds, const ConceptMatrix& supervision, const TrainConfig& cfg);
CbmModel train_cbm(const LabeledDataset& ds, const TrainConfig& cfg);

// Refits only the inference layer (and its input standardization); the
// extractor is copied unchanged.
CbmModel retrain_inference(const CbmModel& model, const LabeledDataset& ds, const TrainConfig& cfg);

// Concept logits, n x k.
ConceptMatrix predict_concepts(const CbmModel& model, const Matrix& x);

// Standardized inference-layer input computed from concept logits.
Matrix inference_inputs(const CbmModel& model, const Matrix& logits);

Prediction predict_labels(const CbmModel& model, const Matrix& x);

struct Contribution {
  int concept_index = 0;
  double value = 0.0;
};

struct Explanation {
  std::vector<Contribution> contributions;  // by |value|, descending
  double bias = 0.0;
  double score = 0.0;  // class score; equals bias + sum of contributions
};

// Additive decomposition of one class score for one feature row.
Explanation explain(const CbmModel& model, const Vector& x, int class_id);

std::string format_model(const CbmModel& model);
CbmModel parse_model(std::string_view text);
void save_model(const CbmModel& model, const std::filesystem::path& path);
CbmModel load_model(const std::filesystem::path& path);

}  // namespace cqa
