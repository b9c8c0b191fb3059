#pragma once

// Synthetic worlds with known ground truth, simulated concept annotators and
// concept entanglement.

#include <cstdint>
#include <optional>
#include <vector>

#include "cqa/datamodel.hpp"

namespace cqa {

struct LabelRule {
  // all_of / any_of: binary label over `concepts`.
  // group_index: label = position of the active concept inside groups[group].
  enum class Kind { kAllOf, kAnyOf, kGroupIndex };
  Kind kind = Kind::kAllOf;
  std::vector<int> concepts;
  int group = 0;
};

std::string_view to_string(LabelRule::Kind kind);
LabelRule::Kind label_rule_kind_from_string(std::string_view s);

struct WorldSpec {
  int k = 0;
  std::vector<std::vector<int>> groups;
  int d = 0;
  int n = 0;
  LabelRule label_rule;
  double feature_noise = 0.0;
  // Activation probability of concepts outside every group.
  double singleton_prevalence = 0.5;
  // Concept names; "c0", "c1", ... when empty.
  std::vector<std::string> names;
  std::uint64_t seed = 0;

  // Throws ConfigError on an inconsistent spec.
  void validate() const;
  Vocabulary vocabulary() const;
  int num_classes() const;
};

// k = 42: wall hue, floor hue, object hue (10 each), scale (8), shape (4);
// label = "object hue 0 and shape 3".
WorldSpec shapes3d_like_world(std::uint64_t seed, int n = 6000);

// k independent attributes of prevalence 0.5; label = all_of(first two).
WorldSpec attribute_world(std::uint64_t seed, int k = 16, int n = 6000);

// Ground-truth concepts, rule-derived labels and features X = C E^T + noise
// with a seeded random d x k embedding E (orthonormal columns when d >= k).
// Rows are split 70/10/20 by position. Throws DataError if the training
// labels come out single-class.
LabeledDataset generate_world(const WorldSpec& spec);

// Expected activation rate of concept j under the spec.
double concept_prevalence(const WorldSpec& spec, int j);

struct FlipRates {
  double fpr = 0.0;
  double fnr = 0.0;
};

// Rates whose expected precision and recall equal the targets at the given
// concept prevalence. Throws ConfigError when fpr would exceed 1.
FlipRates calibrate_flip_rates(double target_precision, double target_recall, double prevalence);

// Expected (precision, recall) of flip noise, the inverse of the above.
std::pair<double, double> flip_agreement(const FlipRates& rates, double prevalence);

struct AnnotatorSpec {
  enum class Mode { kFlip, kScore };
  Mode mode = Mode::kFlip;
  // Flip mode: one entry per concept, or a single entry broadcast to all.
  std::vector<FlipRates> flips;
  // Score mode: strength * (2c - 1) + N(0, noise_std^2).
  double signal_strength = 1.0;
  double noise_std = 0.0;
  // Adds beta * (2y - 1) to the concept least correlated with a binary label.
  // Output is a score matrix whenever this is set.
  std::optional<double> label_leak;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string_view to_string(AnnotatorSpec::Mode mode);
AnnotatorSpec::Mode annotator_mode_from_string(std::string_view s);

// Concept the label-leak channel writes to: least |r| with the label over all
// rows of the ground truth, ties to the lowest index.
int leak_target_concept(const LabeledDataset& ds);

ConceptMatrix simulate_annotator(const LabeledDataset& ds, const AnnotatorSpec& spec);

struct EntangleSpec {
  Matrix mixing;  // k x k, rows non-negative and summing to 1

  void validate() const;
};

// (1 - t) I + t U with U the uniform 1/k matrix.
EntangleSpec interpolated_mixing(int k, double t);
// Concepts (2i, 2i+1) averaged pairwise; an odd last concept stays alone.
EntangleSpec pairwise_mixing(int k);

// predicted * mixing^T, as scores.
ConceptMatrix entangle(const ConceptMatrix& predicted, const EntangleSpec& spec);

}  // namespace cqa
