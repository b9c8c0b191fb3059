#pragma once

// Classifiers used by the metrics and by the CBM trainer: linear SVM (dual
// coordinate descent), L2 logistic regression (Newton), multinomial elastic
// net (accelerated proximal gradient) and a Gini random forest.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cqa/datamodel.hpp"

namespace cqa {

// Seeds of the ground-truth probe forests in OIS. Shared reuses the learned
// probe's per-target seeds, so identical inputs give identical relevances.
enum class ProbeSeeding { kShared, kIndependent };

struct SolverConfig {
  double svm_c = 1.0;
  // Stop when the spread of projected dual gradients falls below this.
  double svm_tolerance = 1e-4;
  int svm_max_epochs = 1000;

  double elastic_alpha = 0.99;
  double elastic_lambda = 7e-4;
  int elastic_max_iters = 2000;
  double elastic_tolerance = 1e-8;

  int forest_trees = 100;
  int forest_max_depth = 8;
  // Fraction of features tried per split; nullopt means ceil(sqrt(p)).
  std::optional<double> forest_feature_fraction;
  int forest_max_bins = 64;
  // Feature fraction of the DCI/OIS probe forests. All features by default: in
  // worlds with one-hot concept groups a subsampled split often cannot see the
  // matching column and spreads relevance across the group.
  double probe_feature_fraction = 1.0;

  ProbeSeeding probe_seeding = ProbeSeeding::kShared;
  std::uint64_t seed = 0;

  // Throws ConfigError on out-of-range fields.
  void validate() const;
};

struct Regularization {
  enum class Kind { kHinge, kLogistic, kElasticNet, kRidge, kConstant };
  Kind kind = Kind::kConstant;
  double c = 0.0;       // SVM cost
  double l2 = 0.0;      // logistic / ridge L2 weight
  double lambda = 0.0;  // elastic-net strength
  double alpha = 0.0;   // elastic-net L1 mix
};

std::string to_string(Regularization::Kind kind);
Regularization::Kind regularization_kind_from_string(const std::string& s);

struct Prediction {
  LabelVector labels;
  // n x rows(weights) decision values, or n x m class probabilities (forest).
  Matrix scores;
};

// Labels from a score matrix: one column means "class 1 iff score > 0";
// otherwise argmax with ties resolved toward the lower class id.
std::vector<int> labels_from_scores(const Matrix& scores);

class LinearModel {
 public:
  LinearModel() = default;
  // weights: r x p with r = 1 for a binary decision function, else r = m.
  LinearModel(Matrix weights, Vector bias, int num_classes, Regularization reg);

  const Matrix& weights() const { return weights_; }
  const Vector& bias() const { return bias_; }
  int num_classes() const { return num_classes_; }
  Index num_features() const { return weights_.cols(); }
  const Regularization& regularization() const { return reg_; }

  // X W^T + b.
  Matrix decision_function(const Matrix& x) const;
  Prediction predict(const Matrix& x) const;

  bool operator==(const LinearModel& o) const {
    return num_classes_ == o.num_classes_ && weights_.rows() == o.weights_.rows() &&
           weights_.cols() == o.weights_.cols() && weights_ == o.weights_ && bias_ == o.bias_;
  }

 private:
  Matrix weights_;
  Vector bias_;
  int num_classes_ = 2;
  Regularization reg_;
};

// ---- SVM -------------------------------------------------------------------

// L2-regularized hinge loss with the bias folded in as a constant unit
// feature (the bias is regularized too):
//   1/2 (|w|^2 + b^2) + C sum_i max(0, 1 - y_i (w.x_i + b)),  y_i in {-1, +1}.
// Binary problems give one decision row (class 1 positive); m > 2 classes are
// trained one-vs-rest. Throws DataError when fewer than two classes occur.
LinearModel train_linear_svm(const Matrix& x, const LabelVector& y, const SolverConfig& cfg);

// Primal objective above for a binary model; positive class is label 1.
double svm_primal_objective(const Vector& w, double b, const Matrix& x, const LabelVector& y, double c);

// ---- Logistic regression ---------------------------------------------------

struct LogisticObjective {
  double value = 0.0;
  Vector grad_w;
  double grad_b = 0.0;
};

// (1/n) sum_i s_i * xent(y_i, w.x_i + b) + l2/2 |w|^2 with s_i = n / (2 n_{y_i})
// when balanced and 1 otherwise. Bias unpenalized.
LogisticObjective logistic_objective(const Vector& w, double b, const Matrix& x,
                                     const LabelVector& y, double l2, bool balanced);

// Newton's method with backtracking; y must be binary with both classes present.
LinearModel train_logistic(const Matrix& x, const LabelVector& y, double l2, bool balanced);

// Least squares with an L2 penalty on the weights, fitted in closed form:
//   (1/n) sum_i (w.x_i + b - t_i)^2 + l2 |w|^2.
LinearModel train_ridge(const Matrix& x, const Vector& target, double l2);

// ---- Elastic net -----------------------------------------------------------

// Multinomial cross-entropy (mean over rows) plus
//   lambda * (alpha |W|_1 + (1 - alpha)/2 |W|_2^2),
// bias unpenalized, one weight row per class. Pruned weights are exact zeros.
LinearModel train_elastic_net(const Matrix& x, const LabelVector& y, const SolverConfig& cfg);

struct KktResiduals {
  // max over zero weights of max(0, |dL/dw| - lambda*alpha)
  double zero_violation = 0.0;
  // max over nonzero weights of |dL/dw + lambda*alpha*sign(w) + lambda*(1-alpha)*w|
  double nonzero_residual = 0.0;
  // max over classes of |dL/db|
  double bias_residual = 0.0;
};

// dL/dW of the mean multinomial cross-entropy for a model with m rows.
Matrix multinomial_loss_gradient(const LinearModel& model, const Matrix& x, const LabelVector& y,
                                 Vector* bias_grad = nullptr);
KktResiduals elastic_net_kkt(const LinearModel& model, const Matrix& x, const LabelVector& y,
                             double lambda, double alpha);

// ---- Random forest ---------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> distribution;  // class frequencies at a leaf
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const std::vector<double>& leaf_for(const double* row, Index stride) const;
};

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::vector<DecisionTree> trees, Vector importances, int num_features, int num_classes);

  const std::vector<DecisionTree>& trees() const { return trees_; }
  const Vector& importances() const { return importances_; }
  int num_features() const { return num_features_; }
  int num_classes() const { return num_classes_; }

  // Scores are class probabilities averaged over trees.
  Prediction predict(const Matrix& x) const;

 private:
  std::vector<DecisionTree> trees_;
  Vector importances_;
  int num_features_ = 0;
  int num_classes_ = 2;
};

// Bagged Gini trees on quantile-binned features. Each tree draws a bootstrap
// sample and tries ceil(sqrt(p)) features per split (or the configured
// fraction). Importances are the sample-weighted impurity decrease per
// feature, normalized per tree, averaged and renormalized; all zero when no
// tree ever split.
//
// Feature sampling is keyed on column content rather than column position, so
// permuting the columns of x permutes the importances and nothing else.
ForestModel train_forest(const Matrix& x, const LabelVector& y, const SolverConfig& cfg);

}  // namespace cqa
