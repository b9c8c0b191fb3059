#include <cmath>

#include "cqa/error.hpp"
#include "cqa/learners.hpp"

namespace cqa {

void SolverConfig::validate() const {
  auto bad = [](const std::string& msg) { throw ConfigError("solver: " + msg); };
  if (!(svm_c > 0.0)) bad("svm_c must be positive");
  if (!(svm_tolerance > 0.0)) bad("svm_tolerance must be positive");
  if (svm_max_epochs < 1) bad("svm_max_epochs must be >= 1");
  if (!(elastic_alpha >= 0.0 && elastic_alpha <= 1.0)) bad("elastic_alpha must lie in [0, 1]");
  if (!(elastic_lambda >= 0.0)) bad("elastic_lambda must be non-negative");
  if (elastic_max_iters < 1) bad("elastic_max_iters must be >= 1");
  if (!(elastic_tolerance > 0.0)) bad("elastic_tolerance must be positive");
  if (forest_trees < 1) bad("forest_trees must be >= 1");
  if (forest_max_depth < 1) bad("forest_max_depth must be >= 1");
  if (forest_feature_fraction && !(*forest_feature_fraction > 0.0 && *forest_feature_fraction <= 1.0)) {
    bad("forest_feature_fraction must lie in (0, 1]");
  }
  if (!(probe_feature_fraction > 0.0 && probe_feature_fraction <= 1.0)) {
    bad("probe_feature_fraction must lie in (0, 1]");
  }
  if (forest_max_bins < 2 || forest_max_bins > 65535) bad("forest_max_bins must lie in [2, 65535]");
}

std::string to_string(Regularization::Kind kind) {
  switch (kind) {
    case Regularization::Kind::kHinge: return "hinge";
    case Regularization::Kind::kLogistic: return "logistic";
    case Regularization::Kind::kElasticNet: return "elastic_net";
    case Regularization::Kind::kRidge: return "ridge";
    case Regularization::Kind::kConstant: return "constant";
  }
  return "constant";
}

Regularization::Kind regularization_kind_from_string(const std::string& s) {
  using K = Regularization::Kind;
  for (K k : {K::kHinge, K::kLogistic, K::kElasticNet, K::kRidge, K::kConstant}) {
    if (to_string(k) == s) return k;
  }
  throw DataError("unknown regularization kind '" + s + "'");
}

std::vector<int> labels_from_scores(const Matrix& scores) {
  std::vector<int> labels(static_cast<std::size_t>(scores.rows()));
  for (Index i = 0; i < scores.rows(); ++i) {
    if (scores.cols() == 1) {
      labels[i] = scores(i, 0) > 0.0 ? 1 : 0;
      continue;
    }
    Index best = 0;
    for (Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

LinearModel::LinearModel(Matrix weights, Vector bias, int num_classes, Regularization reg)
    : weights_(std::move(weights)), bias_(std::move(bias)), num_classes_(num_classes), reg_(reg) {
  if (num_classes_ < 2) throw DataError("linear model: class count must be >= 2");
  const Index rows = weights_.rows();
  if (!(rows == num_classes_ || (rows == 1 && num_classes_ == 2))) {
    throw DataError("linear model: " + std::to_string(rows) + " weight rows for " +
                    std::to_string(num_classes_) + " classes");
  }
  if (bias_.size() != rows) throw DataError("linear model: bias length does not match weight rows");
  if (!weights_.allFinite() || !bias_.allFinite()) throw NumericalError("linear model: non-finite parameters");
}

Matrix LinearModel::decision_function(const Matrix& x) const {
  if (x.cols() != weights_.cols()) {
    throw DataError("linear model: expected " + std::to_string(weights_.cols()) + " features, got " +
                    std::to_string(x.cols()));
  }
  Matrix scores = x * weights_.transpose();
  scores.rowwise() += bias_.transpose();
  return scores;
}

Prediction LinearModel::predict(const Matrix& x) const {
  Matrix scores = decision_function(x);
  return {LabelVector(labels_from_scores(scores), num_classes_), std::move(scores)};
}

}  // namespace cqa
