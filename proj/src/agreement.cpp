#include "cqa/error.hpp"
#include "cqa/metrics.hpp"

namespace cqa {
namespace {

// L2 weight of the per-concept score-to-truth logistic fits.
constexpr double kBinarizerL2 = 1e-6;

}  // namespace

ConceptMatrix binarize_annotations(const ConceptMatrix& annotations, const ConceptMatrix& truth,
                                   const Vocabulary& vocab, std::span<const int> fit_rows) {
  if (annotations.rows() != truth.rows() || annotations.cols() != truth.cols()) {
    throw DataError("agreement: annotation and truth shapes differ");
  }
  if (!truth.is_binary()) throw DataError("agreement: truth must be binary labels");
  if (vocab.size() != annotations.cols()) throw DataError("agreement: vocabulary size mismatch");
  if (annotations.is_binary()) return annotations;

  const Index n = annotations.rows();
  const Matrix& s = annotations.values();
  Matrix out = Matrix::Zero(n, annotations.cols());

  for (const auto& group : vocab.groups()) {
    for (Index i = 0; i < n; ++i) {
      int best = group.front();
      for (int c : group) {
        if (s(i, c) > s(i, best)) best = c;
      }
      out(i, best) = 1.0;
    }
  }

  std::vector<int> rows(fit_rows.begin(), fit_rows.end());
  if (rows.empty()) {
    rows.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) rows[i] = static_cast<int>(i);
  }
  for (Index j = 0; j < annotations.cols(); ++j) {
    if (vocab.group_of(static_cast<int>(j))) continue;
    Matrix x(static_cast<Index>(rows.size()), 1);
    std::vector<int> y(rows.size());
    int pos = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      x(static_cast<Index>(r), 0) = s(rows[r], j);
      y[r] = truth.values()(rows[r], j) != 0.0 ? 1 : 0;
      pos += y[r];
    }
    if (pos == 0 || pos == static_cast<int>(rows.size())) {
      // Single-class truth on the fit rows: predict that class everywhere.
      out.col(j).setConstant(pos == 0 ? 0.0 : 1.0);
      continue;
    }
    const LinearModel model = train_logistic(x, LabelVector(std::move(y), 2), kBinarizerL2, false);
    const double w = model.weights()(0, 0);
    const double b = model.bias()[0];
    // probability >= 0.5 <=> logit >= 0
    for (Index i = 0; i < n; ++i) out(i, j) = w * s(i, j) + b >= 0.0 ? 1.0 : 0.0;
  }
  return ConceptMatrix(std::move(out), ConceptKind::kBinaryLabels);
}

AgreementResult annotation_agreement(const ConceptMatrix& annotations, const ConceptMatrix& truth,
                                     const Vocabulary& vocab, std::span<const int> fit_rows) {
  const ConceptMatrix binary = binarize_annotations(annotations, truth, vocab, fit_rows);
  AgreementResult out;
  double sum_p = 0.0, sum_r = 0.0;
  int n_p = 0, n_r = 0;
  for (Index j = 0; j < binary.cols(); ++j) {
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (Index i = 0; i < binary.rows(); ++i) {
      const bool a = binary.values()(i, j) != 0.0;
      const bool t = truth.values()(i, j) != 0.0;
      if (a && t) tp += 1.0;
      else if (a) fp += 1.0;
      else if (t) fn += 1.0;
    }
    ConceptAgreement c;
    c.support = static_cast<int>(tp + fn);
    if (tp + fp > 0.0) {
      c.precision = tp / (tp + fp);
      sum_p += *c.precision;
      ++n_p;
    }
    if (tp + fn > 0.0) {
      c.recall = tp / (tp + fn);
      sum_r += *c.recall;
      ++n_r;
    }
    out.per_concept.push_back(c);
  }
  out.macro_precision = n_p ? sum_p / n_p : 0.0;
  out.macro_recall = n_r ? sum_r / n_r : 0.0;
  return out;
}

}  // namespace cqa
