#include "cqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cqa/error.hpp"

namespace cqa {
namespace {

std::vector<double> column(const Matrix& m, Index j) {
  return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
}

}  // namespace

std::optional<double> roc_auc(std::span<const double> scores, std::span<const double> truth) {
  if (scores.size() != truth.size()) throw DataError("roc_auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  double n_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    // Average 1-based rank of the tie block [i, j].
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (truth[idx[t]] != 0.0) {
        rank_sum_pos += avg_rank;
        n_pos += 1.0;
      }
    }
    i = j + 1;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

ConceptAuc concept_auc(const ConceptMatrix& predicted, const ConceptMatrix& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw DataError("concept_auc: predicted and truth shapes differ");
  }
  if (!truth.is_binary()) throw DataError("concept_auc: truth must be binary labels");
  ConceptAuc out;
  double sum = 0.0;
  int scored = 0;
  for (Index j = 0; j < truth.cols(); ++j) {
    const auto s = column(predicted.values(), j);
    const auto t = column(truth.values(), j);
    const auto auc = roc_auc(s, t);
    out.per_concept.push_back(auc);
    if (auc) {
      sum += *auc;
      ++scored;
    } else {
      out.skipped.push_back(static_cast<int>(j));
    }
  }
  if (scored == 0) throw NumericalError("concept_auc: no scorable concepts");
  out.mean = sum / scored;
  return out;
}

double macro_f1(const LabelVector& predicted, const LabelVector& truth) {
  if (predicted.size() != truth.size()) {
    throw DataError("macro_f1: length mismatch (" + std::to_string(predicted.size()) + " vs " +
                    std::to_string(truth.size()) + ")");
  }
  if (predicted.num_classes() != truth.num_classes()) throw DataError("macro_f1: class counts differ");
  const int m = truth.num_classes();
  std::vector<double> tp(m, 0.0), fp(m, 0.0), fn(m, 0.0);
  for (Index i = 0; i < truth.size(); ++i) {
    const int p = predicted[i];
    const int t = truth[i];
    if (p == t) {
      tp[t] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[t] += 1.0;
    }
  }
  auto f1 = [&](int c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    return denom == 0.0 ? 0.0 : 2.0 * tp[c] / denom;
  };
  if (m == 2) return f1(1);
  double s = 0.0;
  for (int c = 0; c < m; ++c) s += f1(c);
  return s / m;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("pearson: length mismatch");
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> concept_label_correlations(const ConceptMatrix& concepts, const LabelVector& labels) {
  if (concepts.rows() != labels.size()) throw DataError("correlations: row count mismatch");
  const int m = labels.num_classes();
  std::vector<std::vector<double>> indicators;
  if (m == 2) {
    indicators.emplace_back(labels.values().begin(), labels.values().end());
  } else {
    for (int c = 0; c < m; ++c) {
      std::vector<double> ind(static_cast<std::size_t>(labels.size()));
      for (Index i = 0; i < labels.size(); ++i) ind[i] = labels[i] == c ? 1.0 : 0.0;
      indicators.push_back(std::move(ind));
    }
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(concepts.cols()));
  for (Index j = 0; j < concepts.cols(); ++j) {
    const auto col = column(concepts.values(), j);
    if (m == 2) {
      out.push_back(pearson(col, indicators[0]));
    } else {
      double best = 0.0;
      for (const auto& ind : indicators) best = std::max(best, std::abs(pearson(col, ind)));
      out.push_back(best);
    }
  }
  return out;
}

}  // namespace cqa
