#include "cqa/datamodel.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "cqa/error.hpp"

namespace cqa {

Vocabulary::Vocabulary(std::vector<std::string> names, std::vector<std::vector<int>> groups)
    : names_(std::move(names)), groups_(std::move(groups)) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) {
      throw DataError("vocabulary: concept " + std::to_string(i) + " has an empty name");
    }
    if (!seen.insert(names_[i]).second) {
      throw DataError("vocabulary: duplicate concept name '" + names_[i] + "'");
    }
  }
  const int k = size();
  group_index_.assign(names_.size(), -1);
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (groups_[g].empty()) {
      throw DataError("vocabulary: group " + std::to_string(g) + " is empty");
    }
    for (int idx : groups_[g]) {
      if (idx < 0 || idx >= k) {
        throw DataError("vocabulary: group " + std::to_string(g) + " references concept " +
                        std::to_string(idx) + " outside [0, " + std::to_string(k) + ")");
      }
      if (group_index_[idx] != -1) {
        throw DataError("vocabulary: concept " + std::to_string(idx) +
                        " belongs to more than one group");
      }
      group_index_[idx] = static_cast<int>(g);
    }
  }
}

Vocabulary Vocabulary::numbered(int k) {
  std::vector<std::string> names;
  names.reserve(k);
  for (int i = 0; i < k; ++i) names.push_back("c" + std::to_string(i));
  return Vocabulary(std::move(names));
}

std::optional<int> Vocabulary::group_of(int i) const {
  const int g = group_index_.at(i);
  if (g < 0) return std::nullopt;
  return g;
}

std::string_view to_string(ConceptKind kind) {
  return kind == ConceptKind::kBinaryLabels ? "binary" : "scores";
}

ConceptKind concept_kind_from_string(std::string_view s) {
  if (s == "binary") return ConceptKind::kBinaryLabels;
  if (s == "scores") return ConceptKind::kScores;
  throw DataError("unknown concept kind '" + std::string(s) + "'");
}

ConceptMatrix::ConceptMatrix(Matrix values, ConceptKind kind)
    : values_(std::move(values)), kind_(kind) {
  for (Index j = 0; j < values_.cols(); ++j) {
    for (Index i = 0; i < values_.rows(); ++i) {
      const double v = values_(i, j);
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "concept matrix: non-finite entry at row " << i << ", column " << j;
        throw DataError(os.str());
      }
      if (kind_ == ConceptKind::kBinaryLabels && v != 0.0 && v != 1.0) {
        std::ostringstream os;
        os << "concept matrix: non-binary entry " << v << " at row " << i << ", column " << j;
        throw DataError(os.str());
      }
    }
  }
}

ConceptMatrix ConceptMatrix::select_rows(std::span<const int> rows) const {
  return ConceptMatrix(take_rows(values_, rows), kind_);
}

ConceptMatrix ConceptMatrix::select_cols(std::span<const int> cols) const {
  return ConceptMatrix(take_cols(values_, cols), kind_);
}

LabelVector::LabelVector(std::vector<int> values, int num_classes)
    : values_(std::move(values)), num_classes_(num_classes) {
  if (num_classes_ < 2) {
    throw DataError("label vector: class count must be >= 2, got " + std::to_string(num_classes_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] < 0 || values_[i] >= num_classes_) {
      throw DataError("label vector: entry " + std::to_string(values_[i]) + " at row " +
                      std::to_string(i) + " outside [0, " + std::to_string(num_classes_) + ")");
    }
  }
}

LabelVector LabelVector::select(std::span<const int> rows) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(values_.at(r));
  return LabelVector(std::move(out), num_classes_);
}

std::vector<int> LabelVector::counts() const {
  std::vector<int> c(num_classes_, 0);
  for (int v : values_) ++c[v];
  return c;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

std::optional<Split> split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

LabeledDataset::LabeledDataset(Matrix features, ConceptMatrix concepts, LabelVector labels,
                               Vocabulary vocabulary, std::vector<Split> split)
    : features_(std::move(features)),
      concepts_(std::move(concepts)),
      labels_(std::move(labels)),
      vocabulary_(std::move(vocabulary)),
      split_(std::move(split)) {
  const Index n = features_.rows();
  if (concepts_.rows() != n || labels_.size() != n || static_cast<Index>(split_.size()) != n) {
    std::ostringstream os;
    os << "dataset: row counts disagree (features " << n << ", concepts " << concepts_.rows()
       << ", labels " << labels_.size() << ", split " << split_.size() << ")";
    throw DataError(os.str());
  }
  if (concepts_.cols() != vocabulary_.size()) {
    throw DataError("dataset: concept matrix has " + std::to_string(concepts_.cols()) +
                    " columns but vocabulary has " + std::to_string(vocabulary_.size()) +
                    " names");
  }
  if (!features_.allFinite()) throw DataError("dataset: non-finite feature value");
}

std::vector<int> LabeledDataset::rows(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < split_.size(); ++i) {
    if (split_[i] == s) out.push_back(static_cast<int>(i));
  }
  return out;
}

void LabeledDataset::require_trainable() const {
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    if (rows(s).empty()) {
      throw DataError("dataset: split '" + std::string(to_string(s)) + "' is empty");
    }
  }
}

RelevanceMatrix::RelevanceMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) throw DataError("relevance matrix must be square");
  for (Index j = 0; j < entries_.cols(); ++j) {
    double sum = 0.0;
    for (Index i = 0; i < entries_.rows(); ++i) {
      const double v = entries_(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw DataError("relevance matrix: negative or non-finite entry at (" + std::to_string(i) +
                        ", " + std::to_string(j) + ")");
      }
      sum += v;
    }
    if (sum != 0.0 && std::abs(sum - 1.0) > 1e-9) {
      throw DataError("relevance matrix: column " + std::to_string(j) + " sums to " +
                      std::to_string(sum));
    }
  }
}

std::vector<int> RelevanceMatrix::degenerate_targets() const {
  std::vector<int> out;
  for (Index j = 0; j < entries_.cols(); ++j) {
    if (entries_.col(j).sum() == 0.0) out.push_back(static_cast<int>(j));
  }
  return out;
}

Matrix take_rows(const Matrix& m, std::span<const int> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = m.row(rows[r]);
  return out;
}

Matrix take_cols(const Matrix& m, std::span<const int> cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = m.col(cols[c]);
  return out;
}

}  // namespace cqa
