#pragma once

// Typed containers shared by every module. All types validate their
// invariants on construction and are immutable afterwards.

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cqa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Ordered concept descriptions plus optional mutually exclusive groups.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> names, std::vector<std::vector<int>> groups = {});

  // Names "c0", "c1", ... with no groups.
  static Vocabulary numbered(int k);

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int i) const { return names_.at(i); }
  const std::vector<std::vector<int>>& groups() const { return groups_; }

  // Index into groups() of the group containing concept i, if any.
  std::optional<int> group_of(int i) const;

  bool operator==(const Vocabulary&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<int>> groups_;
  std::vector<int> group_index_;  // -1 for ungrouped concepts
};

enum class ConceptKind { kBinaryLabels, kScores };

std::string_view to_string(ConceptKind kind);
ConceptKind concept_kind_from_string(std::string_view s);

// n x k matrix of concept values; binary labels or real scores.
class ConceptMatrix {
 public:
  ConceptMatrix() = default;
  ConceptMatrix(Matrix values, ConceptKind kind);

  // Scores view of the same values (binary labels are valid scores).
  ConceptMatrix as_scores() const { return ConceptMatrix(values_, ConceptKind::kScores); }

  const Matrix& values() const { return values_; }
  ConceptKind kind() const { return kind_; }
  bool is_binary() const { return kind_ == ConceptKind::kBinaryLabels; }
  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }

  ConceptMatrix select_rows(std::span<const int> rows) const;
  ConceptMatrix select_cols(std::span<const int> cols) const;

  bool operator==(const ConceptMatrix& o) const {
    return kind_ == o.kind_ && values_.rows() == o.values_.rows() &&
           values_.cols() == o.values_.cols() && values_ == o.values_;
  }

 private:
  Matrix values_;
  ConceptKind kind_ = ConceptKind::kScores;
};

// Class ids in [0, m), m >= 2.
class LabelVector {
 public:
  LabelVector() = default;
  LabelVector(std::vector<int> values, int num_classes);

  const std::vector<int>& values() const { return values_; }
  int num_classes() const { return num_classes_; }
  Index size() const { return static_cast<Index>(values_.size()); }
  int operator[](Index i) const { return values_[static_cast<std::size_t>(i)]; }

  LabelVector select(std::span<const int> rows) const;
  // Count per class.
  std::vector<int> counts() const;

  bool operator==(const LabelVector&) const = default;

 private:
  std::vector<int> values_;
  int num_classes_ = 2;
};

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split s);
std::optional<Split> split_from_string(std::string_view s);

class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(Matrix features, ConceptMatrix concepts, LabelVector labels, Vocabulary vocabulary,
                 std::vector<Split> split);

  const Matrix& features() const { return features_; }
  const ConceptMatrix& concepts() const { return concepts_; }
  const LabelVector& labels() const { return labels_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }
  const std::vector<Split>& split() const { return split_; }

  Index size() const { return features_.rows(); }
  int num_concepts() const { return static_cast<int>(concepts_.cols()); }
  int num_classes() const { return labels_.num_classes(); }
  Index feature_dim() const { return features_.cols(); }

  // Row indices tagged with s, ascending.
  std::vector<int> rows(Split s) const;
  // Throws DataError when any of train/val/test is empty.
  void require_trainable() const;

  bool operator==(const LabeledDataset& o) const {
    return features_.rows() == o.features_.rows() && features_.cols() == o.features_.cols() &&
           features_ == o.features_ && concepts_ == o.concepts_ && labels_ == o.labels_ &&
           vocabulary_ == o.vocabulary_ && split_ == o.split_;
  }

 private:
  Matrix features_;
  ConceptMatrix concepts_;
  LabelVector labels_;
  Vocabulary vocabulary_;
  std::vector<Split> split_;
};

// k x k feature-to-target relevances; entry (i, j) is the relevance of source
// concept i for predicting target concept j. Columns sum to one, or are all
// zero for a degenerate target.
class RelevanceMatrix {
 public:
  RelevanceMatrix() = default;
  explicit RelevanceMatrix(Matrix entries);

  const Matrix& entries() const { return entries_; }
  Index size() const { return entries_.rows(); }
  double operator()(Index i, Index j) const { return entries_(i, j); }
  // Targets whose column is all zero.
  std::vector<int> degenerate_targets() const;

 private:
  Matrix entries_;
};

Matrix take_rows(const Matrix& m, std::span<const int> rows);
Matrix take_cols(const Matrix& m, std::span<const int> cols);

}  // namespace cqa
