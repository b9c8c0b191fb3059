#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "cqa/error.hpp"
#include "cqa/learners.hpp"
#include "cqa/random.hpp"

namespace cqa {
namespace {

// Quantile binning of one column. Bin b covers values in (edge[b-1], edge[b]];
// split thresholds sit halfway between the largest value of bin b and the
// smallest value of bin b + 1, so thresholds on raw values reproduce the
// binned partition exactly on the training data.
struct BinnedColumn {
  std::vector<std::uint16_t> bin;  // per row
  std::vector<double> lo;          // smallest value per bin
  std::vector<double> hi;          // largest value per bin
  int bins() const { return static_cast<int>(lo.size()); }
};

BinnedColumn bin_column(const Matrix& x, Index col, int max_bins) {
  const Index n = x.rows();
  std::vector<double> sorted(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) sorted[i] = x(i, col);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct;
  for (double v : sorted) {
    if (distinct.empty() || v != distinct.back()) distinct.push_back(v);
  }
  // Upper edges (inclusive) of each bin, chosen among distinct values.
  std::vector<double> upper;
  if (static_cast<int>(distinct.size()) <= max_bins) {
    upper = distinct;
  } else {
    for (int b = 1; b <= max_bins; ++b) {
      const std::size_t pos = std::min<std::size_t>(
          sorted.size() - 1, static_cast<std::size_t>(std::ceil(b * static_cast<double>(n) / max_bins)) - 1);
      const double v = sorted[pos];
      if (upper.empty() || v > upper.back()) upper.push_back(v);
    }
    if (upper.back() != distinct.back()) upper.push_back(distinct.back());
  }
  BinnedColumn out;
  out.bin.resize(static_cast<std::size_t>(n));
  out.lo.assign(upper.size(), 0.0);
  out.hi = upper;
  std::vector<bool> seen(upper.size(), false);
  for (Index i = 0; i < n; ++i) {
    const double v = x(i, col);
    const auto b = static_cast<std::size_t>(std::lower_bound(upper.begin(), upper.end(), v) - upper.begin());
    out.bin[i] = static_cast<std::uint16_t>(b);
    if (!seen[b] || v < out.lo[b]) out.lo[b] = v;
    seen[b] = true;
  }
  return out;
}

std::uint64_t column_hash(const Matrix& x, Index col) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (Index i = 0; i < x.rows(); ++i) {
    double v = x(i, col);
    if (v == 0.0) v = 0.0;  // fold -0.0
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return h;
}

// Position-free identity for each feature: a hash of its values, made unique
// among identical columns by their occurrence rank.
std::vector<std::uint64_t> feature_keys(const Matrix& x) {
  const Index p = x.cols();
  std::vector<std::uint64_t> content(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) content[j] = column_hash(x, j);
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    std::uint64_t rank = 0;
    for (Index i = 0; i < j; ++i) {
      if (content[i] == content[j] && x.col(i) == x.col(j)) ++rank;
    }
    keys[j] = mix64(content[j] + mix64(rank));
  }
  return keys;
}

double gini(const double* counts, int m, double total) {
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (int c = 0; c < m; ++c) {
    const double q = counts[c] / total;
    s += q * q;
  }
  return 1.0 - s;
}

struct Sample {
  int row;
  double weight;  // bootstrap multiplicity
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<BinnedColumn>& cols, const std::vector<std::uint64_t>& keys,
              const std::vector<int>& y, int m, int mtry, int max_depth, std::uint64_t seed)
      : cols_(cols), keys_(keys), y_(y), m_(m), mtry_(mtry), max_depth_(max_depth), rng_(seed) {
    importance_.assign(cols_.size(), 0.0);
  }

  DecisionTree build(std::vector<Sample> samples) {
    total_weight_ = 0.0;
    for (const auto& s : samples) total_weight_ += s.weight;
    tree_.nodes.clear();
    tree_.nodes.emplace_back();
    grow(0, samples, 0);
    return std::move(tree_);
  }

  const std::vector<double>& importance() const { return importance_; }

 private:
  void make_leaf(int node, const std::vector<double>& counts, double total) {
    auto& dist = tree_.nodes[node].distribution;
    dist.assign(static_cast<std::size_t>(m_), 0.0);
    for (int c = 0; c < m_; ++c) dist[c] = counts[c] / total;
  }

  void grow(int node, std::vector<Sample>& samples, int depth) {
    std::vector<double> counts(static_cast<std::size_t>(m_), 0.0);
    double total = 0.0;
    for (const auto& s : samples) {
      counts[y_[s.row]] += s.weight;
      total += s.weight;
    }
    const double parent_gini = gini(counts.data(), m_, total);
    const std::uint64_t salt = rng_.next();
    if (depth >= max_depth_ || parent_gini <= 0.0 || total < 2.0 || samples.size() < 2) {
      make_leaf(node, counts, total);
      return;
    }

    // Candidate features: the mtry smallest priorities under this node's salt.
    const int p = static_cast<int>(cols_.size());
    std::vector<std::pair<std::uint64_t, int>> order(static_cast<std::size_t>(p));
    for (int f = 0; f < p; ++f) order[f] = {mix64(salt ^ keys_[f]), f};
    std::partial_sort(order.begin(), order.begin() + mtry_, order.end());

    double best_gain = 0.0;
    int best_feature = -1;
    int best_bin = -1;
    std::vector<double> hist;
    std::vector<double> left(static_cast<std::size_t>(m_));
    std::vector<double> right(static_cast<std::size_t>(m_));
    for (int r = 0; r < mtry_; ++r) {
      const int f = order[r].second;
      const auto& col = cols_[f];
      const int nb = col.bins();
      if (nb < 2) continue;
      hist.assign(static_cast<std::size_t>(nb) * m_, 0.0);
      for (const auto& s : samples) hist[col.bin[s.row] * m_ + y_[s.row]] += s.weight;
      std::fill(left.begin(), left.end(), 0.0);
      double left_total = 0.0;
      for (int b = 0; b + 1 < nb; ++b) {
        double bin_total = 0.0;
        for (int c = 0; c < m_; ++c) {
          left[c] += hist[b * m_ + c];
          bin_total += hist[b * m_ + c];
        }
        left_total += bin_total;
        if (bin_total == 0.0 || left_total <= 0.0 || left_total >= total) continue;
        for (int c = 0; c < m_; ++c) right[c] = counts[c] - left[c];
        const double right_total = total - left_total;
        const double child = (left_total * gini(left.data(), m_, left_total) +
                              right_total * gini(right.data(), m_, right_total)) / total;
        const double gain = parent_gini - child;
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_feature = f;
          best_bin = b;
        }
      }
    }
    if (best_feature < 0) {
      make_leaf(node, counts, total);
      return;
    }

    const auto& col = cols_[best_feature];
    const double threshold = 0.5 * (col.hi[best_bin] + col.lo[best_bin + 1]);
    importance_[best_feature] += total / total_weight_ * best_gain;

    std::vector<Sample> left_s, right_s;
    for (const auto& s : samples) {
      (col.bin[s.row] <= best_bin ? left_s : right_s).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();

    const int left_id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const int right_id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[node].feature = best_feature;
    tree_.nodes[node].threshold = threshold;
    tree_.nodes[node].left = left_id;
    tree_.nodes[node].right = right_id;
    grow(left_id, left_s, depth + 1);
    grow(right_id, right_s, depth + 1);
  }

  const std::vector<BinnedColumn>& cols_;
  const std::vector<std::uint64_t>& keys_;
  const std::vector<int>& y_;
  int m_;
  int mtry_;
  int max_depth_;
  Rng rng_;
  DecisionTree tree_;
  std::vector<double> importance_;
  double total_weight_ = 0.0;
};

}  // namespace

const std::vector<double>& DecisionTree::leaf_for(const double* row, Index stride) const {
  int node = 0;
  while (nodes[node].feature >= 0) {
    const auto& nd = nodes[node];
    node = row[nd.feature * stride] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[node].distribution;
}

ForestModel::ForestModel(std::vector<DecisionTree> trees, Vector importances, int num_features,
                         int num_classes)
    : trees_(std::move(trees)),
      importances_(std::move(importances)),
      num_features_(num_features),
      num_classes_(num_classes) {
  if (importances_.size() != num_features_) throw DataError("forest: importance length mismatch");
  if ((importances_.array() < 0.0).any()) throw DataError("forest: negative importance");
}

Prediction ForestModel::predict(const Matrix& x) const {
  if (x.cols() != num_features_) {
    throw DataError("forest: expected " + std::to_string(num_features_) + " features, got " +
                    std::to_string(x.cols()));
  }
  Matrix proba = Matrix::Zero(x.rows(), num_classes_);
  for (Index i = 0; i < x.rows(); ++i) {
    // Column-major storage: consecutive features of a row are x.rows() apart.
    const double* row = x.data() + i;
    for (const auto& t : trees_) {
      const auto& dist = t.leaf_for(row, x.rows());
      for (int c = 0; c < num_classes_; ++c) proba(i, c) += dist[c];
    }
  }
  if (!trees_.empty()) proba /= static_cast<double>(trees_.size());
  std::vector<int> labels(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    Index best = 0;
    for (Index c = 1; c < proba.cols(); ++c) {
      if (proba(i, c) > proba(i, best)) best = c;
    }
    labels[i] = static_cast<int>(best);
  }
  return {LabelVector(std::move(labels), num_classes_), std::move(proba)};
}

ForestModel train_forest(const Matrix& x, const LabelVector& y, const SolverConfig& cfg) {
  if (x.rows() != y.size()) throw DataError("forest: feature and label row counts differ");
  if (x.rows() < 2) throw DataError("forest: need at least two rows");
  const Index n = x.rows();
  const int p = static_cast<int>(x.cols());
  const int m = y.num_classes();

  std::vector<DecisionTree> trees;
  Vector importances = Vector::Zero(p);
  const auto counts = y.counts();
  const bool single_class = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) < 2;
  if (single_class || p == 0) {
    // Constant target: one leaf predicting the observed class distribution.
    DecisionTree leaf;
    leaf.nodes.emplace_back();
    leaf.nodes[0].distribution.assign(static_cast<std::size_t>(m), 0.0);
    for (int c = 0; c < m; ++c) leaf.nodes[0].distribution[c] = static_cast<double>(counts[c]) / n;
    trees.push_back(std::move(leaf));
    return ForestModel(std::move(trees), std::move(importances), p, m);
  }

  std::vector<BinnedColumn> cols;
  cols.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) cols.push_back(bin_column(x, j, cfg.forest_max_bins));
  const auto keys = feature_keys(x);
  const int mtry = cfg.forest_feature_fraction
                       ? std::clamp(static_cast<int>(std::ceil(*cfg.forest_feature_fraction * p)), 1, p)
                       : std::clamp(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p)))), 1, p);
  const std::vector<int>& labels = y.values();

  trees.reserve(static_cast<std::size_t>(cfg.forest_trees));
  std::vector<double> multiplicity(static_cast<std::size_t>(n));
  for (int t = 0; t < cfg.forest_trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(cfg.seed, "tree", static_cast<std::uint64_t>(t));
    Rng boot(derive_seed(tree_seed, "bootstrap"));
    std::fill(multiplicity.begin(), multiplicity.end(), 0.0);
    for (Index i = 0; i < n; ++i) multiplicity[boot.below(static_cast<std::uint64_t>(n))] += 1.0;
    std::vector<Sample> samples;
    for (Index i = 0; i < n; ++i) {
      if (multiplicity[i] > 0.0) samples.push_back({static_cast<int>(i), multiplicity[i]});
    }
    TreeBuilder builder(cols, keys, labels, m, mtry, cfg.forest_max_depth, derive_seed(tree_seed, "split"));
    trees.push_back(builder.build(std::move(samples)));
    const auto& imp = builder.importance();
    const double s = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (s > 0.0) {
      for (int j = 0; j < p; ++j) importances[j] += imp[j] / s;
    }
  }
  const double total = importances.sum();
  if (total > 0.0) importances /= total;
  return ForestModel(std::move(trees), std::move(importances), p, m);
}

}  // namespace cqa
