// Dual coordinate descent for the L2-regularized hinge-loss SVM, with the
// shrinking heuristic of Hsieh et al. (2008). Identical (x, y) rows are merged
// first; a row repeated r times has dual box [0, r*C], which leaves the primal
// unchanged.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cqa/error.hpp"
#include "cqa/learners.hpp"
#include "cqa/random.hpp"

namespace cqa {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MergedRows {
  RowMatrix x;
  std::vector<int> label;
  Vector count;
};

MergedRows merge_duplicates(const Matrix& x, const LabelVector& y) {
  const Index n = x.rows();
  const Index p = x.cols();
  RowMatrix rows = x;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](int a, int b) {
    if (y[a] != y[b]) return y[a] < y[b];
    for (Index j = 0; j < p; ++j) {
      if (rows(a, j) != rows(b, j)) return rows(a, j) < rows(b, j);
    }
    return a < b;
  };
  auto same = [&](int a, int b) {
    if (y[a] != y[b]) return false;
    for (Index j = 0; j < p; ++j) {
      if (rows(a, j) != rows(b, j)) return false;
    }
    return true;
  };
  std::sort(order.begin(), order.end(), less);

  std::vector<int> first;
  std::vector<double> count;
  for (int idx : order) {
    if (!first.empty() && same(first.back(), idx)) {
      count.back() += 1.0;
    } else {
      first.push_back(idx);
      count.push_back(1.0);
    }
  }
  MergedRows out;
  out.x.resize(static_cast<Index>(first.size()), p);
  out.label.resize(first.size());
  out.count.resize(static_cast<Index>(first.size()));
  for (std::size_t u = 0; u < first.size(); ++u) {
    out.x.row(static_cast<Index>(u)) = rows.row(first[u]);
    out.label[u] = y[first[u]];
    out.count[static_cast<Index>(u)] = count[u];
  }
  return out;
}

// Returns (w, b) for labels sign in {-1, +1}.
std::pair<Vector, double> solve_binary(const RowMatrix& x, const std::vector<double>& sign,
                                       const Vector& upper, double tol, int max_epochs,
                                       std::uint64_t seed) {
  const Index l = x.rows();
  const Index p = x.cols();
  Vector w = Vector::Zero(p);
  double b = 0.0;
  Vector alpha = Vector::Zero(l);
  Vector qd(l);
  for (Index i = 0; i < l; ++i) qd[i] = x.row(i).squaredNorm() + 1.0;

  std::vector<Index> index(static_cast<std::size_t>(l));
  std::iota(index.begin(), index.end(), Index{0});
  Rng rng(seed);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  double pg_max_old = kInf;
  double pg_min_old = -kInf;
  Index active = l;

  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    double pg_max_new = -kInf;
    double pg_min_new = kInf;
    for (Index s = active; s > 1; --s) {
      std::swap(index[s - 1], index[rng.below(static_cast<std::uint64_t>(s))]);
    }
    for (Index s = 0; s < active; ++s) {
      const Index i = index[s];
      const double yi = sign[i];
      const double g = yi * (x.row(i).dot(w) + b) - 1.0;
      const double c = upper[i];
      double pg = 0.0;
      if (alpha[i] == 0.0) {
        if (g > pg_max_old) {
          --active;
          std::swap(index[s], index[active]);
          --s;
          continue;
        }
        if (g < 0.0) pg = g;
      } else if (alpha[i] == c) {
        if (g < pg_min_old) {
          --active;
          std::swap(index[s], index[active]);
          --s;
          continue;
        }
        if (g > 0.0) pg = g;
      } else {
        pg = g;
      }
      pg_max_new = std::max(pg_max_new, pg);
      pg_min_new = std::min(pg_min_new, pg);
      if (std::abs(pg) > 1e-14) {
        const double old = alpha[i];
        alpha[i] = std::min(std::max(old - g / qd[i], 0.0), c);
        const double d = (alpha[i] - old) * yi;
        w.noalias() += d * x.row(i).transpose();
        b += d;
      }
    }
    if (pg_max_new - pg_min_new <= tol) {
      if (active == l) break;
      active = l;
      pg_max_old = kInf;
      pg_min_old = -kInf;
      continue;
    }
    pg_max_old = pg_max_new <= 0.0 ? kInf : pg_max_new;
    pg_min_old = pg_min_new >= 0.0 ? -kInf : pg_min_new;
  }
  return {std::move(w), b};
}

}  // namespace

LinearModel train_linear_svm(const Matrix& x, const LabelVector& y, const SolverConfig& cfg) {
  if (x.rows() != y.size()) throw DataError("svm: feature and label row counts differ");
  if (x.rows() < 2) throw DataError("svm: need at least two rows");
  const int m = y.num_classes();
  const auto counts = y.counts();
  const int present = static_cast<int>(std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }));
  if (present < 2) {
    throw DataError("svm: labels contain a single class; handle the degenerate case before training");
  }
  const MergedRows merged = merge_duplicates(x, y);
  const Vector upper = cfg.svm_c * merged.count;
  const Index problems = m == 2 ? 1 : m;

  Matrix weights(problems, x.cols());
  Vector bias(problems);
  std::vector<double> sign(merged.label.size());
  for (Index c = 0; c < problems; ++c) {
    const int positive = m == 2 ? 1 : static_cast<int>(c);
    for (std::size_t i = 0; i < sign.size(); ++i) sign[i] = merged.label[i] == positive ? 1.0 : -1.0;
    auto [w, b] = solve_binary(merged.x, sign, upper, cfg.svm_tolerance, cfg.svm_max_epochs,
                               derive_seed(cfg.seed, "svm", static_cast<std::uint64_t>(c)));
    weights.row(c) = w.transpose();
    bias[c] = b;
  }
  Regularization reg;
  reg.kind = Regularization::Kind::kHinge;
  reg.c = cfg.svm_c;
  return LinearModel(std::move(weights), std::move(bias), m, reg);
}

double svm_primal_objective(const Vector& w, double b, const Matrix& x, const LabelVector& y, double c) {
  double loss = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double yi = y[i] == 1 ? 1.0 : -1.0;
    loss += std::max(0.0, 1.0 - yi * (x.row(i).dot(w) + b));
  }
  return 0.5 * (w.squaredNorm() + b * b) + c * loss;
}

}  // namespace cqa
