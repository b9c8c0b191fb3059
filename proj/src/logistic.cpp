#include <algorithm>
#include <cmath>

#include "cqa/error.hpp"
#include "cqa/learners.hpp"

namespace cqa {
namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Vector sample_weights(const LabelVector& y, bool balanced) {
  const Index n = y.size();
  Vector s = Vector::Ones(n);
  if (!balanced) return s;
  const auto counts = y.counts();
  for (Index i = 0; i < n; ++i) {
    s[i] = static_cast<double>(n) / (2.0 * counts[static_cast<std::size_t>(y[i])]);
  }
  return s;
}

void require_binary_both(const LabelVector& y, const char* who) {
  if (y.num_classes() != 2) throw DataError(std::string(who) + ": labels must be binary");
  const auto c = y.counts();
  if (c[0] == 0 || c[1] == 0) {
    throw DataError(std::string(who) + ": labels contain a single class");
  }
}

}  // namespace

LogisticObjective logistic_objective(const Vector& w, double b, const Matrix& x,
                                     const LabelVector& y, double l2, bool balanced) {
  const Index n = x.rows();
  const Vector s = sample_weights(y, balanced);
  const Vector z = (x * w).array() + b;
  LogisticObjective out;
  Vector r(n);  // d loss_i / d z_i, scaled by s_i / n
  double value = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double yi = y[i];
    // xent(y, z) = softplus(z) - y z
    value += s[i] * (softplus(z[i]) - yi * z[i]);
    r[i] = s[i] * (sigmoid(z[i]) - yi) / static_cast<double>(n);
  }
  out.value = value / static_cast<double>(n) + 0.5 * l2 * w.squaredNorm();
  out.grad_w = x.transpose() * r + l2 * w;
  out.grad_b = r.sum();
  return out;
}

LinearModel train_logistic(const Matrix& x, const LabelVector& y, double l2, bool balanced) {
  if (x.rows() != y.size()) throw DataError("logistic: feature and label row counts differ");
  if (l2 < 0.0) throw ConfigError("logistic: l2 must be non-negative");
  require_binary_both(y, "logistic");

  const Index n = x.rows();
  const Index p = x.cols();
  const Vector s = sample_weights(y, balanced);
  Vector theta = Vector::Zero(p + 1);  // [w; b]
  // Start the bias at the (weighted) prior log-odds.
  {
    double pos = 0.0, tot = 0.0;
    for (Index i = 0; i < n; ++i) {
      pos += s[i] * y[i];
      tot += s[i];
    }
    const double prior = std::clamp(pos / tot, 1e-12, 1.0 - 1e-12);
    theta[p] = std::log(prior / (1.0 - prior));
  }

  auto eval = [&](const Vector& t) {
    return logistic_objective(t.head(p), t[p], x, y, l2, balanced);
  };

  LogisticObjective cur = eval(theta);
  constexpr int kMaxIters = 200;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    Vector grad(p + 1);
    grad << cur.grad_w, cur.grad_b;
    const double wnorm = theta.head(p).norm();
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-10 * (1.0 + wnorm)) break;

    const Vector z = (x * theta.head(p)).array() + theta[p];
    Vector h(n);
    for (Index i = 0; i < n; ++i) {
      const double q = sigmoid(z[i]);
      h[i] = s[i] * q * (1.0 - q) / static_cast<double>(n);
    }
    Matrix hess(p + 1, p + 1);
    hess.topLeftCorner(p, p).noalias() = x.transpose() * h.asDiagonal() * x;
    hess.topLeftCorner(p, p).diagonal().array() += l2;
    const Vector xh = x.transpose() * h;
    hess.topRightCorner(p, 1) = xh;
    hess.bottomLeftCorner(1, p) = xh.transpose();
    hess(p, p) = h.sum();
    // Small ridge keeps the system solvable on separable data with l2 = 0.
    hess.diagonal().array() += 1e-12 * (1.0 + hess.diagonal().maxCoeff());

    const Vector step = hess.ldlt().solve(-grad);
    const double slope = grad.dot(step);
    double t = 1.0;
    Vector next = theta + step;
    LogisticObjective trial = eval(next);
    while (!(trial.value <= cur.value + 1e-4 * t * slope) && t > 1e-12) {
      t *= 0.5;
      next = theta + t * step;
      trial = eval(next);
    }
    if (!(trial.value <= cur.value)) break;  // no further progress in floating point
    const bool stalled = cur.value - trial.value <= 1e-16 * std::abs(cur.value);
    theta = std::move(next);
    cur = std::move(trial);
    if (stalled) break;
  }
  if (!theta.allFinite()) throw NumericalError("logistic: non-finite parameters");

  Matrix weights = theta.head(p).transpose();
  Vector bias(1);
  bias[0] = theta[p];
  Regularization reg;
  reg.kind = Regularization::Kind::kLogistic;
  reg.l2 = l2;
  return LinearModel(std::move(weights), std::move(bias), 2, reg);
}

LinearModel train_ridge(const Matrix& x, const Vector& target, double l2) {
  if (x.rows() != target.size()) throw DataError("ridge: feature and target row counts differ");
  if (x.rows() < 1) throw DataError("ridge: no rows");
  if (l2 < 0.0) throw ConfigError("ridge: l2 must be non-negative");
  const Index n = x.rows();
  const Vector mean = x.colwise().mean();
  const double tmean = target.mean();
  const Matrix xc = x.rowwise() - mean.transpose();
  const Vector tc = target.array() - tmean;
  Matrix gram = xc.transpose() * xc / static_cast<double>(n);
  gram.diagonal().array() += l2 + 1e-12;
  const Vector w = gram.ldlt().solve(xc.transpose() * tc / static_cast<double>(n));
  Vector bias(1);
  bias[0] = tmean - mean.dot(w);
  Regularization reg;
  reg.kind = Regularization::Kind::kRidge;
  reg.l2 = l2;
  return LinearModel(w.transpose(), std::move(bias), 2, reg);
}

}  // namespace cqa
