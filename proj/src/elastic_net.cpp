// Multinomial elastic net by accelerated proximal gradient (FISTA) with
// function-value restarts. The step is 1/L with L from the Bohning bound on the
// softmax Hessian, so no line search is needed.

#include <cmath>
#include <string>

#include "cqa/error.hpp"
#include "cqa/learners.hpp"

namespace cqa {
namespace {

struct Params {
  Matrix w;  // m x p
  Vector b;  // m
};

Matrix one_hot(const LabelVector& y) {
  Matrix out = Matrix::Zero(y.size(), y.num_classes());
  for (Index i = 0; i < y.size(); ++i) out(i, y[i]) = 1.0;
  return out;
}

// Row-wise softmax of logits; returns mean cross-entropy against targets.
double softmax_xent(const Matrix& logits, const Matrix& targets, Matrix* probs) {
  const Index n = logits.rows();
  double loss = 0.0;
  probs->resize(logits.rows(), logits.cols());
  for (Index i = 0; i < n; ++i) {
    const double mx = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Index c = 0; c < logits.cols(); ++c) {
      const double e = std::exp(logits(i, c) - mx);
      (*probs)(i, c) = e;
      sum += e;
    }
    probs->row(i) /= sum;
    const double lse = mx + std::log(sum);
    for (Index c = 0; c < logits.cols(); ++c) {
      if (targets(i, c) != 0.0) loss += targets(i, c) * (lse - logits(i, c));
    }
  }
  return loss / static_cast<double>(n);
}

Matrix logits_of(const Params& prm, const Matrix& x) {
  Matrix z = x * prm.w.transpose();
  z.rowwise() += prm.b.transpose();
  return z;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

Matrix multinomial_loss_gradient(const LinearModel& model, const Matrix& x, const LabelVector& y,
                                 Vector* bias_grad) {
  if (model.weights().rows() != y.num_classes()) {
    throw DataError("multinomial gradient: model needs one weight row per class");
  }
  const Matrix targets = one_hot(y);
  Matrix probs;
  softmax_xent(model.decision_function(x), targets, &probs);
  const Matrix resid = (probs - targets) / static_cast<double>(x.rows());
  if (bias_grad) *bias_grad = resid.colwise().sum().transpose();
  return resid.transpose() * x;
}

KktResiduals elastic_net_kkt(const LinearModel& model, const Matrix& x, const LabelVector& y,
                             double lambda, double alpha) {
  Vector gb;
  const Matrix g = multinomial_loss_gradient(model, x, y, &gb);
  KktResiduals out;
  const Matrix& w = model.weights();
  for (Index c = 0; c < w.rows(); ++c) {
    for (Index j = 0; j < w.cols(); ++j) {
      const double wij = w(c, j);
      if (wij == 0.0) {
        out.zero_violation = std::max(out.zero_violation, std::abs(g(c, j)) - lambda * alpha);
      } else {
        const double r = g(c, j) + lambda * alpha * (wij > 0 ? 1.0 : -1.0) + lambda * (1.0 - alpha) * wij;
        out.nonzero_residual = std::max(out.nonzero_residual, std::abs(r));
      }
    }
  }
  out.bias_residual = gb.lpNorm<Eigen::Infinity>();
  return out;
}

LinearModel train_elastic_net(const Matrix& x, const LabelVector& y, const SolverConfig& cfg) {
  if (x.rows() != y.size()) throw DataError("elastic net: feature and label row counts differ");
  const int m = y.num_classes();
  if (x.rows() < m) throw DataError("elastic net: fewer rows than classes");
  const Index n = x.rows();
  const Index p = x.cols();
  const double lam = cfg.elastic_lambda;
  const double alpha = cfg.elastic_alpha;
  const double l1 = lam * alpha;
  const double l2 = lam * (1.0 - alpha);
  const Matrix targets = one_hot(y);

  // Lipschitz constant of the smooth part: 1/2 lambda_max([X 1]^T [X 1] / n) + l2.
  double lip;
  {
    Matrix gram(p + 1, p + 1);
    gram.topLeftCorner(p, p).noalias() = x.transpose() * x;
    const Vector colsum = x.colwise().sum().transpose();
    gram.topRightCorner(p, 1) = colsum;
    gram.bottomLeftCorner(1, p) = colsum.transpose();
    gram(p, p) = static_cast<double>(n);
    gram /= static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    lip = 0.5 * es.eigenvalues().maxCoeff() + l2;
  }
  const double step = 1.0 / lip;

  Matrix probs;
  auto objective = [&](const Params& prm, Matrix* pr) {
    const double xent = softmax_xent(logits_of(prm, x), targets, pr);
    return xent + l1 * prm.w.lpNorm<1>() + 0.5 * l2 * prm.w.squaredNorm();
  };
  auto smooth_grad = [&](const Params& prm, Params* g) {
    softmax_xent(logits_of(prm, x), targets, &probs);
    const Matrix resid = (probs - targets) / static_cast<double>(n);
    g->w = resid.transpose() * x + l2 * prm.w;
    g->b = resid.colwise().sum().transpose();
  };
  auto prox_step = [&](const Params& from, const Params& g) {
    Params out;
    out.w = from.w - step * g.w;
    for (Index c = 0; c < out.w.rows(); ++c) {
      for (Index j = 0; j < p; ++j) out.w(c, j) = soft_threshold(out.w(c, j), step * l1);
    }
    out.b = from.b - step * g.b;
    return out;
  };

  Params cur{Matrix::Zero(m, p), Vector::Zero(m)};
  Params mom = cur;
  Params grad;
  double f_cur = objective(cur, &probs);
  double t = 1.0;

  for (int iter = 0; iter < cfg.elastic_max_iters; ++iter) {
    smooth_grad(mom, &grad);
    Params next = prox_step(mom, grad);
    const double f_next = objective(next, &probs);
    if (!std::isfinite(f_next)) {
      throw NumericalError("elastic net: non-finite objective at iteration " + std::to_string(iter));
    }
    if (f_next > f_cur) {
      // Momentum overshot; restart from the last accepted iterate.
      t = 1.0;
      mom = cur;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    mom.w = next.w + beta * (next.w - cur.w);
    mom.b = next.b + beta * (next.b - cur.b);
    const double decrease = f_cur - f_next;
    cur = std::move(next);
    f_cur = f_next;
    t = t_next;

    if (decrease < cfg.elastic_tolerance * std::max(1.0, std::abs(f_cur))) {
      // Objective has flattened; accept only if the prox-gradient fixed point
      // residual is also small, otherwise keep iterating without momentum.
      Params g;
      smooth_grad(cur, &g);
      const Params probe = prox_step(cur, g);
      const double residual = std::max((cur.w - probe.w).lpNorm<Eigen::Infinity>(),
                                       (cur.b - probe.b).lpNorm<Eigen::Infinity>()) / step;
      if (residual <= 1e-7) break;
      t = 1.0;
      mom = cur;
    }
  }

  Regularization reg;
  reg.kind = Regularization::Kind::kElasticNet;
  reg.lambda = lam;
  reg.alpha = alpha;
  return LinearModel(std::move(cur.w), std::move(cur.b), m, reg);
}

}  // namespace cqa
