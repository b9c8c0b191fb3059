#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cqa/error.hpp"
#include "cqa/log.hpp"
#include "cqa/metrics.hpp"
#include "cqa/random.hpp"

namespace cqa {

GapCurve leak_gaps(const LabeledDataset& ds, const ConceptMatrix& predicted, const SolverConfig& cfg) {
  if (predicted.rows() != ds.size()) {
    throw DataError("leak_gaps: predicted concepts cover " + std::to_string(predicted.rows()) +
                    " rows, dataset has " + std::to_string(ds.size()));
  }
  const int k = ds.num_concepts();
  if (predicted.cols() != k) throw DataError("leak_gaps: predicted and ground-truth concept counts differ");
  const auto train = ds.rows(Split::kTrain);
  const auto test = ds.rows(Split::kTest);
  if (train.empty() || test.empty()) throw DataError("leak_gaps: train and test splits must be non-empty");

  const LabelVector y_train = ds.labels().select(train);
  const LabelVector y_test = ds.labels().select(test);
  {
    const auto c = y_train.counts();
    if (std::count_if(c.begin(), c.end(), [](int v) { return v > 0; }) < 2) {
      throw DataError("leak_gaps: train split labels contain a single class");
    }
  }

  const ConceptMatrix gt_train = ds.concepts().select_rows(train);
  const auto corr = concept_label_correlations(gt_train, y_train);
  GapCurve curve;
  curve.order.resize(static_cast<std::size_t>(k));
  std::iota(curve.order.begin(), curve.order.end(), 0);
  std::stable_sort(curve.order.begin(), curve.order.end(),
                   [&](int a, int b) { return std::abs(corr[a]) < std::abs(corr[b]); });

  const Matrix pred_train = take_rows(predicted.values(), train);
  const Matrix pred_test = take_rows(predicted.values(), test);
  const Matrix truth_train = gt_train.values();
  const Matrix truth_test = take_rows(ds.concepts().values(), test);

  for (int l = 1; l <= k; ++l) {
    const std::span<const int> cols(curve.order.data(), static_cast<std::size_t>(l));
    SolverConfig svm_cfg = cfg;
    svm_cfg.seed = derive_seed(cfg.seed, "leak", static_cast<std::uint64_t>(l));

    const LinearModel on_pred = train_linear_svm(take_cols(pred_train, cols), y_train, svm_cfg);
    const double f1_pred = macro_f1(on_pred.predict(take_cols(pred_test, cols)).labels, y_test);
    const LinearModel on_gt = train_linear_svm(take_cols(truth_train, cols), y_train, svm_cfg);
    const double f1_gt = macro_f1(on_gt.predict(take_cols(truth_test, cols)).labels, y_test);

    curve.f1_cbm.push_back(f1_pred);
    curve.f1_gt.push_back(f1_gt);
    curve.gaps.push_back(f1_pred - f1_gt);
  }
  return curve;
}

LeakScore leak(const GapCurve& curve) {
  const std::size_t k = curve.gaps.size();
  if (k == 0 || curve.f1_gt.size() != k) throw DataError("leak: malformed gap curve");
  double mean_gt = 0.0;
  for (double f : curve.f1_gt) mean_gt += f;
  mean_gt /= static_cast<double>(k);
  const double z = 1.0 - mean_gt;
  if (z <= 1e-9) throw NumericalError("LEAK undefined: zero headroom");
  double sum = 0.0;
  for (double g : curve.gaps) sum += std::max(g, 0.0);
  LeakScore out;
  out.unclamped = sum / (static_cast<double>(k) * z);
  out.value = std::clamp(out.unclamped, 0.0, 1.0);
  out.clamped = out.value != out.unclamped;
  if (out.clamped) {
    std::ostringstream os;
    os << "LEAK clamped from " << out.unclamped << " to " << out.value;
    log_warning(os.str());
  }
  return out;
}

}  // namespace cqa
