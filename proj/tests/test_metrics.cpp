#include <gtest/gtest.h>

#include <cmath>

#include "cqa/error.hpp"
#include "cqa/metrics.hpp"
#include "cqa/synth.hpp"

using namespace cqa;

namespace {

GapCurve hand_curve(std::vector<double> gaps, double f1_gt) {
  GapCurve c;
  c.gaps = std::move(gaps);
  c.f1_gt.assign(c.gaps.size(), f1_gt);
  for (std::size_t i = 0; i < c.gaps.size(); ++i) {
    c.f1_cbm.push_back(f1_gt + c.gaps[i]);
    c.order.push_back(static_cast<int>(i));
  }
  return c;
}

ConceptMatrix binary(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return ConceptMatrix(m, ConceptKind::kBinaryLabels);
}

}  // namespace

TEST(RocAuc, HandComputedValues) {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<double> t = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(*roc_auc(s, t), 0.75);
  const std::vector<double> tied = {0.5, 0.5};
  const std::vector<double> tt = {0, 1};
  EXPECT_DOUBLE_EQ(*roc_auc(tied, tt), 0.5);
  const std::vector<double> one_class = {1, 1};
  EXPECT_FALSE(roc_auc(tied, one_class).has_value());
}

TEST(ConceptAuc, SkipsSingleClassColumns) {
  Matrix scores(4, 2);
  scores << 0.1, 0, 0.4, 1, 0.35, 2, 0.8, 3;
  const ConceptMatrix truth = binary({{0, 1}, {0, 1}, {1, 1}, {1, 1}});
  const ConceptAuc auc = concept_auc(ConceptMatrix(scores, ConceptKind::kScores), truth);
  EXPECT_DOUBLE_EQ(auc.mean, 0.75);
  EXPECT_EQ(auc.skipped, std::vector<int>{1});
  EXPECT_FALSE(auc.per_concept[1].has_value());
  const ConceptMatrix all_one = binary({{1}, {1}});
  EXPECT_THROW(concept_auc(all_one, all_one), NumericalError);
}

TEST(MacroF1, BinaryAndMulticlass) {
  // tp = 2, fp = 1, fn = 1.
  EXPECT_DOUBLE_EQ(macro_f1(LabelVector({1, 1, 1, 0, 0}, 2), LabelVector({1, 1, 0, 1, 0}, 2)), 2.0 / 3.0);
  // Class 2 is never predicted nor present: F1 0 by convention.
  const double f = macro_f1(LabelVector({0, 1, 1}, 3), LabelVector({0, 1, 0}, 3));
  EXPECT_DOUBLE_EQ(f, (2.0 / 3.0 + 2.0 / 3.0 + 0.0) / 3.0);
  EXPECT_DOUBLE_EQ(macro_f1(LabelVector({0, 0}, 2), LabelVector({0, 0}, 2)), 0.0);
}

TEST(Leak, HandCurves) {
  EXPECT_DOUBLE_EQ(leak(hand_curve({0.2, 0.2, 0.2, 0.2}, 0.8)).value, 1.0);
  EXPECT_NEAR(leak(hand_curve({0.1, 0.1, 0.1, 0.1}, 0.6)).value, 0.25, 1e-12);
  EXPECT_NEAR(leak(hand_curve({0.1, 0.0, -0.1, 0.0}, 0.6)).value, 0.0625, 1e-12);
  const LeakScore big = leak(hand_curve({0.5, 0.5}, 0.7));
  EXPECT_TRUE(big.clamped);
  EXPECT_EQ(big.value, 1.0);
  EXPECT_NEAR(big.unclamped, 1.0 / 0.6, 1e-12);
  EXPECT_THROW(leak(hand_curve({0.0, 0.0}, 1.0)), NumericalError);
}

TEST(Correlation, PearsonAndDegenerateColumns) {
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {2, 4, 6, 8};
  const std::vector<double> c = {1, 1, 1, 1};
  EXPECT_NEAR(pearson(a, b), 1.0, 1e-12);
  EXPECT_EQ(pearson(a, c), 0.0);
  const ConceptMatrix cm = binary({{0, 1}, {1, 1}, {0, 1}, {1, 1}});
  const auto r = concept_label_correlations(cm, LabelVector({0, 1, 0, 1}, 2));
  EXPECT_NEAR(r[0], 1.0, 1e-12);
  EXPECT_EQ(r[1], 0.0);
}

TEST(Correlation, MulticlassUsesBestOneHotIndicator) {
  const ConceptMatrix cm = binary({{1}, {0}, {0}, {1}, {0}, {0}});
  const auto r = concept_label_correlations(cm, LabelVector({2, 0, 1, 2, 0, 1}, 3));
  EXPECT_NEAR(r[0], 1.0, 1e-12);
}

TEST(Dci, IdentityAndUniformRelevance) {
  EXPECT_NEAR(dci_from_relevance(RelevanceMatrix(Matrix::Identity(5, 5))).dis, 1.0, 1e-12);
  EXPECT_NEAR(dci_from_relevance(RelevanceMatrix(Matrix::Constant(4, 4, 0.25))).dis, 0.0, 1e-12);
  // A source row with no relevance gets weight 0.
  Matrix r = Matrix::Zero(3, 3);
  r(0, 0) = 1;
  r(0, 1) = 1;
  r(2, 2) = 1;
  const DciResult d = dci_from_relevance(RelevanceMatrix(r));
  EXPECT_EQ(d.weights[1], 0.0);
  EXPECT_NEAR(d.per_concept_d[2], 1.0, 1e-12);
  EXPECT_NEAR(d.dis, (2.0 / 3.0) * (1.0 - std::log(2.0) / std::log(3.0)) + 1.0 / 3.0, 1e-12);
}

TEST(Ois, FromRelevance) {
  const RelevanceMatrix id(Matrix::Identity(2, 2));
  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  EXPECT_EQ(ois_from_relevance(id, id), 0.0);
  EXPECT_NEAR(ois_from_relevance(RelevanceMatrix(swap), id), 4.0, 1e-12);
}

TEST(Probes, PerfectConceptsAreDisentangledAndPure) {
  const LabeledDataset ds = generate_world(attribute_world(3, 6, 1000));
  SolverConfig cfg;
  cfg.seed = 9;
  const ProbeMetrics pm = dci_and_ois(ds.concepts(), ds.concepts(), cfg);
  EXPECT_NEAR(pm.dci.dis, 1.0, 1e-12);
  EXPECT_EQ(pm.ois.ois, 0.0);
  EXPECT_NEAR(dci(ds.concepts(), ds.concepts(), cfg).dis, pm.dci.dis, 1e-15);
  EXPECT_EQ(ois(ds.concepts(), ds.concepts(), cfg).ois, 0.0);
}

TEST(Probes, MixedConceptsLoseDisentanglement) {
  const LabeledDataset ds = generate_world(attribute_world(4, 6, 1500));
  SolverConfig cfg;
  cfg.seed = 2;
  const ConceptMatrix mixed = entangle(ds.concepts(), pairwise_mixing(6));
  const double clean = dci(ds.concepts(), ds.concepts(), cfg).dis;
  const double entangled = dci(mixed, ds.concepts(), cfg).dis;
  EXPECT_LT(entangled, clean - 0.2);
}

TEST(Probes, DisIgnoresPredictedColumnOrder) {
  WorldSpec spec = attribute_world(6, 6, 1500);
  spec.feature_noise = 0.5;
  const LabeledDataset ds = generate_world(spec);
  SolverConfig cfg;
  cfg.seed = 5;
  const ConceptMatrix mixed = entangle(ds.concepts(), interpolated_mixing(6, 0.5));
  const std::vector<int> perm = {3, 5, 0, 1, 4, 2};
  const double a = dci(mixed, ds.concepts(), cfg).dis;
  const double b = dci(mixed.select_cols(perm), ds.concepts(), cfg).dis;
  EXPECT_NEAR(a, b, 1e-9);
}

TEST(LeakGaps, TruthAsPredictionHasNoGap) {
  const LabeledDataset ds = generate_world(attribute_world(5, 8, 2000));
  const GapCurve curve = leak_gaps(ds, ds.concepts(), SolverConfig{});
  ASSERT_EQ(curve.gaps.size(), 8u);
  for (double g : curve.gaps) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(leak(curve).value, 0.0);
  // The label concepts are the most correlated, so they come last.
  EXPECT_TRUE((curve.order[6] == 0 && curve.order[7] == 1) || (curve.order[6] == 1 && curve.order[7] == 0));
}

TEST(Agreement, BinaryAnnotations) {
  const ConceptMatrix truth = binary({{1, 0}, {1, 0}, {0, 0}, {0, 1}});
  const ConceptMatrix ann = binary({{1, 0}, {0, 0}, {1, 0}, {0, 0}});
  const AgreementResult a = annotation_agreement(ann, truth, Vocabulary::numbered(2));
  EXPECT_DOUBLE_EQ(*a.per_concept[0].precision, 0.5);
  EXPECT_DOUBLE_EQ(*a.per_concept[0].recall, 0.5);
  EXPECT_FALSE(a.per_concept[1].precision.has_value());
  EXPECT_DOUBLE_EQ(*a.per_concept[1].recall, 0.0);
  EXPECT_DOUBLE_EQ(a.macro_precision, 0.5);
  EXPECT_DOUBLE_EQ(a.macro_recall, 0.25);
}

TEST(Agreement, ScoresAreBinarizedPerGroupAndPerConcept) {
  const Vocabulary vocab({"a", "b", "c"}, {{0, 1}});
  Matrix s(4, 3);
  s << 0.9, 0.2, -3, 0.1, 0.5, 2, 0.7, 0.6, -1, 0.0, 0.3, 4;
  const ConceptMatrix truth = binary({{1, 0, 0}, {0, 1, 1}, {1, 0, 0}, {0, 1, 1}});
  const ConceptMatrix bin = binarize_annotations(ConceptMatrix(s, ConceptKind::kScores), truth, vocab);
  ASSERT_TRUE(bin.is_binary());
  EXPECT_TRUE(bin == truth);
}
