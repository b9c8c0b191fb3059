#include <gtest/gtest.h>

#include <cmath>

#include "cqa/error.hpp"
#include "cqa/metrics.hpp"
#include "cqa/synth.hpp"

using namespace cqa;

TEST(WorldSpec, ValidateRejectsInconsistentSpecs) {
  WorldSpec s = attribute_world(1, 4, 100);
  EXPECT_NO_THROW(s.validate());
  s.label_rule.concepts = {0, 9};
  EXPECT_THROW(s.validate(), ConfigError);
  s = attribute_world(1, 4, 100);
  s.groups = {{0, 1}, {1, 2}};
  EXPECT_THROW(s.validate(), ConfigError);
  s = attribute_world(1, 4, 100);
  s.feature_noise = -1;
  EXPECT_THROW(s.validate(), ConfigError);
  s = attribute_world(1, 4, 100);
  s.names = {"a"};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(GenerateWorld, DeterministicPerSeed) {
  const LabeledDataset a = generate_world(shapes3d_like_world(5, 500));
  const LabeledDataset b = generate_world(shapes3d_like_world(5, 500));
  const LabeledDataset c = generate_world(shapes3d_like_world(6, 500));
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(GenerateWorld, GroupsAreOneHotAndLabelsFollowRule) {
  const WorldSpec spec = shapes3d_like_world(2, 3000);
  const LabeledDataset ds = generate_world(spec);
  const Matrix& c = ds.concepts().values();
  for (const auto& g : spec.groups) {
    for (Index i = 0; i < c.rows(); ++i) {
      double active = 0;
      for (int j : g) active += c(i, j);
      ASSERT_EQ(active, 1.0) << "row " << i;
    }
  }
  for (Index i = 0; i < c.rows(); ++i) {
    const int expected = c(i, 20) == 1.0 && c(i, 41) == 1.0 ? 1 : 0;
    ASSERT_EQ(ds.labels()[i], expected);
  }
  EXPECT_EQ(ds.vocabulary().groups().size(), 5u);
  EXPECT_EQ(ds.rows(Split::kTrain).size(), 2100u);
  EXPECT_EQ(ds.rows(Split::kVal).size(), 300u);
  EXPECT_EQ(ds.rows(Split::kTest).size(), 600u);
}

TEST(GenerateWorld, PrevalenceMatchesSpec) {
  const WorldSpec spec = shapes3d_like_world(3, 20000);
  const LabeledDataset ds = generate_world(spec);
  for (int j : {0, 20, 35, 41}) {
    EXPECT_NEAR(ds.concepts().values().col(j).mean(), concept_prevalence(spec, j), 0.015) << "concept " << j;
  }
}

TEST(GenerateWorld, NoiselessFeaturesAreLinearInConcepts) {
  const WorldSpec spec = attribute_world(4, 8, 400);
  const LabeledDataset ds = generate_world(spec);
  // X = C E^T with E of full column rank, so C is an exact linear function of X.
  const Matrix& x = ds.features();
  const Matrix& c = ds.concepts().values();
  const Matrix coef = x.colPivHouseholderQr().solve(c);
  EXPECT_LE((x * coef - c).norm(), 1e-8);
}

TEST(GenerateWorld, MulticlassGroupIndexRule) {
  WorldSpec spec = shapes3d_like_world(7, 1000);
  spec.label_rule = {LabelRule::Kind::kGroupIndex, {}, 4};
  EXPECT_EQ(spec.num_classes(), 4);
  const LabeledDataset ds = generate_world(spec);
  const Matrix& c = ds.concepts().values();
  for (Index i = 0; i < c.rows(); ++i) ASSERT_EQ(c(i, 38 + ds.labels()[i]), 1.0);
}

TEST(FlipCalibration, RoundTripsAndReportsInfeasibleTargets) {
  for (double p : {0.1, 0.5}) {
    const FlipRates f = calibrate_flip_rates(0.58, 0.65, p);
    const auto [prec, rec] = flip_agreement(f, p);
    EXPECT_NEAR(prec, 0.58, 1e-12);
    EXPECT_NEAR(rec, 0.65, 1e-12);
  }
  try {
    calibrate_flip_rates(0.18, 0.64, 0.5);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("precision"), std::string::npos) << e.what();
  }
}

TEST(Annotator, FlipRatesAreRealized) {
  const WorldSpec spec = attribute_world(8, 4, 20000);
  const LabeledDataset ds = generate_world(spec);
  AnnotatorSpec a;
  a.flips = {calibrate_flip_rates(0.69, 0.67, 0.5)};
  a.seed = 3;
  const ConceptMatrix ann = simulate_annotator(ds, a);
  ASSERT_TRUE(ann.is_binary());
  const AgreementResult r = annotation_agreement(ann, ds.concepts(), ds.vocabulary());
  EXPECT_NEAR(r.macro_precision, 0.69, 0.03);
  EXPECT_NEAR(r.macro_recall, 0.67, 0.03);
  EXPECT_TRUE(simulate_annotator(ds, a) == ann);
}

TEST(Annotator, NoiselessFlipIsGroundTruth) {
  const LabeledDataset ds = generate_world(attribute_world(9, 5, 300));
  EXPECT_TRUE(simulate_annotator(ds, AnnotatorSpec{}) == ds.concepts());
}

TEST(Annotator, ScoreMode) {
  const LabeledDataset ds = generate_world(attribute_world(10, 3, 200));
  AnnotatorSpec a;
  a.mode = AnnotatorSpec::Mode::kScore;
  a.signal_strength = 2.0;
  const ConceptMatrix s = simulate_annotator(ds, a);
  EXPECT_EQ(s.kind(), ConceptKind::kScores);
  EXPECT_TRUE(s.values().isApprox(2.0 * (2.0 * ds.concepts().values().array() - 1.0).matrix()));
}

TEST(Annotator, LabelLeakWritesToLeastCorrelatedConcept) {
  const LabeledDataset ds = generate_world(attribute_world(11, 6, 2000));
  const int target = leak_target_concept(ds);
  EXPECT_GE(target, 2);  // concepts 0 and 1 define the label
  AnnotatorSpec a;
  a.label_leak = 0.5;
  const ConceptMatrix s = simulate_annotator(ds, a);
  EXPECT_EQ(s.kind(), ConceptKind::kScores);
  for (Index i = 0; i < s.rows(); ++i) {
    for (Index j = 0; j < s.cols(); ++j) {
      const double expected = ds.concepts().values()(i, j) + (j == target ? 0.5 * (2.0 * ds.labels()[i] - 1.0) : 0.0);
      ASSERT_EQ(s.values()(i, j), expected);
    }
  }
}

TEST(Annotator, WrongFlipCountIsAConfigError) {
  const LabeledDataset ds = generate_world(attribute_world(12, 4, 100));
  AnnotatorSpec a;
  a.flips = {FlipRates{}, FlipRates{}};
  EXPECT_THROW(simulate_annotator(ds, a), ConfigError);
}

TEST(Entangle, MixingMatrices) {
  const EntangleSpec id = interpolated_mixing(4, 0.0);
  EXPECT_TRUE(id.mixing.isIdentity());
  const EntangleSpec full = interpolated_mixing(4, 1.0);
  EXPECT_TRUE(full.mixing.isApprox(Matrix::Constant(4, 4, 0.25)));
  const EntangleSpec pairs = pairwise_mixing(3);
  EXPECT_EQ(pairs.mixing(0, 1), 0.5);
  EXPECT_EQ(pairs.mixing(2, 2), 1.0);
  EXPECT_THROW(interpolated_mixing(4, 1.5), ConfigError);
  EntangleSpec bad{Matrix::Identity(2, 2) * 2.0};
  EXPECT_THROW(bad.validate(), DataError);
}

TEST(Entangle, AppliesMixingToRows) {
  Matrix c(2, 2);
  c << 1, 0, 0, 1;
  const ConceptMatrix mixed = entangle(ConceptMatrix(c, ConceptKind::kBinaryLabels), pairwise_mixing(2));
  EXPECT_TRUE(mixed.values().isApprox(Matrix::Constant(2, 2, 0.5)));
  EXPECT_THROW(entangle(ConceptMatrix(c, ConceptKind::kScores), pairwise_mixing(3)), DataError);
}
