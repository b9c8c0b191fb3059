#include "cqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cqa/error.hpp"
#include "cqa/metrics.hpp"
#include "cqa/random.hpp"

namespace cqa {
namespace {

std::vector<int> group_index_of(const WorldSpec& spec) {
  std::vector<int> g(static_cast<std::size_t>(spec.k), -1);
  for (std::size_t i = 0; i < spec.groups.size(); ++i) {
    for (int c : spec.groups[i]) g[c] = static_cast<int>(i);
  }
  return g;
}

int apply_rule(const LabelRule& rule, const WorldSpec& spec, const Matrix& c, Index row) {
  switch (rule.kind) {
    case LabelRule::Kind::kAllOf:
      for (int j : rule.concepts) {
        if (c(row, j) == 0.0) return 0;
      }
      return 1;
    case LabelRule::Kind::kAnyOf:
      for (int j : rule.concepts) {
        if (c(row, j) != 0.0) return 1;
      }
      return 0;
    case LabelRule::Kind::kGroupIndex: {
      const auto& g = spec.groups[rule.group];
      for (std::size_t t = 0; t < g.size(); ++t) {
        if (c(row, g[t]) != 0.0) return static_cast<int>(t);
      }
      return 0;
    }
  }
  return 0;
}

}  // namespace

std::string_view to_string(LabelRule::Kind kind) {
  switch (kind) {
    case LabelRule::Kind::kAllOf: return "all_of";
    case LabelRule::Kind::kAnyOf: return "any_of";
    case LabelRule::Kind::kGroupIndex: return "group_index";
  }
  return "all_of";
}

LabelRule::Kind label_rule_kind_from_string(std::string_view s) {
  if (s == "all_of") return LabelRule::Kind::kAllOf;
  if (s == "any_of") return LabelRule::Kind::kAnyOf;
  if (s == "group_index") return LabelRule::Kind::kGroupIndex;
  throw ConfigError("world: unknown label rule '" + std::string(s) + "' (all_of, any_of, group_index)");
}

void WorldSpec::validate() const {
  if (k < 1) throw ConfigError("world: k must be >= 1");
  if (d < 1) throw ConfigError("world: d must be >= 1");
  if (n < 10) throw ConfigError("world: n must be >= 10 so every split is non-empty");
  if (!(feature_noise >= 0.0) || !std::isfinite(feature_noise)) {
    throw ConfigError("world: feature_noise must be finite and >= 0");
  }
  if (!(singleton_prevalence > 0.0 && singleton_prevalence < 1.0)) {
    throw ConfigError("world: singleton_prevalence must lie in (0, 1)");
  }
  if (!names.empty() && static_cast<int>(names.size()) != k) {
    throw ConfigError("world: names has " + std::to_string(names.size()) + " entries, k = " + std::to_string(k));
  }
  std::set<int> seen;
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw ConfigError("world: groups need at least two concepts");
    total += g.size();
    for (int c : g) {
      if (c < 0 || c >= k) throw ConfigError("world: group index " + std::to_string(c) + " out of range");
      if (!seen.insert(c).second) throw ConfigError("world: concept " + std::to_string(c) + " in two groups");
    }
  }
  if (total > static_cast<std::size_t>(k)) throw ConfigError("world: group sizes exceed k");
  if (label_rule.kind == LabelRule::Kind::kGroupIndex) {
    if (label_rule.group < 0 || label_rule.group >= static_cast<int>(groups.size())) {
      throw ConfigError("world: label rule references group " + std::to_string(label_rule.group) +
                        " but only " + std::to_string(groups.size()) + " exist");
    }
  } else {
    if (label_rule.concepts.empty()) throw ConfigError("world: label rule needs at least one concept");
    for (int c : label_rule.concepts) {
      if (c < 0 || c >= k) {
        throw ConfigError("world: label rule references concept " + std::to_string(c) + " outside [0, k)");
      }
    }
  }
}

Vocabulary WorldSpec::vocabulary() const {
  if (names.empty()) return Vocabulary(Vocabulary::numbered(k).names(), groups);
  return Vocabulary(names, groups);
}

int WorldSpec::num_classes() const {
  if (label_rule.kind == LabelRule::Kind::kGroupIndex) return static_cast<int>(groups[label_rule.group].size());
  return 2;
}

WorldSpec shapes3d_like_world(std::uint64_t seed, int n) {
  WorldSpec spec;
  spec.k = 42;
  spec.d = 48;
  spec.n = n;
  spec.seed = seed;
  const std::vector<std::pair<std::string, int>> factors = {
      {"wall_hue", 10}, {"floor_hue", 10}, {"object_hue", 10}, {"scale", 8}, {"shape", 4}};
  int next = 0;
  for (const auto& [name, size] : factors) {
    std::vector<int> g;
    for (int i = 0; i < size; ++i) {
      spec.names.push_back(name + "_" + std::to_string(i));
      g.push_back(next++);
    }
    spec.groups.push_back(std::move(g));
  }
  spec.label_rule = {LabelRule::Kind::kAllOf, {20, 41}, 0};
  return spec;
}

WorldSpec attribute_world(std::uint64_t seed, int k, int n) {
  WorldSpec spec;
  spec.k = k;
  spec.d = 2 * k;
  spec.n = n;
  spec.seed = seed;
  spec.label_rule = {LabelRule::Kind::kAllOf, {0, 1}, 0};
  return spec;
}

double concept_prevalence(const WorldSpec& spec, int j) {
  for (const auto& g : spec.groups) {
    if (std::find(g.begin(), g.end(), j) != g.end()) return 1.0 / static_cast<double>(g.size());
  }
  return spec.singleton_prevalence;
}

LabeledDataset generate_world(const WorldSpec& spec) {
  spec.validate();
  const Index n = spec.n;
  const Index k = spec.k;
  const Index d = spec.d;
  const auto group_of = group_index_of(spec);

  Matrix c = Matrix::Zero(n, k);
  Rng concept_rng(derive_seed(spec.seed, "concepts"));
  for (Index i = 0; i < n; ++i) {
    for (const auto& g : spec.groups) c(i, g[concept_rng.below(g.size())]) = 1.0;
    for (Index j = 0; j < k; ++j) {
      if (group_of[j] < 0 && concept_rng.bernoulli(spec.singleton_prevalence)) c(i, j) = 1.0;
    }
  }

  std::vector<int> y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) y[i] = apply_rule(spec.label_rule, spec, c, i);

  Matrix e(d, k);
  Rng embed_rng(derive_seed(spec.seed, "embedding"));
  for (Index j = 0; j < k; ++j) {
    for (Index r = 0; r < d; ++r) e(r, j) = embed_rng.normal();
  }
  if (d >= k) {
    // Orthonormal columns: a near-square Gaussian embedding is badly
    // conditioned and lets each concept head pick up other concepts.
    const Eigen::HouseholderQR<Matrix> qr(e);
    e = qr.householderQ() * Matrix::Identity(d, k);
  } else {
    e /= std::sqrt(static_cast<double>(d));
  }
  Matrix x = c * e.transpose();
  if (spec.feature_noise > 0.0) {
    Rng noise_rng(derive_seed(spec.seed, "noise"));
    for (Index i = 0; i < n; ++i) {
      for (Index r = 0; r < d; ++r) x(i, r) += spec.feature_noise * noise_rng.normal();
    }
  }

  std::vector<Split> split(static_cast<std::size_t>(n));
  const Index n_train = n * 7 / 10;
  const Index n_val = n * 8 / 10;
  for (Index i = 0; i < n; ++i) split[i] = i < n_train ? Split::kTrain : i < n_val ? Split::kVal : Split::kTest;

  const int m = spec.num_classes();
  std::vector<int> train_counts(static_cast<std::size_t>(m), 0);
  for (Index i = 0; i < n_train; ++i) ++train_counts[y[i]];
  const int present = static_cast<int>(std::count_if(train_counts.begin(), train_counts.end(),
                                                     [](int v) { return v > 0; }));
  if (present < 2) {
    throw DataError("world: label rule gives a single class on the training rows at n = " +
                    std::to_string(n) + "; change the rule or increase n");
  }

  return LabeledDataset(std::move(x), ConceptMatrix(std::move(c), ConceptKind::kBinaryLabels),
                        LabelVector(std::move(y), m), spec.vocabulary(), std::move(split));
}

FlipRates calibrate_flip_rates(double target_precision, double target_recall, double prevalence) {
  if (!(prevalence > 0.0 && prevalence < 1.0)) throw ConfigError("calibrate: prevalence must lie in (0, 1)");
  if (!(target_precision > 0.0 && target_precision <= 1.0)) {
    throw ConfigError("calibrate: target precision must lie in (0, 1]");
  }
  if (!(target_recall > 0.0 && target_recall <= 1.0)) {
    throw ConfigError("calibrate: target recall must lie in (0, 1]");
  }
  const double p = prevalence;
  const double r = target_recall;
  const double bound = p * r / (p * r + (1.0 - p));
  FlipRates out;
  out.fnr = 1.0 - r;
  out.fpr = p * r * (1.0 - target_precision) / (target_precision * (1.0 - p));
  if (out.fpr > 1.0) {
    std::ostringstream os;
    os << "calibrate: precision " << target_precision << " is infeasible with recall " << r
       << " at prevalence " << p << "; precision must be >= " << bound;
    throw ConfigError(os.str());
  }
  const auto [pr, rc] = flip_agreement(out, p);
  if (std::abs(pr - target_precision) > 1e-9 || std::abs(rc - r) > 1e-9) {
    throw NumericalError("calibrate: closed-form check failed");
  }
  return out;
}

std::pair<double, double> flip_agreement(const FlipRates& rates, double prevalence) {
  const double tp = prevalence * (1.0 - rates.fnr);
  const double fp = (1.0 - prevalence) * rates.fpr;
  const double precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  return {precision, 1.0 - rates.fnr};
}

std::string_view to_string(AnnotatorSpec::Mode mode) {
  return mode == AnnotatorSpec::Mode::kFlip ? "flip" : "score";
}

AnnotatorSpec::Mode annotator_mode_from_string(std::string_view s) {
  if (s == "flip") return AnnotatorSpec::Mode::kFlip;
  if (s == "score") return AnnotatorSpec::Mode::kScore;
  throw ConfigError("annotator: unknown mode '" + std::string(s) + "' (flip, score)");
}

void AnnotatorSpec::validate() const {
  for (const auto& f : flips) {
    if (!(f.fpr >= 0.0 && f.fpr <= 1.0) || !(f.fnr >= 0.0 && f.fnr <= 1.0)) {
      throw ConfigError("annotator: flip rates must lie in [0, 1]");
    }
  }
  if (!(signal_strength >= 0.0) || !std::isfinite(signal_strength)) {
    throw ConfigError("annotator: signal_strength must be finite and >= 0");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("annotator: noise_std must be >= 0");
  if (label_leak && (!(*label_leak >= 0.0) || !std::isfinite(*label_leak))) {
    throw ConfigError("annotator: label_leak strength must be finite and >= 0");
  }
}

int leak_target_concept(const LabeledDataset& ds) {
  const auto corr = concept_label_correlations(ds.concepts(), ds.labels());
  int best = 0;
  for (int j = 1; j < static_cast<int>(corr.size()); ++j) {
    if (std::abs(corr[j]) < std::abs(corr[best])) best = j;
  }
  return best;
}

ConceptMatrix simulate_annotator(const LabeledDataset& ds, const AnnotatorSpec& spec) {
  spec.validate();
  const Matrix& truth = ds.concepts().values();
  const Index n = truth.rows();
  const Index k = truth.cols();
  Matrix out(n, k);
  Rng rng(derive_seed(spec.seed, "annotator"));

  if (spec.mode == AnnotatorSpec::Mode::kFlip) {
    if (!spec.flips.empty() && spec.flips.size() != 1 && static_cast<Index>(spec.flips.size()) != k) {
      throw ConfigError("annotator: expected 1 or " + std::to_string(k) + " flip-rate entries, got " +
                        std::to_string(spec.flips.size()));
    }
    auto rates = [&](Index j) {
      if (spec.flips.empty()) return FlipRates{};
      return spec.flips.size() == 1 ? spec.flips[0] : spec.flips[j];
    };
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < k; ++j) {
        const FlipRates f = rates(j);
        const double u = rng.uniform();
        const bool on = truth(i, j) != 0.0;
        out(i, j) = on ? (u < f.fnr ? 0.0 : 1.0) : (u < f.fpr ? 1.0 : 0.0);
      }
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < k; ++j) {
        out(i, j) = spec.signal_strength * (2.0 * truth(i, j) - 1.0) + spec.noise_std * rng.normal();
      }
    }
  }

  if (!spec.label_leak) {
    return ConceptMatrix(std::move(out),
                         spec.mode == AnnotatorSpec::Mode::kFlip ? ConceptKind::kBinaryLabels : ConceptKind::kScores);
  }
  if (ds.num_classes() != 2) throw ConfigError("annotator: label_leak needs a binary label");
  const int target = leak_target_concept(ds);
  for (Index i = 0; i < n; ++i) out(i, target) += *spec.label_leak * (2.0 * ds.labels()[i] - 1.0);
  return ConceptMatrix(std::move(out), ConceptKind::kScores);
}

void EntangleSpec::validate() const {
  if (mixing.rows() != mixing.cols()) throw DataError("entangle: mixing matrix must be square");
  for (Index i = 0; i < mixing.rows(); ++i) {
    if ((mixing.row(i).array() < 0.0).any() || !mixing.row(i).allFinite()) {
      throw DataError("entangle: mixing row " + std::to_string(i) + " has a negative or non-finite entry");
    }
    if (std::abs(mixing.row(i).sum() - 1.0) > 1e-9) {
      throw DataError("entangle: mixing row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

EntangleSpec interpolated_mixing(int k, double t) {
  if (k < 1 || !(t >= 0.0 && t <= 1.0)) throw ConfigError("entangle: need k >= 1 and t in [0, 1]");
  Matrix m = Matrix::Constant(k, k, t / k);
  m.diagonal().array() += 1.0 - t;
  return {std::move(m)};
}

EntangleSpec pairwise_mixing(int k) {
  if (k < 1) throw ConfigError("entangle: need k >= 1");
  Matrix m = Matrix::Zero(k, k);
  for (int i = 0; i + 1 < k; i += 2) m.block(i, i, 2, 2).setConstant(0.5);
  if (k % 2 == 1) m(k - 1, k - 1) = 1.0;
  return {std::move(m)};
}

ConceptMatrix entangle(const ConceptMatrix& predicted, const EntangleSpec& spec) {
  spec.validate();
  if (spec.mixing.rows() != predicted.cols()) {
    throw DataError("entangle: mixing is " + std::to_string(spec.mixing.rows()) + "x" +
                    std::to_string(spec.mixing.rows()) + " but predicted has " +
                    std::to_string(predicted.cols()) + " concepts");
  }
  return ConceptMatrix(predicted.values() * spec.mixing.transpose(), ConceptKind::kScores);
}

}  // namespace cqa
