#include "cqa/cbm.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "cqa/error.hpp"
#include "cqa/io.hpp"
#include "cqa/log.hpp"

namespace cqa {
namespace {

using json = nlohmann::json;

constexpr std::string_view kModelHeader = "#cqa-model v1";

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LinearModel constant_head(Index d, double logit) {
  Regularization reg;
  reg.kind = Regularization::Kind::kConstant;
  return LinearModel(Matrix::Zero(1, d), Vector::Constant(1, logit), 2, reg);
}

LinearModel fit_head(const Matrix& x, const Matrix& supervision, Index j, SupervisionMode mode,
                     const TrainConfig& cfg, const std::string& name) {
  const Index n = x.rows();
  if (mode == SupervisionMode::kScoreSupervised) return train_ridge(x, supervision.col(j), cfg.concept_l2);

  std::vector<int> y(static_cast<std::size_t>(n));
  int pos = 0;
  for (Index i = 0; i < n; ++i) {
    y[i] = supervision(i, j) != 0.0 ? 1 : 0;
    pos += y[i];
  }
  if (pos == 0 || pos == n) {
    // Prior logit, smoothed so a single-class column stays finite.
    const double p = (pos + 0.5) / (static_cast<double>(n) + 1.0);
    log_warning("cbm: concept '" + name + "' has single-class supervision; using a constant logit");
    return constant_head(x.cols(), std::log(p / (1.0 - p)));
  }
  return train_logistic(x, LabelVector(std::move(y), 2), cfg.concept_l2, cfg.balanced);
}

Matrix raw_inputs(const CbmModel& model, const Matrix& logits) {
  if (model.inference_input == InferenceInput::kLogits) return logits;
  return logits.unaryExpr([](double z) { return sigmoid(z); });
}

// Fits stage B on the training rows of ds, given a model whose extractor is set.
void fit_inference(CbmModel& model, const LabeledDataset& ds, const TrainConfig& cfg) {
  const auto train = ds.rows(Split::kTrain);
  const Matrix logits = predict_concepts(model, take_rows(ds.features(), train)).values();
  const Matrix raw = raw_inputs(model, logits);
  const Index k = raw.cols();
  model.input_mean = raw.colwise().mean().transpose();
  model.input_scale.resize(k);
  for (Index j = 0; j < k; ++j) {
    const double var = (raw.col(j).array() - model.input_mean[j]).square().mean();
    const double sd = std::sqrt(var);
    model.input_scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  model.inference = train_elastic_net(inference_inputs(model, logits), ds.labels().select(train), cfg.solver);
}

json model_to_json(const LinearModel& m) {
  json w = json::array();
  for (Index r = 0; r < m.weights().rows(); ++r) {
    w.push_back(std::vector<double>(m.weights().row(r).begin(), m.weights().row(r).end()));
  }
  const auto& reg = m.regularization();
  return json{{"weights", std::move(w)},
              {"bias", std::vector<double>(m.bias().begin(), m.bias().end())},
              {"num_classes", m.num_classes()},
              {"regularization",
               {{"kind", to_string(reg.kind)}, {"c", reg.c}, {"l2", reg.l2}, {"lambda", reg.lambda}, {"alpha", reg.alpha}}}};
}

LinearModel model_from_json(const json& j, Index expected_cols) {
  const auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
  const auto bias = j.at("bias").get<std::vector<double>>();
  if (rows.empty()) throw DataError("model: empty weight matrix");
  Matrix w(static_cast<Index>(rows.size()), expected_cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<Index>(rows[r].size()) != expected_cols) {
      throw DataError("model: weight row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                      " entries, expected " + std::to_string(expected_cols));
    }
    for (Index c = 0; c < expected_cols; ++c) w(static_cast<Index>(r), c) = rows[r][c];
  }
  Vector b = Eigen::Map<const Vector>(bias.data(), static_cast<Index>(bias.size()));
  const auto& rj = j.at("regularization");
  Regularization reg;
  reg.kind = regularization_kind_from_string(rj.at("kind").get<std::string>());
  reg.c = rj.at("c").get<double>();
  reg.l2 = rj.at("l2").get<double>();
  reg.lambda = rj.at("lambda").get<double>();
  reg.alpha = rj.at("alpha").get<double>();
  return LinearModel(std::move(w), std::move(b), j.at("num_classes").get<int>(), reg);
}

Vector vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

std::string_view to_string(SupervisionMode mode) {
  return mode == SupervisionMode::kLabelSupervised ? "label_supervised" : "score_supervised";
}

std::string_view to_string(InferenceInput input) { return input == InferenceInput::kLogits ? "logits" : "probs"; }

InferenceInput inference_input_from_string(std::string_view s) {
  if (s == "logits") return InferenceInput::kLogits;
  if (s == "probs") return InferenceInput::kProbs;
  throw ConfigError("train: inference_input must be 'logits' or 'probs', got '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (!(concept_l2 > 0.0) || !std::isfinite(concept_l2)) throw ConfigError("train: concept_l2 must be positive");
  solver.validate();
  if (annotator) annotator->validate();
}

Index CbmModel::feature_dim() const { return extractor.empty() ? 0 : extractor.front().num_features(); }

ConceptMatrix concept_supervision(const LabeledDataset& ds, const TrainConfig& cfg) {
  if (!cfg.annotator) return ds.concepts();
  return simulate_annotator(ds, *cfg.annotator);
}

CbmModel train_cbm(const LabeledDataset& ds, const ConceptMatrix& supervision, const TrainConfig& cfg) {
  cfg.validate();
  if (supervision.rows() != ds.size() || supervision.cols() != ds.num_concepts()) {
    throw DataError("cbm: supervision is " + std::to_string(supervision.rows()) + "x" +
                    std::to_string(supervision.cols()) + ", dataset has " + std::to_string(ds.size()) + " rows and " +
                    std::to_string(ds.num_concepts()) + " concepts");
  }
  const auto train = ds.rows(Split::kTrain);
  if (train.empty()) throw DataError("cbm: training split is empty");

  CbmModel model;
  model.mode = supervision.is_binary() ? SupervisionMode::kLabelSupervised : SupervisionMode::kScoreSupervised;
  model.inference_input = cfg.inference_input;
  const Matrix x = take_rows(ds.features(), train);
  const Matrix s = take_rows(supervision.values(), train);
  for (Index j = 0; j < s.cols(); ++j) {
    model.extractor.push_back(fit_head(x, s, j, model.mode, cfg, ds.vocabulary().name(static_cast<int>(j))));
  }
  fit_inference(model, ds, cfg);
  return model;
}

CbmModel train_cbm(const LabeledDataset& ds, const TrainConfig& cfg) {
  return train_cbm(ds, concept_supervision(ds, cfg), cfg);
}

CbmModel retrain_inference(const CbmModel& model, const LabeledDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  CbmModel out = model;
  out.inference_input = cfg.inference_input;
  fit_inference(out, ds, cfg);
  return out;
}

ConceptMatrix predict_concepts(const CbmModel& model, const Matrix& x) {
  if (model.extractor.empty()) throw DataError("cbm: model has no concept extractor");
  if (x.cols() != model.feature_dim()) {
    throw DataError("cbm: expected " + std::to_string(model.feature_dim()) + " features, got " +
                    std::to_string(x.cols()));
  }
  Matrix logits(x.rows(), model.num_concepts());
  for (int j = 0; j < model.num_concepts(); ++j) {
    const LinearModel& h = model.extractor[j];
    logits.col(j) = (x * h.weights().row(0).transpose()).array() + h.bias()[0];
  }
  return ConceptMatrix(std::move(logits), ConceptKind::kScores);
}

Matrix inference_inputs(const CbmModel& model, const Matrix& logits) {
  if (logits.cols() != model.num_concepts()) throw DataError("cbm: logit width does not match concept count");
  Matrix z = raw_inputs(model, logits);
  z.rowwise() -= model.input_mean.transpose();
  z.array().rowwise() /= model.input_scale.transpose().array();
  return z;
}

Prediction predict_labels(const CbmModel& model, const Matrix& x) {
  return model.inference.predict(inference_inputs(model, predict_concepts(model, x).values()));
}

Explanation explain(const CbmModel& model, const Vector& x, int class_id) {
  const Matrix& w = model.inference.weights();
  if (class_id < 0 || class_id >= w.rows()) {
    throw DataError("explain: class id " + std::to_string(class_id) + " outside [0, " + std::to_string(w.rows()) + ")");
  }
  const Matrix row = x.transpose();
  const Matrix z = inference_inputs(model, predict_concepts(model, row).values());
  Explanation out;
  out.bias = model.inference.bias()[class_id];
  out.score = out.bias;
  for (int j = 0; j < model.num_concepts(); ++j) {
    const double c = w(class_id, j) * z(0, j);
    out.contributions.push_back({j, c});
    out.score += c;
  }
  std::stable_sort(out.contributions.begin(), out.contributions.end(),
                   [](const Contribution& a, const Contribution& b) { return std::abs(a.value) > std::abs(b.value); });
  return out;
}

std::string format_model(const CbmModel& model) {
  json heads = json::array();
  for (const auto& h : model.extractor) heads.push_back(model_to_json(h));
  json body{{"mode", to_string(model.mode)},
            {"inference_input", to_string(model.inference_input)},
            {"feature_dim", model.feature_dim()},
            {"extractor", std::move(heads)},
            {"input_mean", std::vector<double>(model.input_mean.begin(), model.input_mean.end())},
            {"input_scale", std::vector<double>(model.input_scale.begin(), model.input_scale.end())},
            {"inference", model_to_json(model.inference)}};
  return std::string(kModelHeader) + "\n" + body.dump(1) + "\n";
}

CbmModel parse_model(std::string_view text) {
  const auto nl = text.find('\n');
  const std::string_view header = text.substr(0, nl);
  if (header != kModelHeader) throw DataError("model: missing '#cqa-model v1' header");
  if (nl == std::string_view::npos) throw DataError("model: missing body");
  json body;
  try {
    body = json::parse(text.substr(nl + 1));
  } catch (const json::exception& e) {
    throw DataError(std::string("model: malformed JSON: ") + e.what());
  }
  try {
    CbmModel m;
    const std::string mode = body.at("mode").get<std::string>();
    if (mode == "label_supervised") m.mode = SupervisionMode::kLabelSupervised;
    else if (mode == "score_supervised") m.mode = SupervisionMode::kScoreSupervised;
    else throw DataError("model: unknown mode '" + mode + "'");
    m.inference_input = inference_input_from_string(body.at("inference_input").get<std::string>());
    const Index d = body.at("feature_dim").get<Index>();
    for (const auto& h : body.at("extractor")) m.extractor.push_back(model_from_json(h, d));
    const Index k = static_cast<Index>(m.extractor.size());
    m.input_mean = vector_from_json(body.at("input_mean"));
    m.input_scale = vector_from_json(body.at("input_scale"));
    if (m.input_mean.size() != k || m.input_scale.size() != k) {
      throw DataError("model: standardization vectors do not match " + std::to_string(k) + " concepts");
    }
    m.inference = model_from_json(body.at("inference"), k);
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
}

void save_model(const CbmModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, format_model(model));
}

CbmModel load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

}  // namespace cqa
