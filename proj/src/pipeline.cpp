#include "cqa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iomanip>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "cqa/cbm.hpp"
#include "cqa/error.hpp"
#include "cqa/io.hpp"

namespace cqa {
namespace {

using json = nlohmann::json;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

json agreement_json(const AgreementResult& a, const Vocabulary& vocab) {
  json per = json::array();
  for (std::size_t j = 0; j < a.per_concept.size(); ++j) {
    const auto& c = a.per_concept[j];
    per.push_back({{"concept", vocab.name(static_cast<int>(j))},
                   {"precision", c.precision ? json(*c.precision) : json(nullptr)},
                   {"recall", c.recall ? json(*c.recall) : json(nullptr)},
                   {"support", c.support}});
  }
  return {{"macro_precision", a.macro_precision}, {"macro_recall", a.macro_recall}, {"per_concept", std::move(per)}};
}

std::string metric_row(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << "F1(Y)=" << r.f1_y << " AUC(C)=" << r.auc_c << " LEAK=" << r.leak
     << " DIS=" << r.dis << " OIS=" << r.ois;
  return os.str();
}

EvalReport evaluate_cbm(const RunConfig& cfg, const RunPlan& plan, const LabeledDataset& ds, const CbmModel& model) {
  const ConceptMatrix concepts = predict_concepts(model, ds.features());
  const Prediction labels = predict_labels(model, ds.features());
  EvalReport r = evaluate_model(ds, concepts, labels.labels, plan.train.solver);
  r.metadata.model = cfg.model;
  r.metadata.seed = plan.seed;
  r.metadata.config_digest = config_digest(cfg, plan.seed);
  r.metadata.created_at = utc_timestamp();
  return r;
}

double split_f1(const CbmModel& model, const LabeledDataset& ds, Split s) {
  const auto rows = ds.rows(s);
  const Prediction p = predict_labels(model, take_rows(ds.features(), rows));
  return macro_f1(p.labels, ds.labels().select(rows));
}

}  // namespace

fs::path cmd_gen(const RunConfig& cfg, std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
  const RunPlan plan = plan_run(cfg, seed);
  const LabeledDataset ds = generate_world(plan.world);
  ensure_dir(out_dir);
  const fs::path path = out_dir / "dataset.cqa";
  save_dataset(ds, path);
  const auto counts = ds.labels().counts();
  out << "n=" << ds.size() << " k=" << ds.num_concepts() << " label_prevalence=";
  if (ds.num_classes() == 2) {
    out << static_cast<double>(counts[1]) / static_cast<double>(ds.size());
  } else {
    for (std::size_t c = 0; c < counts.size(); ++c) {
      out << (c ? "/" : "") << static_cast<double>(counts[c]) / static_cast<double>(ds.size());
    }
  }
  out << "\n";
  return path;
}

fs::path cmd_annotate(const RunConfig& cfg, std::uint64_t seed, const fs::path& dataset, const fs::path& out_dir,
                      std::ostream& out) {
  if (!cfg.annotator) throw ConfigError("annotate: the config has no 'annotator' section");
  const RunPlan plan = plan_run(cfg, seed);
  const LabeledDataset ds = load_dataset(dataset);
  const ConceptMatrix annotations = simulate_annotator(ds, *plan.train.annotator);
  const auto train = ds.rows(Split::kTrain);
  const AgreementResult agreement = annotation_agreement(annotations, ds.concepts(), ds.vocabulary(), train);
  ensure_dir(out_dir);
  const fs::path path = out_dir / "concepts.cqa";
  save_concepts(annotations, path);
  out << agreement_json(agreement, ds.vocabulary()).dump() << "\n";
  return path;
}

fs::path cmd_train(const RunConfig& cfg, std::uint64_t seed, const fs::path& dataset,
                   const std::optional<fs::path>& concepts, const fs::path& out_dir, std::ostream& out) {
  const RunPlan plan = plan_run(cfg, seed);
  const LabeledDataset ds = load_dataset(dataset);
  ds.require_trainable();
  const ConceptMatrix supervision = concepts ? load_concepts(*concepts) : concept_supervision(ds, plan.train);
  const CbmModel model = train_cbm(ds, supervision, plan.train);
  ensure_dir(out_dir);
  const fs::path path = out_dir / "model.cqa";
  save_model(model, path);
  out << "train_f1=" << split_f1(model, ds, Split::kTrain) << " val_f1=" << split_f1(model, ds, Split::kVal) << "\n";
  return path;
}

fs::path cmd_eval(const RunConfig& cfg, std::uint64_t seed, const fs::path& dataset, const fs::path& model_path,
                  const fs::path& out_dir, std::ostream& out) {
  const RunPlan plan = plan_run(cfg, seed);
  const LabeledDataset ds = load_dataset(dataset);
  const CbmModel model = load_model(model_path);
  const EvalReport r = evaluate_cbm(cfg, plan, ds, model);
  ensure_dir(out_dir);
  const fs::path path = out_dir / "report.json";
  write_file_atomic(path, format_report(r));
  out << metric_row(r) << "\n";
  return path;
}

AgreementResult cmd_agreement(const fs::path& dataset, const fs::path& concepts, std::ostream& out) {
  const LabeledDataset ds = load_dataset(dataset);
  const ConceptMatrix annotations = load_concepts(concepts);
  const AgreementResult a =
      annotation_agreement(annotations, ds.concepts(), ds.vocabulary(), ds.rows(Split::kTrain));
  out << agreement_json(a, ds.vocabulary()).dump() << "\n";
  return a;
}

EvalReport run_pipeline(const RunConfig& cfg, std::uint64_t seed) {
  const RunPlan plan = plan_run(cfg, seed);
  const LabeledDataset ds = generate_world(plan.world);
  ds.require_trainable();
  const CbmModel model = train_cbm(ds, plan.train);
  return evaluate_cbm(cfg, plan, ds, model);
}

AggregateReport cmd_suite(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds, const fs::path& out_dir,
                          int jobs, std::ostream& out) {
  if (seeds.empty()) throw ConfigError("suite: no seeds (pass --seeds or set \"seeds\" in the config)");
  std::vector<std::uint64_t> ordered = seeds;
  std::sort(ordered.begin(), ordered.end());
  if (std::adjacent_find(ordered.begin(), ordered.end()) != ordered.end()) {
    throw ConfigError("suite: duplicate seeds");
  }
  ensure_dir(out_dir);

  std::vector<EvalReport> reports(ordered.size());
  std::vector<std::exception_ptr> errors(ordered.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < ordered.size(); i = next++) {
      try {
        reports[i] = run_pipeline(cfg, ordered[i]);
        const fs::path dir = out_dir / ("seed-" + std::to_string(ordered[i]));
        ensure_dir(dir);
        write_file_atomic(dir / "report.json", format_report(reports[i]));
        export_relevance_heatmaps(reports[i], dir / "relevance.csv");
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(jobs, 1, static_cast<int>(ordered.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t i = 0; i < ordered.size(); ++i) out << "seed " << ordered[i] << ": " << metric_row(reports[i]) << "\n";
  AggregateReport agg = aggregate(reports);
  write_file_atomic(out_dir / "aggregate.json", format_aggregate(agg));
  export_gap_curves(agg.runs, out_dir / "gap_curves.csv");
  out << std::fixed << std::setprecision(4);
  for (const auto& name : metric_names()) {
    const auto& s = agg.metrics.at(name);
    out << name << " " << s.mean << " +- " << s.std << "\n";
  }
  out.unsetf(std::ios::floatfield);
  return agg;
}

}  // namespace cqa
