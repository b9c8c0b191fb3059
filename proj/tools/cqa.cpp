// cqa: generate -> annotate -> train -> evaluate -> aggregate.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "cqa/error.hpp"
#include "cqa/log.hpp"
#include "cqa/pipeline.hpp"

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
  bool quiet = false;
};

cqa::fs::path output_dir(const Globals& g, const cqa::RunConfig& cfg) {
  if (!g.out.empty()) return g.out;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return ".";
}

cqa::RunConfig require_config(const Globals& g) {
  if (g.config.empty()) throw cqa::ConfigError("--config is required for this command");
  return cqa::load_run_config(g.config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept quality analysis for concept bottleneck models"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Run seed; overrides the config seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--jobs", g.jobs, "Parallel seeds in suite")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "Suppress summaries and warnings");

  std::string dataset, concepts, model;
  std::vector<std::uint64_t> seeds;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  auto* annotate = app.add_subcommand("annotate", "Simulate annotator concept labels");
  annotate->add_option("--dataset", dataset, "Dataset file")->required();
  auto* train = app.add_subcommand("train", "Train a concept bottleneck model");
  train->add_option("--dataset", dataset, "Dataset file")->required();
  train->add_option("--concepts", concepts, "Concept supervision file");
  auto* eval = app.add_subcommand("eval", "Evaluate a trained model");
  eval->add_option("--dataset", dataset, "Dataset file")->required();
  eval->add_option("--model", model, "Model file")->required();
  auto* suite = app.add_subcommand("suite", "Run the full pipeline for several seeds");
  suite->add_option("--seeds", seeds, "Seeds (comma separated)")->delimiter(',');
  auto* agreement = app.add_subcommand("agreement", "Agreement of concept annotations with the truth");
  agreement->add_option("--dataset", dataset, "Dataset file")->required();
  agreement->add_option("--concepts", concepts, "Concept file")->required();
  for (auto* sub : {gen, annotate, train, eval, suite, agreement}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(cqa::ExitCode::kConfig);
  }

  std::ostringstream null_stream;
  std::ostream& out = g.quiet ? static_cast<std::ostream&>(null_stream) : std::cout;
  if (g.quiet) cqa::set_log_sink(nullptr);

  try {
    if (agreement->parsed()) {
      cqa::cmd_agreement(dataset, concepts, out);
      return 0;
    }
    const cqa::RunConfig cfg = require_config(g);
    const cqa::fs::path dir = output_dir(g, cfg);
    if (suite->parsed()) {
      if (seeds.empty()) seeds = cfg.seeds;
      cqa::cmd_suite(cfg, seeds, dir, g.jobs, out);
      return 0;
    }
    const std::uint64_t seed = cqa::resolve_seed(cfg, g.seed);
    if (gen->parsed()) {
      cqa::cmd_gen(cfg, seed, dir, out);
    } else if (annotate->parsed()) {
      cqa::cmd_annotate(cfg, seed, dataset, dir, out);
    } else if (train->parsed()) {
      std::optional<cqa::fs::path> c;
      if (!concepts.empty()) c = concepts;
      cqa::cmd_train(cfg, seed, dataset, c, dir, out);
    } else if (eval->parsed()) {
      cqa::cmd_eval(cfg, seed, dataset, model, dir, out);
    }
    return 0;
  } catch (const cqa::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
