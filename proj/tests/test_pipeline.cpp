#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cqa/config.hpp"
#include "cqa/error.hpp"
#include "cqa/io.hpp"
#include "cqa/log.hpp"
#include "cqa/pipeline.hpp"

using namespace cqa;

namespace {

const char* kSmallConfig = R"({
  "version": 1,
  "seed": 3,
  "seeds": [1, 2],
  "world": {"preset": "attributes", "k": 6, "n": 1200},
  "annotator": {"mode": "flip", "target_precision": 0.9, "target_recall": 0.9},
  "solver": {"forest_trees": 20}
})";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cqa_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + CQA_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  write_file_atomic(p, text);
  return p;
}

std::string strip_timestamps(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find("created_at") == std::string::npos) out << line << '\n';
  }
  return out.str();
}

}  // namespace

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_run_config(R"({"version": 1, "world": {"preset": "attributes"}, "trian": {}})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("trian"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_run_config(R"({"version": 1, "world": {"preset": "attributes", "noise": 1}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"version": 2, "world": {"preset": "attributes"}})"), ConfigError);
  EXPECT_THROW(parse_run_config("{"), ConfigError);
}

TEST(Config, SeedResolution) {
  const RunConfig no_seed = parse_run_config(R"({"version": 1, "world": {"preset": "attributes"}})");
  EXPECT_THROW(resolve_seed(no_seed, std::nullopt), ConfigError);
  EXPECT_EQ(resolve_seed(no_seed, 9), 9u);
  const RunConfig cfg = parse_run_config(kSmallConfig);
  EXPECT_EQ(resolve_seed(cfg, std::nullopt), 3u);
  EXPECT_EQ(resolve_seed(cfg, 5), 5u);
}

TEST(Config, PlanDerivesIndependentSeeds) {
  const RunConfig cfg = parse_run_config(kSmallConfig);
  const RunPlan a = plan_run(cfg, 1);
  const RunPlan b = plan_run(cfg, 2);
  EXPECT_NE(a.world.seed, b.world.seed);
  EXPECT_NE(a.world.seed, a.train.solver.seed);
  ASSERT_TRUE(a.train.annotator.has_value());
  EXPECT_NE(a.train.annotator->seed, a.world.seed);
  EXPECT_EQ(a.train.annotator->flips.size(), 6u);
  EXPECT_EQ(a.train.solver.forest_trees, 20);
  EXPECT_EQ(config_digest(cfg, 1), config_digest(parse_run_config(kSmallConfig), 1));
  EXPECT_NE(config_digest(cfg, 1), config_digest(cfg, 2));
  EXPECT_EQ(config_digest(cfg, 1).size(), 16u);

  const RunConfig pinned =
      parse_run_config(R"({"version": 1, "world": {"preset": "attributes", "seed": 77}})");
  EXPECT_EQ(plan_run(pinned, 1).world.seed, 77u);
  EXPECT_EQ(plan_run(pinned, 2).world.seed, 77u);
}

TEST(Config, InfeasibleCalibrationIsAConfigError) {
  const RunConfig cfg = parse_run_config(R"({"version": 1, "world": {"preset": "attributes"},
    "annotator": {"target_precision": 0.18, "target_recall": 0.64}})");
  EXPECT_THROW(plan_run(cfg, 1), ConfigError);
}

TEST(Config, ShippedConfigParses) {
  const RunConfig cfg = load_run_config(fs::path(CQA_SOURCE_DIR) / "configs" / "shapes3d-like.json");
  EXPECT_EQ(cfg.world.k, 42);
  EXPECT_EQ(cfg.seeds.size(), 5u);
  const RunConfig noisy = load_run_config(fs::path(CQA_SOURCE_DIR) / "configs" / "attributes-noisy-annotator.json");
  ASSERT_TRUE(noisy.annotator.has_value());
  EXPECT_EQ(plan_run(noisy, 1).train.annotator->flips.size(), 16u);
}

TEST(Pipeline, SuiteIsDeterministicAcrossJobCounts) {
  set_log_sink(nullptr);
  const RunConfig cfg = parse_run_config(kSmallConfig);
  const fs::path a = scratch("suite_a");
  const fs::path b = scratch("suite_b");
  std::ostringstream out_a, out_b;
  cmd_suite(cfg, {2, 1}, a, 1, out_a);
  cmd_suite(cfg, {1, 2}, b, 2, out_b);
  EXPECT_EQ(out_a.str(), out_b.str());
  for (const char* f : {"aggregate.json", "gap_curves.csv", "seed-1/report.json", "seed-2/relevance.csv"}) {
    EXPECT_EQ(strip_timestamps(read_file(a / f)), strip_timestamps(read_file(b / f))) << f;
  }
  EXPECT_THROW(cmd_suite(cfg, {1, 1}, a, 1, out_a), ConfigError);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, InMemoryRunMatchesSuiteReport) {
  set_log_sink(nullptr);
  const RunConfig cfg = parse_run_config(kSmallConfig);
  const fs::path dir = scratch("single");
  std::ostringstream out;
  cmd_suite(cfg, {1}, dir, 1, out);
  const EvalReport r = run_pipeline(cfg, 1);
  const EvalReport from_file = parse_report(read_file(dir / "seed-1" / "report.json"));
  EXPECT_EQ(r.f1_y, from_file.f1_y);
  EXPECT_EQ(r.leak, from_file.leak);
  EXPECT_EQ(r.dis, from_file.dis);
  fs::remove_all(dir);
}

TEST(Cli, StepwiseCommands) {
  const fs::path dir = scratch("cli");
  const fs::path cfg = write_config(dir, kSmallConfig);
  const std::string base = "--config \"" + cfg.string() + "\" --out \"" + dir.string() + "\" ";

  CliResult r = run_cli(base + "gen", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("n=1200"), std::string::npos) << r.out;
  const std::string ds = "--dataset \"" + (dir / "dataset.cqa").string() + "\" ";

  r = run_cli(base + "annotate " + ds, dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("macro_precision"), std::string::npos) << r.out;

  r = run_cli(base + "agreement " + ds + "--concepts \"" + (dir / "concepts.cqa").string() + "\"", dir);
  ASSERT_EQ(r.code, 0) << r.err;

  r = run_cli(base + "train " + ds + "--concepts \"" + (dir / "concepts.cqa").string() + "\"", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("val_f1="), std::string::npos) << r.out;

  r = run_cli(base + "eval " + ds + "--model \"" + (dir / "model.cqa").string() + "\"", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("LEAK="), std::string::npos) << r.out;
  const EvalReport report = parse_report(read_file(dir / "report.json"));
  EXPECT_GT(report.f1_y, 0.8);

  r = run_cli(base + "--quiet gen", dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("codes");
  const fs::path bad = write_config(dir, R"({"version": 1, "world": {"preset": "attributes"}, "bogus_key": 1})");
  CliResult r = run_cli("--config \"" + bad.string() + "\" gen", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bogus_key"), std::string::npos) << r.err;

  const fs::path unseeded = write_config(dir, R"({"version": 1, "world": {"preset": "attributes", "n": 500}})");
  r = run_cli("--config \"" + unseeded.string() + "\" --out \"" + dir.string() + "\" gen", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("seed"), std::string::npos) << r.err;
  r = run_cli("--config \"" + unseeded.string() + "\" --seed 4 --out \"" + dir.string() + "\" gen", dir);
  EXPECT_EQ(r.code, 0) << r.err;

  r = run_cli("--config \"" + unseeded.string() + "\" --seed 4 train --dataset \"" + (dir / "missing.cqa").string() + "\"",
              dir);
  EXPECT_EQ(r.code, 3);

  r = run_cli("frobnicate", dir);
  EXPECT_EQ(r.code, 2);

  // Every test row has the same concept value, so concept AUC is undefined.
  std::string text = "#cqa-dataset v1 n=14 k=1 d=1 m=2\n{\"names\": [\"c0\"], \"groups\": []}\n";
  for (int i = 0; i < 10; ++i) {
    const int c = i % 2;
    text += "train | " + std::to_string(c) + " | " + std::to_string(c) + " | " + std::to_string(c) + "\n";
  }
  text += "val | 0 | 0 | 0\nval | 1 | 1 | 1\ntest | 1 | 1 | 1\ntest | 1 | 1 | 1\n";
  write_file_atomic(dir / "flat.cqa", text);
  const std::string common = "--config \"" + unseeded.string() + "\" --seed 1 --out \"" + dir.string() + "\" ";
  r = run_cli(common + "train --dataset \"" + (dir / "flat.cqa").string() + "\"", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  r = run_cli(common + "eval --dataset \"" + (dir / "flat.cqa").string() + "\" --model \"" +
                  (dir / "model.cqa").string() + "\"",
              dir);
  EXPECT_EQ(r.code, 4) << r.err;
  fs::remove_all(dir);
}
