#pragma once

// Run configuration: a strict JSON document. Unknown keys are errors.
//
//   {
//     "version": 1,
//     "seed": 7,                       optional if --seed is given
//     "seeds": [1, 2, 3, 4, 5],        suite seeds
//     "model": "cbm",
//     "output_dir": "runs/x",
//     "world": {"preset": "shapes3d_like", "n": 6000, "feature_noise": 0.0}
//              or {"k", "d", "n", "groups", "names", "label_rule", ...},
//     "annotator": {"mode": "flip", "target_precision": .., "target_recall": ..,
//                   "fpr", "fnr", "signal_strength", "noise_std", "label_leak"},
//     "train": {"concept_l2", "balanced", "inference_input"},
//     "solver": {"svm_c", "svm_tolerance", ..., "probe_seeding"}
//   }

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cqa/cbm.hpp"
#include "cqa/synth.hpp"

namespace cqa {

struct AnnotatorConfig {
  AnnotatorSpec::Mode mode = AnnotatorSpec::Mode::kFlip;
  // Calibrate flip rates per concept from its prevalence in the world.
  std::optional<double> target_precision;
  std::optional<double> target_recall;
  std::vector<FlipRates> flips;
  double signal_strength = 1.0;
  double noise_std = 0.0;
  std::optional<double> label_leak;
  std::optional<std::uint64_t> seed;
};

struct RunConfig {
  int version = 1;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::string model = "cbm";
  std::string output_dir;
  WorldSpec world;  // seed filled per run unless world_seed is set
  std::optional<std::uint64_t> world_seed;
  std::optional<AnnotatorConfig> annotator;
  TrainConfig train;  // annotator and solver seed filled per run
  // Canonical JSON of the parsed document, used for the digest.
  std::string canonical;
};

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

// --seed wins over the config seed; neither is a ConfigError.
std::uint64_t resolve_seed(const RunConfig& cfg, std::optional<std::uint64_t> cli_seed);

struct RunPlan {
  std::uint64_t seed = 0;
  WorldSpec world;
  TrainConfig train;  // annotator resolved, solver seeded
};

RunPlan plan_run(const RunConfig& cfg, std::uint64_t seed);

AnnotatorSpec resolve_annotator(const AnnotatorConfig& a, const WorldSpec& world, std::uint64_t seed);

// FNV-1a of the canonical config plus the run seed, as 16 hex digits.
std::string config_digest(const RunConfig& cfg, std::uint64_t seed);

}  // namespace cqa
