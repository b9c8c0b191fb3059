#pragma once

// End-to-end commands behind the command-line tool. Each writes its outputs
// atomically under out_dir and prints a short summary to `out`.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include "cqa/config.hpp"
#include "cqa/report.hpp"

namespace cqa {

namespace fs = std::filesystem;

// <out>/dataset.cqa; prints n, k and label prevalence.
fs::path cmd_gen(const RunConfig& cfg, std::uint64_t seed, const fs::path& out_dir, std::ostream& out);

// <out>/concepts.cqa; prints the agreement summary as JSON. Requires an
// annotator section.
fs::path cmd_annotate(const RunConfig& cfg, std::uint64_t seed, const fs::path& dataset, const fs::path& out_dir,
                      std::ostream& out);

// <out>/model.cqa; trains on the given concept file, or on the configured
// supervision when none is given. Prints train and val F1(Y).
fs::path cmd_train(const RunConfig& cfg, std::uint64_t seed, const fs::path& dataset,
                   const std::optional<fs::path>& concepts, const fs::path& out_dir, std::ostream& out);

// <out>/report.json; prints the five-metric row.
fs::path cmd_eval(const RunConfig& cfg, std::uint64_t seed, const fs::path& dataset, const fs::path& model,
                  const fs::path& out_dir, std::ostream& out);

// Prints annotation agreement of a concept file against the dataset truth.
AgreementResult cmd_agreement(const fs::path& dataset, const fs::path& concepts, std::ostream& out);

// Full pipeline for one seed in memory.
EvalReport run_pipeline(const RunConfig& cfg, std::uint64_t seed);

// Runs every seed (up to `jobs` at a time) under <out>/seed-<s>/, then writes
// <out>/aggregate.json and <out>/gap_curves.csv.
AggregateReport cmd_suite(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds, const fs::path& out_dir,
                          int jobs, std::ostream& out);

}  // namespace cqa
