#include "cqa/config.hpp"

#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "cqa/error.hpp"
#include "cqa/io.hpp"
#include "cqa/random.hpp"

namespace cqa {
namespace {

using json = nlohmann::json;

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: " + where + "." + key + " is missing or has the wrong type");
  }
}

template <typename T>
void get_opt(const json& obj, const char* key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get<T>(obj, key, where);
}

template <typename T>
void get_opt(const json& obj, const char* key, const std::string& where, std::optional<T>& out) {
  if (obj.contains(key)) out = get<T>(obj, key, where);
}

LabelRule parse_rule(const json& j) {
  check_keys(j, "world.label_rule", {"kind", "concepts", "group"});
  LabelRule r;
  r.kind = label_rule_kind_from_string(get<std::string>(j, "kind", "world.label_rule"));
  get_opt(j, "concepts", "world.label_rule", r.concepts);
  get_opt(j, "group", "world.label_rule", r.group);
  return r;
}

WorldSpec parse_world(const json& j, std::optional<std::uint64_t>& world_seed) {
  const std::string w = "world";
  if (j.contains("preset")) {
    check_keys(j, w, {"preset", "n", "feature_noise", "seed", "k"});
    const auto preset = get<std::string>(j, "preset", w);
    const int n = j.contains("n") ? get<int>(j, "n", w) : 6000;
    WorldSpec spec;
    if (preset == "shapes3d_like") {
      if (j.contains("k")) throw ConfigError("config: world.k cannot be set for preset shapes3d_like");
      spec = shapes3d_like_world(0, n);
    } else if (preset == "attributes") {
      spec = attribute_world(0, j.contains("k") ? get<int>(j, "k", w) : 16, n);
    } else {
      throw ConfigError("config: unknown world preset '" + preset + "' (shapes3d_like, attributes)");
    }
    get_opt(j, "feature_noise", w, spec.feature_noise);
    get_opt(j, "seed", w, world_seed);
    return spec;
  }
  check_keys(j, w, {"k", "d", "n", "groups", "names", "label_rule", "feature_noise", "singleton_prevalence", "seed"});
  WorldSpec spec;
  spec.k = get<int>(j, "k", w);
  spec.d = get<int>(j, "d", w);
  spec.n = get<int>(j, "n", w);
  get_opt(j, "groups", w, spec.groups);
  get_opt(j, "names", w, spec.names);
  if (!j.contains("label_rule")) throw ConfigError("config: world.label_rule is missing");
  spec.label_rule = parse_rule(j.at("label_rule"));
  get_opt(j, "feature_noise", w, spec.feature_noise);
  get_opt(j, "singleton_prevalence", w, spec.singleton_prevalence);
  get_opt(j, "seed", w, world_seed);
  return spec;
}

AnnotatorConfig parse_annotator(const json& j) {
  const std::string w = "annotator";
  check_keys(j, w, {"mode", "target_precision", "target_recall", "fpr", "fnr", "flips", "signal_strength",
                    "noise_std", "label_leak", "seed"});
  AnnotatorConfig a;
  if (j.contains("mode")) a.mode = annotator_mode_from_string(get<std::string>(j, "mode", w));
  get_opt(j, "target_precision", w, a.target_precision);
  get_opt(j, "target_recall", w, a.target_recall);
  if (a.target_precision.has_value() != a.target_recall.has_value()) {
    throw ConfigError("config: annotator.target_precision and target_recall must be given together");
  }
  if (j.contains("fpr") || j.contains("fnr")) {
    FlipRates f;
    get_opt(j, "fpr", w, f.fpr);
    get_opt(j, "fnr", w, f.fnr);
    a.flips.push_back(f);
  }
  if (j.contains("flips")) {
    if (!a.flips.empty()) throw ConfigError("config: annotator.flips conflicts with fpr/fnr");
    for (const auto& f : j.at("flips")) {
      check_keys(f, "annotator.flips[]", {"fpr", "fnr"});
      a.flips.push_back({get<double>(f, "fpr", w), get<double>(f, "fnr", w)});
    }
  }
  if (a.target_precision && !a.flips.empty()) {
    throw ConfigError("config: annotator targets conflict with explicit flip rates");
  }
  get_opt(j, "signal_strength", w, a.signal_strength);
  get_opt(j, "noise_std", w, a.noise_std);
  get_opt(j, "label_leak", w, a.label_leak);
  get_opt(j, "seed", w, a.seed);
  return a;
}

SolverConfig parse_solver(const json& j) {
  const std::string w = "solver";
  check_keys(j, w, {"svm_c", "svm_tolerance", "svm_max_epochs", "elastic_alpha", "elastic_lambda",
                    "elastic_max_iters", "elastic_tolerance", "forest_trees", "forest_max_depth",
                    "forest_feature_fraction", "forest_max_bins", "probe_feature_fraction", "probe_seeding"});
  SolverConfig s;
  get_opt(j, "svm_c", w, s.svm_c);
  get_opt(j, "svm_tolerance", w, s.svm_tolerance);
  get_opt(j, "svm_max_epochs", w, s.svm_max_epochs);
  get_opt(j, "elastic_alpha", w, s.elastic_alpha);
  get_opt(j, "elastic_lambda", w, s.elastic_lambda);
  get_opt(j, "elastic_max_iters", w, s.elastic_max_iters);
  get_opt(j, "elastic_tolerance", w, s.elastic_tolerance);
  get_opt(j, "forest_trees", w, s.forest_trees);
  get_opt(j, "forest_max_depth", w, s.forest_max_depth);
  get_opt(j, "forest_feature_fraction", w, s.forest_feature_fraction);
  get_opt(j, "forest_max_bins", w, s.forest_max_bins);
  get_opt(j, "probe_feature_fraction", w, s.probe_feature_fraction);
  if (j.contains("probe_seeding")) {
    const auto p = get<std::string>(j, "probe_seeding", w);
    if (p == "shared") s.probe_seeding = ProbeSeeding::kShared;
    else if (p == "independent") s.probe_seeding = ProbeSeeding::kIndependent;
    else throw ConfigError("config: solver.probe_seeding must be 'shared' or 'independent'");
  }
  s.validate();
  return s;
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  check_keys(j, "config", {"version", "seed", "seeds", "model", "output_dir", "world", "annotator", "train", "solver"});
  RunConfig cfg;
  if (!j.contains("version")) throw ConfigError("config: missing 'version'");
  cfg.version = get<int>(j, "version", "config");
  if (cfg.version != 1) throw ConfigError("config: unsupported version " + std::to_string(cfg.version));
  get_opt(j, "seed", "config", cfg.seed);
  get_opt(j, "seeds", "config", cfg.seeds);
  get_opt(j, "model", "config", cfg.model);
  get_opt(j, "output_dir", "config", cfg.output_dir);
  if (!j.contains("world")) throw ConfigError("config: missing 'world'");
  cfg.world = parse_world(j.at("world"), cfg.world_seed);
  cfg.world.validate();
  if (j.contains("annotator")) cfg.annotator = parse_annotator(j.at("annotator"));
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, "train", {"concept_l2", "balanced", "inference_input"});
    get_opt(t, "concept_l2", "train", cfg.train.concept_l2);
    get_opt(t, "balanced", "train", cfg.train.balanced);
    if (t.contains("inference_input")) {
      cfg.train.inference_input = inference_input_from_string(get<std::string>(t, "inference_input", "train"));
    }
  }
  if (j.contains("solver")) cfg.train.solver = parse_solver(j.at("solver"));
  cfg.train.validate();
  cfg.canonical = j.dump();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text);
}

std::uint64_t resolve_seed(const RunConfig& cfg, std::optional<std::uint64_t> cli_seed) {
  if (cli_seed) return *cli_seed;
  if (cfg.seed) return *cfg.seed;
  throw ConfigError("config: no seed given (set \"seed\" in the config or pass --seed)");
}

AnnotatorSpec resolve_annotator(const AnnotatorConfig& a, const WorldSpec& world, std::uint64_t seed) {
  AnnotatorSpec spec;
  spec.mode = a.mode;
  spec.signal_strength = a.signal_strength;
  spec.noise_std = a.noise_std;
  spec.label_leak = a.label_leak;
  spec.seed = a.seed.value_or(derive_seed(seed, "annotator"));
  if (a.target_precision) {
    if (a.mode != AnnotatorSpec::Mode::kFlip) throw ConfigError("config: calibration targets need mode 'flip'");
    for (int j = 0; j < world.k; ++j) {
      spec.flips.push_back(calibrate_flip_rates(*a.target_precision, *a.target_recall, concept_prevalence(world, j)));
    }
  } else {
    spec.flips = a.flips;
  }
  spec.validate();
  return spec;
}

RunPlan plan_run(const RunConfig& cfg, std::uint64_t seed) {
  RunPlan plan;
  plan.seed = seed;
  plan.world = cfg.world;
  plan.world.seed = cfg.world_seed.value_or(derive_seed(seed, "world"));
  plan.train = cfg.train;
  plan.train.solver.seed = derive_seed(seed, "solver");
  if (cfg.annotator) plan.train.annotator = resolve_annotator(*cfg.annotator, plan.world, seed);
  return plan;
}

std::string config_digest(const RunConfig& cfg, std::uint64_t seed) {
  std::uint64_t h = hash_tag(cfg.canonical);
  h = mix64(h ^ seed);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cqa
