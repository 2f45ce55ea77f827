#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "misbind/attack.hpp"
#include "misbind/backend.hpp"
#include "misbind/bench.hpp"
#include "misbind/clock.hpp"
#include "misbind/expand.hpp"
#include "misbind/model.hpp"

namespace misbind {

struct BackendBindings {
  std::string generator;                        // expand + attack text generation
  std::string gate_filter;                      // attack safety gate
  std::vector<std::string> bench_filters;       // filter panel, column order
  std::vector<std::string> image_models;        // synthesis backends
  std::string vqa;                              // alignment judging
  std::vector<std::string> aux_alignment;       // holistic / compositional scorers
  std::vector<std::string> safety_evaluators;   // image safety panel; first is primary
  std::string annotator;                        // object-annotation extraction
};

struct PipelineConfig {
  std::string run_id;  // empty: derived from the config hash
  std::filesystem::path out_dir = "runs";
  std::uint64_t rng_seed = 0;
  double gamma = 2.0;
  int safety_threshold = 60;
  int max_retries = 5;
  int fan_out = 1;
  int replicates = 1;
  std::string prompt_set_label = "misbinding";
  std::map<std::string, bool> stages;  // absent stage names default to enabled

  std::filesystem::path seeds_path;
  int expansion_target_size = 0;
  int expansion_per_task_count = 4;
  int expansion_task_budget = 1000;

  std::map<std::string, std::filesystem::path> template_paths;  // expansion, misbinding
  std::vector<BackendDescriptor> backends;
  BackendBindings bindings;
  std::map<std::string, std::filesystem::path> identity_refs;  // model id -> image path
  std::filesystem::path human_ranks_path;
  std::vector<double> gamma_sweep_values{1.0, 1.5, 2.0, 3.0, 4.0};
  std::set<HarmType> categories;  // defaults to all four harm types
  std::map<std::string, FilterRule> filter_rules;

  const BackendDescriptor& backend(const std::string& id) const;
  bool stage_enabled(const std::string& name) const;
};

/// Parses and validates a config document. Relative paths are resolved
/// against the config file's directory; referenced files must exist.
PipelineConfig load_config(const std::filesystem::path& path);

/// Hash of every behavior-affecting configuration value, including digests
/// of referenced template/seed/identity/ranking files. run_id and out_dir
/// do not participate.
std::string compute_config_hash(const PipelineConfig& config);

/// One synthesis outcome per (prompt, model, seed).
struct SynthRecord {
  std::string prompt_id;
  std::string model_backend_id;
  std::uint64_t seed = 0;
  bool refused = false;
  ContentAddress image;  // empty when refused

  bool operator==(const SynthRecord&) const = default;
};

std::vector<SynthRecord> load_synth(const std::string& path);
std::size_t save_synth(const std::vector<SynthRecord>& records, const std::string& path);

/// Executes the staged pipeline inside <out_dir>/<run_id>. Stages read only
/// their declared inputs and re-run (under resume) only when an output is
/// missing, an input was rebuilt, or the config hash changed.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::shared_ptr<Clock> clock = nullptr);

  static const std::vector<std::string>& stage_names();

  const PipelineConfig& config() const { return config_; }
  const std::string& config_hash() const { return config_hash_; }
  const std::string& run_id() const { return run_id_; }
  std::filesystem::path run_dir() const;

  struct PlanEntry {
    std::string stage;
    bool enabled = false;
    bool would_run = false;
    std::string reason;
  };
  /// Execution plan against the current on-disk state (--dry-run output).
  std::vector<PlanEntry> plan(bool resume, const std::string& only_stage = "") const;

  /// Runs the enabled stages (or just `only_stage`) and writes manifest.json.
  /// Returns the manifest; `executed_stages` reports what actually ran.
  RunManifest run(bool resume = true, const std::string& only_stage = "",
                  std::vector<std::string>* executed_stages = nullptr);

 private:
  PipelineConfig config_;
  std::string config_hash_;
  std::string run_id_;
  std::shared_ptr<Clock> clock_;
};

}  // namespace misbind
