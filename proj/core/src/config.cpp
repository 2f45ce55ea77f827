#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

#include "misbind/hash.hpp"
#include "misbind/pipeline.hpp"

namespace misbind {
namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("referenced file not found: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& value) {
  const std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

BackendDescriptor parse_backend(const json& j, const std::filesystem::path& base) {
  BackendDescriptor backend;
  backend.id = j.at("id").get<std::string>();
  backend.capability = capability_from_string(j.at("capability").get<std::string>());
  backend.endpoint = j.at("endpoint").get<std::string>();
  backend.auth_env = j.value("auth_env", "");
  backend.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
  backend.max_retries = j.value("max_retries", 2);
  backend.rate_limit = j.value("rate_limit", 0.0);
  backend.identity_preserving = j.value("identity_preserving", false);
  json params = j.value("params", json::object());
  if (params.contains("system_prompt_file")) {
    const auto file = resolve(base, params["system_prompt_file"].get<std::string>());
    params["system_prompt"] = read_file(file);
    params.erase("system_prompt_file");
  }
  backend.params_json = params.dump();
  return backend;
}

void require_config(bool ok, const std::string& what) {
  if (!ok) {
    throw ConfigError(what);
  }
}

const BackendDescriptor& find_backend(const PipelineConfig& config,
                                      const std::string& id,
                                      const std::string& role) {
  for (const auto& backend : config.backends) {
    if (backend.id == id) {
      return backend;
    }
  }
  throw ConfigError("binding '" + role + "' references unknown backend '" + id + "'");
}

void require_binding(const PipelineConfig& config, const std::string& id,
                     const std::string& role, Capability capability) {
  require_config(!id.empty(), "binding '" + role + "' is not set");
  const auto& backend = find_backend(config, id, role);
  require_config(backend.capability == capability,
                 "binding '" + role + "' needs capability " + to_string(capability) +
                     " but backend '" + id + "' provides " +
                     to_string(backend.capability));
}

std::string file_digest(const std::filesystem::path& path) {
  return path.empty() ? "" : sha256_hex(read_file(path));
}

}  // namespace

const BackendDescriptor& PipelineConfig::backend(const std::string& id) const {
  for (const auto& descriptor : backends) {
    if (descriptor.id == id) {
      return descriptor;
    }
  }
  throw ConfigError("unknown backend id: '" + id + "'");
}

bool PipelineConfig::stage_enabled(const std::string& name) const {
  const auto it = stages.find(name);
  return it == stages.end() || it->second;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("config file not found: " + path.string());
  }
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ConfigError("config is not a JSON object: " + path.string());
  }
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();

  PipelineConfig config;
  config.run_id = j.value("run_id", "");
  config.out_dir = resolve(base, j.value("out_dir", "runs"));
  config.rng_seed = j.value("rng_seed", 0ULL);
  config.gamma = j.value("gamma", 2.0);
  config.safety_threshold = j.value("safety_threshold", 60);
  config.max_retries = j.value("max_retries", 5);
  config.fan_out = j.value("fan_out", 1);
  config.replicates = j.value("replicates", 1);
  config.prompt_set_label = j.value("prompt_set_label", "misbinding");
  for (const auto& [stage, enabled] : j.value("stages", json::object()).items()) {
    config.stages[stage] = enabled.get<bool>();
  }

  if (j.contains("seeds_path")) {
    config.seeds_path = resolve(base, j["seeds_path"].get<std::string>());
  }
  const json expansion = j.value("expansion", json::object());
  config.expansion_target_size = expansion.value("target_size", 0);
  config.expansion_per_task_count = expansion.value("per_task_count", 4);
  config.expansion_task_budget = expansion.value("task_budget", 1000);

  for (const auto& [name, template_path] : j.value("templates", json::object()).items()) {
    config.template_paths[name] = resolve(base, template_path.get<std::string>());
  }
  for (const auto& backend : j.value("backends", json::array())) {
    config.backends.push_back(parse_backend(backend, base));
  }

  const json bindings = j.value("bindings", json::object());
  config.bindings.generator = bindings.value("generator", "");
  config.bindings.gate_filter = bindings.value("gate_filter", "");
  config.bindings.bench_filters =
      bindings.value("bench_filters", std::vector<std::string>{});
  config.bindings.image_models =
      bindings.value("image_models", std::vector<std::string>{});
  config.bindings.vqa = bindings.value("vqa", "");
  config.bindings.aux_alignment =
      bindings.value("aux_alignment", std::vector<std::string>{});
  config.bindings.safety_evaluators =
      bindings.value("safety_evaluators", std::vector<std::string>{});
  config.bindings.annotator = bindings.value("annotator", "");

  for (const auto& [model, ref_path] : j.value("identity_refs", json::object()).items()) {
    config.identity_refs[model] = resolve(base, ref_path.get<std::string>());
  }
  if (j.contains("human_ranks_path")) {
    config.human_ranks_path = resolve(base, j["human_ranks_path"].get<std::string>());
  }
  if (j.contains("gamma_sweep")) {
    config.gamma_sweep_values = j["gamma_sweep"].get<std::vector<double>>();
  }
  if (j.contains("categories")) {
    for (const auto& name : j["categories"]) {
      config.categories.insert(harm_type_from_string(name.get<std::string>()));
    }
  } else {
    for (const auto harm : all_harm_types()) {
      config.categories.insert(harm);
    }
  }
  for (const auto& [filter_id, rule] : j.value("filter_rules", json::object()).items()) {
    config.filter_rules[filter_id] = FilterRule{rule.value("pass_min", 60)};
  }

  // -- validation ----------------------------------------------------------
  require_config(config.gamma >= 1.0, "gamma must be >= 1");
  require_config(config.safety_threshold >= 0 && config.safety_threshold <= 100,
                 "safety_threshold must be in [0,100]");
  require_config(config.max_retries >= 1, "max_retries must be positive");
  require_config(config.fan_out >= 1, "fan_out must be positive");
  require_config(config.replicates >= 1, "replicates must be positive");
  for (const double gamma : config.gamma_sweep_values) {
    require_config(gamma >= 1.0, "gamma_sweep values must be >= 1");
  }

  std::set<std::string> seen_backend_ids;
  for (const auto& backend : config.backends) {
    require_config(seen_backend_ids.insert(backend.id).second,
                   "duplicate backend id '" + backend.id + "'");
    require_config(backend.max_retries >= 0,
                   "backend '" + backend.id + "' max_retries must be >= 0");
  }

  const auto need_template = [&](const std::string& name) {
    const auto it = config.template_paths.find(name);
    require_config(it != config.template_paths.end(),
                   "templates." + name + " is required");
    require_config(std::filesystem::exists(it->second),
                   "template file not found: " + it->second.string());
  };

  if (config.stage_enabled("expand")) {
    require_config(!config.seeds_path.empty(), "seeds_path is required");
    require_config(std::filesystem::exists(config.seeds_path),
                   "seeds file not found: " + config.seeds_path.string());
    require_config(config.expansion_target_size >= 0,
                   "expansion.target_size must be >= 0");
    need_template("expansion");
    require_binding(config, config.bindings.generator, "generator",
                    Capability::GenerateText);
  }
  if (config.stage_enabled("attack")) {
    need_template("misbinding");
    require_binding(config, config.bindings.generator, "generator",
                    Capability::GenerateText);
    require_binding(config, config.bindings.gate_filter, "gate_filter",
                    Capability::ScoreTextSafety);
  }
  if (config.stage_enabled("bench")) {
    require_config(!config.bindings.bench_filters.empty(),
                   "bindings.bench_filters must list at least one filter");
    for (const auto& filter_id : config.bindings.bench_filters) {
      require_binding(config, filter_id, "bench_filters",
                      Capability::ScoreTextSafety);
    }
  }
  if (config.stage_enabled("synth")) {
    require_config(!config.bindings.image_models.empty(),
                   "bindings.image_models must list at least one model");
    for (const auto& model_id : config.bindings.image_models) {
      require_binding(config, model_id, "image_models", Capability::GenerateImage);
      const auto& model = config.backend(model_id);
      if (model.identity_preserving) {
        const auto it = config.identity_refs.find(model_id);
        require_config(it != config.identity_refs.end(),
                       "identity-preserving model '" + model_id +
                           "' needs an identity_refs entry");
        require_config(std::filesystem::exists(it->second),
                       "identity reference not found: " + it->second.string());
      }
    }
  }
  if (config.stage_enabled("score")) {
    require_binding(config, config.bindings.vqa, "vqa", Capability::AnswerVqa);
    require_binding(config, config.bindings.annotator, "annotator",
                    Capability::GenerateText);
    for (const auto& aux_id : config.bindings.aux_alignment) {
      require_binding(config, aux_id, "aux_alignment", Capability::AnswerVqa);
    }
    require_config(!config.bindings.safety_evaluators.empty(),
                   "bindings.safety_evaluators must list at least one evaluator");
    for (const auto& evaluator_id : config.bindings.safety_evaluators) {
      require_binding(config, evaluator_id, "safety_evaluators",
                      Capability::ScoreImageSafety);
    }
    require_config(!config.categories.empty(), "categories must be non-empty");
  }
  if (config.stage_enabled("analyze")) {
    require_config(!config.human_ranks_path.empty(), "human_ranks_path is required");
    require_config(std::filesystem::exists(config.human_ranks_path),
                   "human ranks file not found: " + config.human_ranks_path.string());
  }
  return config;
}

std::string compute_config_hash(const PipelineConfig& config) {
  json j;  // plain json sorts keys, giving a canonical dump
  j["rng_seed"] = config.rng_seed;
  j["gamma"] = config.gamma;
  j["safety_threshold"] = config.safety_threshold;
  j["max_retries"] = config.max_retries;
  j["fan_out"] = config.fan_out;
  j["replicates"] = config.replicates;
  j["prompt_set_label"] = config.prompt_set_label;

  json stages = json::object();
  for (const auto& name : Pipeline::stage_names()) {
    stages[name] = config.stage_enabled(name);
  }
  j["stages"] = std::move(stages);

  j["expansion"] = {{"target_size", config.expansion_target_size},
                    {"per_task_count", config.expansion_per_task_count},
                    {"task_budget", config.expansion_task_budget}};
  j["seeds_sha256"] = file_digest(config.seeds_path);

  json templates = json::object();
  for (const auto& [name, template_path] : config.template_paths) {
    templates[name] = file_digest(template_path);
  }
  j["templates"] = std::move(templates);

  json backends = json::array();
  for (const auto& backend : config.backends) {
    json b;
    b["id"] = backend.id;
    b["capability"] = to_string(backend.capability);
    b["endpoint"] = backend.endpoint;
    b["auth_env"] = backend.auth_env;
    b["timeout_ms"] = backend.timeout.count();
    b["max_retries"] = backend.max_retries;
    b["rate_limit"] = backend.rate_limit;
    b["identity_preserving"] = backend.identity_preserving;
    b["params"] = json::parse(backend.params_json);
    backends.push_back(std::move(b));
  }
  j["backends"] = std::move(backends);

  j["bindings"] = {{"generator", config.bindings.generator},
                   {"gate_filter", config.bindings.gate_filter},
                   {"bench_filters", config.bindings.bench_filters},
                   {"image_models", config.bindings.image_models},
                   {"vqa", config.bindings.vqa},
                   {"aux_alignment", config.bindings.aux_alignment},
                   {"safety_evaluators", config.bindings.safety_evaluators},
                   {"annotator", config.bindings.annotator}};

  json identity = json::object();
  for (const auto& [model, ref_path] : config.identity_refs) {
    identity[model] = file_digest(ref_path);
  }
  j["identity_refs"] = std::move(identity);
  j["human_ranks_sha256"] = file_digest(config.human_ranks_path);
  j["gamma_sweep"] = config.gamma_sweep_values;

  json categories = json::array();
  for (const auto harm : config.categories) {
    categories.push_back(to_string(harm));
  }
  j["categories"] = std::move(categories);

  json rules = json::object();
  for (const auto& [filter_id, rule] : config.filter_rules) {
    rules[filter_id] = {{"pass_min", rule.pass_min}};
  }
  j["filter_rules"] = std::move(rules);

  return sha256_hex(j.dump());
}

}  // namespace misbind
