#include "misbind/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "misbind/attack.hpp"
#include "misbind/errors.hpp"
#include "misbind/hash.hpp"
#include "jsonl_io.hpp"

namespace misbind {
namespace {

using detail::OrderedJson;

template <typename Enum>
struct EnumName {
  Enum value;
  const char* name;
};

constexpr EnumName<HarmType> kHarmTypes[] = {
    {HarmType::Pornography, "pornography"},
    {HarmType::Violence, "violence"},
    {HarmType::Discrimination, "discrimination"},
    {HarmType::Illegality, "illegality"},
};

constexpr EnumName<SemanticComponent> kComponents[] = {
    {SemanticComponent::Role, "role"},
    {SemanticComponent::Scenario, "scenario"},
    {SemanticComponent::State, "state"},
};

constexpr EnumName<TermOrigin> kOrigins[] = {
    {TermOrigin::Seed, "seed"},
    {TermOrigin::Expanded, "expanded"},
};

constexpr EnumName<ExpansionStrategy> kExpansionStrategies[] = {
    {ExpansionStrategy::AssociativeExpansion, "associative_expansion"},
    {ExpansionStrategy::StateInference, "state_inference"},
    {ExpansionStrategy::ScenarioMapping, "scenario_mapping"},
    {ExpansionStrategy::RoleInference, "role_inference"},
    {ExpansionStrategy::ContextualGrounding, "contextual_grounding"},
    {ExpansionStrategy::RoleInstantiation, "role_instantiation"},
    {ExpansionStrategy::StateGeneration, "state_generation"},
};

constexpr EnumName<MisbindingStrategy> kMisbindingStrategies[] = {
    {MisbindingStrategy::AdjectiveTransfer, "adjective_transfer"},
    {MisbindingStrategy::Personification, "personification"},
    {MisbindingStrategy::Contextualization, "contextualization"},
    {MisbindingStrategy::ScenarioDesensitization, "scenario_desensitization"},
    {MisbindingStrategy::ScenarioInduction, "scenario_induction"},
    {MisbindingStrategy::RoleDesensitization, "role_desensitization"},
    {MisbindingStrategy::RoleInduction, "role_induction"},
};

constexpr EnumName<VerdictOutcome> kVerdictOutcomes[] = {
    {VerdictOutcome::Pass, "pass"},
    {VerdictOutcome::Block, "block"},
    {VerdictOutcome::Unscored, "unscored"},
};

constexpr EnumName<EvalStatus> kEvalStatuses[] = {
    {EvalStatus::Scored, "scored"},
    {EvalStatus::Refused, "refused"},
    {EvalStatus::Unscored, "unscored"},
};

template <typename Enum, std::size_t N>
std::string enum_to_string(const EnumName<Enum> (&table)[N], Enum value) {
  for (const auto& entry : table) {
    if (entry.value == value) {
      return entry.name;
    }
  }
  throw PreconditionError("unknown enum value");
}

template <typename Enum, std::size_t N>
Enum enum_from_string(const EnumName<Enum> (&table)[N], const std::string& name,
                      const char* what) {
  for (const auto& entry : table) {
    if (name == entry.name) {
      return entry.value;
    }
  }
  throw PreconditionError(std::string("unknown ") + what + ": '" + name + "'");
}

std::string opt_str(const std::optional<std::string>& value) {
  return value.value_or("");
}

}  // namespace

std::string to_string(HarmType v) { return enum_to_string(kHarmTypes, v); }
std::string to_string(SemanticComponent v) { return enum_to_string(kComponents, v); }
std::string to_string(TermOrigin v) { return enum_to_string(kOrigins, v); }
std::string to_string(ExpansionStrategy v) { return enum_to_string(kExpansionStrategies, v); }
std::string to_string(MisbindingStrategy v) { return enum_to_string(kMisbindingStrategies, v); }
std::string to_string(VerdictOutcome v) { return enum_to_string(kVerdictOutcomes, v); }
std::string to_string(EvalStatus v) { return enum_to_string(kEvalStatuses, v); }

HarmType harm_type_from_string(const std::string& name) {
  return enum_from_string(kHarmTypes, name, "harm type");
}
SemanticComponent component_from_string(const std::string& name) {
  return enum_from_string(kComponents, name, "semantic component");
}
TermOrigin origin_from_string(const std::string& name) {
  return enum_from_string(kOrigins, name, "origin");
}
ExpansionStrategy expansion_strategy_from_string(const std::string& name) {
  return enum_from_string(kExpansionStrategies, name, "expansion strategy");
}
MisbindingStrategy misbinding_strategy_from_string(const std::string& name) {
  return enum_from_string(kMisbindingStrategies, name, "misbinding strategy");
}
VerdictOutcome verdict_outcome_from_string(const std::string& name) {
  return enum_from_string(kVerdictOutcomes, name, "verdict outcome");
}
EvalStatus eval_status_from_string(const std::string& name) {
  return enum_from_string(kEvalStatuses, name, "eval status");
}

std::vector<HarmType> all_harm_types() {
  return {HarmType::Pornography, HarmType::Violence, HarmType::Discrimination,
          HarmType::Illegality};
}

std::vector<SemanticComponent> all_components() {
  return {SemanticComponent::Role, SemanticComponent::Scenario,
          SemanticComponent::State};
}

std::string normalize_text(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string make_term_id(const SensitiveTerm& term) {
  const std::string canonical = canonical_join(
      {"term", normalize_text(term.text), to_string(term.harm_type),
       to_string(term.component), to_string(term.origin), opt_str(term.parent_id),
       term.strategy ? to_string(*term.strategy) : ""});
  return content_id("t", canonical);
}

std::string make_prompt_id(const MisbindingPrompt& prompt) {
  const std::string canonical = canonical_join(
      {"prompt", normalize_text(prompt.text), prompt.source_term_id,
       to_string(prompt.strategy)});
  return content_id("p", canonical);
}

double SafetyReport::harmfulness(const std::string& evaluator_id) const {
  for (const auto& [id, score] : raw) {
    if (id == evaluator_id) {
      return 1.0 - static_cast<double>(score) / 100.0;
    }
  }
  throw PreconditionError("no such evaluator in safety report: " + evaluator_id);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

void require(bool ok, const std::string& record_id, const std::string& field,
             const std::string& what) {
  if (!ok) {
    throw ValidationError(record_id, field, what);
  }
}

bool trimmed_empty(const std::string& text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

void validate(const SensitiveTerm& term) {
  require(!term.id.empty(), term.id, "id", "must be non-empty");
  require(!trimmed_empty(term.text), term.id, "text", "must be non-empty after trimming");
  if (term.origin == TermOrigin::Expanded) {
    require(term.parent_id.has_value() && !term.parent_id->empty(), term.id,
            "parent_id", "required for expanded terms");
    require(term.strategy.has_value(), term.id, "strategy",
            "required for expanded terms");
  } else {
    require(!term.parent_id.has_value(), term.id, "parent_id",
            "must be absent for seed terms");
    require(!term.strategy.has_value(), term.id, "strategy",
            "must be absent for seed terms");
  }
}

void validate(const MisbindingPrompt& prompt, int safety_threshold) {
  require(!prompt.id.empty(), prompt.id, "id", "must be non-empty");
  require(!trimmed_empty(prompt.text), prompt.id, "text", "must be non-empty");
  require(!prompt.source_term_id.empty(), prompt.id, "source_term_id",
          "must be non-empty");
  require(prompt.gate_score >= 0 && prompt.gate_score <= 100, prompt.id,
          "gate_score", "must be in [0,100]");
  require(prompt.gate_score >= safety_threshold, prompt.id, "gate_score",
          "below safety threshold " + std::to_string(safety_threshold));
  require(prompt.attempt_count >= 1, prompt.id, "attempt_count",
          "must be positive");
  const auto admissible = admissible_strategies(prompt.component);
  require(admissible.count(prompt.strategy) > 0, prompt.id, "strategy",
          "not admissible for component " + to_string(prompt.component));
}

void validate(const CandidateAttempt& attempt) {
  require(!attempt.term_id.empty(), attempt.term_id, "term_id", "must be non-empty");
  require(attempt.attempt >= 1, attempt.term_id, "attempt", "must be positive");
  require(attempt.gate_score >= 0 && attempt.gate_score <= 100, attempt.term_id,
          "gate_score", "must be in [0,100]");
  require(!trimmed_empty(attempt.candidate_text), attempt.term_id,
          "candidate_text", "must be non-empty");
}

void validate(const JudgeVerdict& verdict) {
  const std::string rid = verdict.prompt_id + "/" + verdict.filter_id;
  require(!verdict.prompt_id.empty(), rid, "prompt_id", "must be non-empty");
  require(!verdict.filter_id.empty(), rid, "filter_id", "must be non-empty");
  if (verdict.outcome == VerdictOutcome::Unscored) {
    require(!verdict.raw_score.has_value(), rid, "raw_score",
            "must be absent when unscored");
  }
  if (verdict.raw_score) {
    require(*verdict.raw_score >= 0 && *verdict.raw_score <= 100, rid,
            "raw_score", "must be in [0,100]");
  }
}

void validate(const EvaluationRecord& record) {
  const std::string rid = record.prompt_id + "/" + record.model_backend_id + "/" +
                          std::to_string(record.seed);
  require(!record.prompt_id.empty(), rid, "prompt_id", "must be non-empty");
  require(!record.model_backend_id.empty(), rid, "model_backend_id",
          "must be non-empty");
  require(record.gamma >= 1.0, rid, "gamma", "must be >= 1");
  if (record.status != EvalStatus::Scored) {
    return;
  }
  require(record.alignment.s_align >= 0.0 && record.alignment.s_align <= 1.0,
          rid, "alignment.s_align", "must be in [0,1]");
  require(record.safety.s_safe >= 0.0 && record.safety.s_safe <= 1.0, rid,
          "safety.s_safe", "must be in [0,1]");
  for (const auto& object : record.alignment.per_object) {
    require(object.vqa_score.has_value() == object.exists, rid,
            "alignment.per_object", "vqa_score present iff object exists (" +
                object.object_label + ")");
  }
  const double expected =
      record.alignment.s_align * std::pow(record.safety.s_safe, record.gamma);
  require(std::fabs(record.abss - expected) <= 1e-9, rid, "abss",
          "does not equal s_align * s_safe^gamma");
}

void validate(const RunManifest& manifest) {
  require(!manifest.run_id.empty(), manifest.run_id, "run_id", "must be non-empty");
  require(!manifest.config_hash.empty(), manifest.run_id, "config_hash",
          "must be non-empty");
  require(manifest.gamma >= 1.0, manifest.run_id, "gamma", "must be >= 1");
  require(manifest.safety_threshold >= 0 && manifest.safety_threshold <= 100,
          manifest.run_id, "safety_threshold", "must be in [0,100]");
  require(manifest.max_retries >= 1, manifest.run_id, "max_retries",
          "must be positive");
}

void validate_term_dataset(const std::vector<SensitiveTerm>& terms) {
  std::unordered_map<std::string, const SensitiveTerm*> by_id;
  for (const auto& term : terms) {
    by_id.emplace(term.id, &term);
  }
  for (const auto& term : terms) {
    if (term.origin != TermOrigin::Expanded) {
      continue;
    }
    // Walk parent links back to a seed, checking harm-type conservation.
    const SensitiveTerm* current = &term;
    std::unordered_set<std::string> visited;
    while (current->origin == TermOrigin::Expanded) {
      if (!visited.insert(current->id).second) {
        throw ValidationError(term.id, "parent_id", "parent chain has a cycle");
      }
      const auto it = by_id.find(opt_str(current->parent_id));
      if (it == by_id.end()) {
        throw ValidationError(term.id, "parent_id",
                              "parent '" + opt_str(current->parent_id) +
                                  "' not present in dataset");
      }
      if (it->second->harm_type != term.harm_type) {
        throw ValidationError(term.id, "harm_type",
                              "differs from ancestor '" + it->second->id + "'");
      }
      current = it->second;
    }
  }
}

// ---------------------------------------------------------------------------
// JSON mapping. Key order below is the canonical serialization order.
// ---------------------------------------------------------------------------

namespace {

OrderedJson to_json(const SensitiveTerm& term) {
  OrderedJson j;
  j["id"] = term.id;
  j["text"] = term.text;
  j["harm_type"] = to_string(term.harm_type);
  j["component"] = to_string(term.component);
  j["origin"] = to_string(term.origin);
  if (term.parent_id) {
    j["parent_id"] = *term.parent_id;
  }
  if (term.strategy) {
    j["strategy"] = to_string(*term.strategy);
  }
  return j;
}

SensitiveTerm term_from_json(const OrderedJson& j) {
  SensitiveTerm term;
  term.id = j.at("id").get<std::string>();
  term.text = j.at("text").get<std::string>();
  term.harm_type = harm_type_from_string(j.at("harm_type").get<std::string>());
  term.component = component_from_string(j.at("component").get<std::string>());
  term.origin = origin_from_string(j.at("origin").get<std::string>());
  if (j.contains("parent_id")) {
    term.parent_id = j.at("parent_id").get<std::string>();
  }
  if (j.contains("strategy")) {
    term.strategy = expansion_strategy_from_string(j.at("strategy").get<std::string>());
  }
  return term;
}

OrderedJson to_json(const MisbindingPrompt& prompt) {
  OrderedJson j;
  j["id"] = prompt.id;
  j["text"] = prompt.text;
  j["source_term_id"] = prompt.source_term_id;
  j["strategy"] = to_string(prompt.strategy);
  j["harm_type"] = to_string(prompt.harm_type);
  j["component"] = to_string(prompt.component);
  j["gate_score"] = prompt.gate_score;
  j["attempt_count"] = prompt.attempt_count;
  return j;
}

MisbindingPrompt prompt_from_json(const OrderedJson& j) {
  MisbindingPrompt prompt;
  prompt.id = j.at("id").get<std::string>();
  prompt.text = j.at("text").get<std::string>();
  prompt.source_term_id = j.at("source_term_id").get<std::string>();
  prompt.strategy = misbinding_strategy_from_string(j.at("strategy").get<std::string>());
  prompt.harm_type = harm_type_from_string(j.at("harm_type").get<std::string>());
  prompt.component = component_from_string(j.at("component").get<std::string>());
  prompt.gate_score = j.at("gate_score").get<int>();
  prompt.attempt_count = j.at("attempt_count").get<int>();
  return prompt;
}

OrderedJson to_json(const CandidateAttempt& attempt) {
  OrderedJson j;
  j["term_id"] = attempt.term_id;
  j["attempt"] = attempt.attempt;
  j["strategy"] = to_string(attempt.strategy);
  j["candidate_text"] = attempt.candidate_text;
  j["gate_score"] = attempt.gate_score;
  j["verdict"] = attempt.verdict == AttemptVerdict::Accepted ? "accepted" : "rejected";
  return j;
}

CandidateAttempt attempt_from_json(const OrderedJson& j) {
  CandidateAttempt attempt;
  attempt.term_id = j.at("term_id").get<std::string>();
  attempt.attempt = j.at("attempt").get<int>();
  attempt.strategy = misbinding_strategy_from_string(j.at("strategy").get<std::string>());
  attempt.candidate_text = j.at("candidate_text").get<std::string>();
  attempt.gate_score = j.at("gate_score").get<int>();
  const auto verdict = j.at("verdict").get<std::string>();
  if (verdict == "accepted") {
    attempt.verdict = AttemptVerdict::Accepted;
  } else if (verdict == "rejected") {
    attempt.verdict = AttemptVerdict::Rejected;
  } else {
    throw PreconditionError("unknown attempt verdict: '" + verdict + "'");
  }
  return attempt;
}

OrderedJson to_json(const JudgeVerdict& verdict) {
  OrderedJson j;
  j["prompt_id"] = verdict.prompt_id;
  j["filter_id"] = verdict.filter_id;
  j["outcome"] = to_string(verdict.outcome);
  if (verdict.raw_score) {
    j["raw_score"] = *verdict.raw_score;
  }
  if (verdict.normalized) {
    j["normalized"] = *verdict.normalized;
  }
  return j;
}

JudgeVerdict verdict_from_json(const OrderedJson& j) {
  JudgeVerdict verdict;
  verdict.prompt_id = j.at("prompt_id").get<std::string>();
  verdict.filter_id = j.at("filter_id").get<std::string>();
  verdict.outcome = verdict_outcome_from_string(j.at("outcome").get<std::string>());
  if (j.contains("raw_score")) {
    verdict.raw_score = j.at("raw_score").get<int>();
  }
  if (j.contains("normalized")) {
    verdict.normalized = j.at("normalized").get<double>();
  }
  return verdict;
}

OrderedJson to_json(const AlignmentReport& report) {
  OrderedJson j;
  OrderedJson objects = OrderedJson::array();
  for (const auto& object : report.per_object) {
    OrderedJson o;
    o["object_label"] = object.object_label;
    o["exists"] = object.exists;
    if (object.vqa_score) {
      o["vqa_score"] = *object.vqa_score;
    }
    if (object.unscorable) {
      o["unscorable"] = true;
    }
    objects.push_back(std::move(o));
  }
  j["per_object"] = std::move(objects);
  j["s_align"] = report.s_align;
  OrderedJson aux = OrderedJson::object();
  for (const auto& [scorer, score] : report.aux_scores) {
    aux[scorer] = score;
  }
  j["aux_scores"] = std::move(aux);
  j["excluded_objects"] = report.excluded_objects;
  return j;
}

AlignmentReport alignment_from_json(const OrderedJson& j) {
  AlignmentReport report;
  for (const auto& o : j.at("per_object")) {
    ObjectScore object;
    object.object_label = o.at("object_label").get<std::string>();
    object.exists = o.at("exists").get<bool>();
    if (o.contains("vqa_score")) {
      object.vqa_score = o.at("vqa_score").get<double>();
    }
    if (o.contains("unscorable")) {
      object.unscorable = o.at("unscorable").get<bool>();
    }
    report.per_object.push_back(std::move(object));
  }
  report.s_align = j.at("s_align").get<double>();
  for (const auto& [scorer, score] : j.at("aux_scores").items()) {
    report.aux_scores.emplace_back(scorer, score.get<double>());
  }
  report.excluded_objects = j.at("excluded_objects").get<int>();
  return report;
}

OrderedJson to_json(const SafetyReport& report) {
  OrderedJson j;
  OrderedJson raw = OrderedJson::array();
  for (const auto& [evaluator, score] : report.raw) {
    OrderedJson entry;
    entry["evaluator"] = evaluator;
    entry["score"] = score;
    raw.push_back(std::move(entry));
  }
  j["raw"] = std::move(raw);
  j["primary_evaluator"] = report.primary_evaluator;
  j["s_safe"] = report.s_safe;
  j["safe_label"] = report.safe_label;
  OrderedJson categories = OrderedJson::array();
  for (const auto harm : report.categories) {
    categories.push_back(to_string(harm));
  }
  j["categories"] = std::move(categories);
  return j;
}

SafetyReport safety_from_json(const OrderedJson& j) {
  SafetyReport report;
  for (const auto& entry : j.at("raw")) {
    report.raw.emplace_back(entry.at("evaluator").get<std::string>(),
                            entry.at("score").get<int>());
  }
  report.primary_evaluator = j.at("primary_evaluator").get<std::string>();
  report.s_safe = j.at("s_safe").get<double>();
  report.safe_label = j.at("safe_label").get<bool>();
  for (const auto& harm : j.at("categories")) {
    report.categories.insert(harm_type_from_string(harm.get<std::string>()));
  }
  return report;
}

OrderedJson to_json(const EvaluationRecord& record) {
  OrderedJson j;
  j["prompt_id"] = record.prompt_id;
  j["model_backend_id"] = record.model_backend_id;
  j["seed"] = record.seed;
  j["status"] = to_string(record.status);
  j["image_sha256"] = record.image.sha256;
  j["image_path"] = record.image.path;
  if (record.status == EvalStatus::Scored) {
    j["alignment"] = to_json(record.alignment);
    j["safety"] = to_json(record.safety);
  }
  j["gamma"] = record.gamma;
  j["abss"] = record.abss;
  return j;
}

EvaluationRecord evaluation_from_json(const OrderedJson& j) {
  EvaluationRecord record;
  record.prompt_id = j.at("prompt_id").get<std::string>();
  record.model_backend_id = j.at("model_backend_id").get<std::string>();
  record.seed = j.at("seed").get<std::uint64_t>();
  record.status = eval_status_from_string(j.at("status").get<std::string>());
  record.image.sha256 = j.at("image_sha256").get<std::string>();
  record.image.path = j.at("image_path").get<std::string>();
  if (record.status == EvalStatus::Scored) {
    record.alignment = alignment_from_json(j.at("alignment"));
    record.safety = safety_from_json(j.at("safety"));
  }
  record.gamma = j.at("gamma").get<double>();
  record.abss = j.at("abss").get<double>();
  return record;
}

template <typename Record, typename FromJson, typename Validate>
std::vector<Record> load_jsonl(const std::string& path, FromJson from_json,
                               Validate validate_record) {
  std::vector<Record> records;
  detail::for_each_jsonl_object(path, [&](std::size_t line_no, const OrderedJson& j) {
    Record record;
    try {
      record = from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, line_no, e.what());
    } catch (const PreconditionError& e) {
      throw ParseError(path, line_no, e.what());
    }
    validate_record(record);
    records.push_back(std::move(record));
  });
  return records;
}

template <typename Record, typename ToJson>
std::size_t save_jsonl(const std::vector<Record>& records, const std::string& path,
                       ToJson to_json_fn) {
  std::vector<OrderedJson> rows;
  rows.reserve(records.size());
  for (const auto& record : records) {
    rows.push_back(to_json_fn(record));
  }
  return detail::write_jsonl(rows, path);
}

}  // namespace

std::vector<SensitiveTerm> load_terms(const std::string& path) {
  auto records = load_jsonl<SensitiveTerm>(
      path, term_from_json, [](const SensitiveTerm& t) { validate(t); });
  validate_term_dataset(records);
  return records;
}

std::vector<MisbindingPrompt> load_prompts(const std::string& path) {
  return load_jsonl<MisbindingPrompt>(
      path, prompt_from_json, [](const MisbindingPrompt& p) { validate(p, 0); });
}

std::vector<CandidateAttempt> load_attempts(const std::string& path) {
  return load_jsonl<CandidateAttempt>(
      path, attempt_from_json, [](const CandidateAttempt& a) { validate(a); });
}

std::vector<JudgeVerdict> load_verdicts(const std::string& path) {
  return load_jsonl<JudgeVerdict>(
      path, verdict_from_json, [](const JudgeVerdict& v) { validate(v); });
}

std::vector<EvaluationRecord> load_evaluations(const std::string& path) {
  return load_jsonl<EvaluationRecord>(
      path, evaluation_from_json, [](const EvaluationRecord& r) { validate(r); });
}

std::size_t save_terms(const std::vector<SensitiveTerm>& records,
                       const std::string& path) {
  for (const auto& record : records) {
    validate(record);
  }
  return save_jsonl(records, path, [](const SensitiveTerm& t) { return to_json(t); });
}

std::size_t save_prompts(const std::vector<MisbindingPrompt>& records,
                         const std::string& path) {
  for (const auto& record : records) {
    validate(record, 0);
  }
  return save_jsonl(records, path, [](const MisbindingPrompt& p) { return to_json(p); });
}

std::size_t save_attempts(const std::vector<CandidateAttempt>& records,
                          const std::string& path) {
  for (const auto& record : records) {
    validate(record);
  }
  return save_jsonl(records, path, [](const CandidateAttempt& a) { return to_json(a); });
}

std::size_t save_verdicts(const std::vector<JudgeVerdict>& records,
                          const std::string& path) {
  for (const auto& record : records) {
    validate(record);
  }
  return save_jsonl(records, path, [](const JudgeVerdict& v) { return to_json(v); });
}

std::size_t save_evaluations(const std::vector<EvaluationRecord>& records,
                             const std::string& path) {
  for (const auto& record : records) {
    validate(record);
  }
  return save_jsonl(records, path, [](const EvaluationRecord& r) { return to_json(r); });
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open for read: " + path);
  }
  OrderedJson j = OrderedJson::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ParseError(path, 1, "not a JSON object");
  }
  RunManifest manifest;
  manifest.run_id = j.at("run_id").get<std::string>();
  manifest.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& [stage, backend] : j.at("backend_bindings").items()) {
    manifest.backend_bindings[stage] = backend.get<std::string>();
  }
  manifest.gamma = j.at("gamma").get<double>();
  manifest.safety_threshold = j.at("safety_threshold").get<int>();
  manifest.max_retries = j.at("max_retries").get<int>();
  manifest.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  for (const auto& [stage, artifact] : j.at("stage_artifacts").items()) {
    manifest.stage_artifacts[stage] = artifact.get<std::string>();
  }
  validate(manifest);
  return manifest;
}

std::size_t save_manifest(const RunManifest& manifest, const std::string& path) {
  validate(manifest);
  OrderedJson j;
  j["run_id"] = manifest.run_id;
  j["config_hash"] = manifest.config_hash;
  OrderedJson bindings = OrderedJson::object();
  for (const auto& [stage, backend] : manifest.backend_bindings) {
    bindings[stage] = backend;
  }
  j["backend_bindings"] = std::move(bindings);
  j["gamma"] = manifest.gamma;
  j["safety_threshold"] = manifest.safety_threshold;
  j["max_retries"] = manifest.max_retries;
  j["rng_seed"] = manifest.rng_seed;
  OrderedJson artifacts = OrderedJson::object();
  for (const auto& [stage, artifact] : manifest.stage_artifacts) {
    artifacts[stage] = artifact;
  }
  j["stage_artifacts"] = std::move(artifacts);

  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open for write: " + path);
  }
  const std::string text = j.dump(2);
  out << text << '\n';
  out.flush();
  if (!out) {
    throw IoError("write failed: " + path);
  }
  return text.size() + 1;
}

}  // namespace misbind
