#include "misbind/attack.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

#include "misbind/expand.hpp"
#include "misbind/hash.hpp"

namespace misbind {
namespace {

using nlohmann::json;

std::uint64_t attempt_seed(std::uint64_t rng_seed, const std::string& term_id,
                           int attempt, int format_retry) {
  return sha256_prefix64(canonical_join(
      {"attack", std::to_string(rng_seed), term_id, std::to_string(attempt),
       std::to_string(format_retry)}));
}

std::string strategies_csv(const std::set<MisbindingStrategy>& strategies) {
  std::string out;
  for (const auto strategy : strategies) {
    if (!out.empty()) {
      out += ", ";
    }
    out += to_string(strategy);
  }
  return out;
}

}  // namespace

std::set<MisbindingStrategy> admissible_strategies(SemanticComponent component) {
  switch (component) {
    case SemanticComponent::State:
      return {MisbindingStrategy::AdjectiveTransfer,
              MisbindingStrategy::Personification,
              MisbindingStrategy::Contextualization};
    case SemanticComponent::Scenario:
      return {MisbindingStrategy::ScenarioDesensitization,
              MisbindingStrategy::ScenarioInduction};
    case SemanticComponent::Role:
      return {MisbindingStrategy::RoleDesensitization,
              MisbindingStrategy::RoleInduction};
  }
  throw PreconditionError("unknown semantic component");
}

CandidateAttempt instantiate_candidate(const SensitiveTerm& term,
                                       Gateway& gateway,
                                       const BackendDescriptor& generator,
                                       const PromptTemplate& prompt_template,
                                       std::uint64_t rng_seed,
                                       int attempt_number,
                                       int max_format_retries) {
  const auto admissible = admissible_strategies(term.component);

  json strategy_names = json::array();
  for (const auto strategy : admissible) {
    strategy_names.push_back(to_string(strategy));
  }

  const std::string system_prompt = prompt_template.render({
      {"term_text", term.text},
      {"harm_type", to_string(term.harm_type)},
      {"component", to_string(term.component)},
      {"strategies", strategies_csv(admissible)},
  });

  json payload;
  payload["term_text"] = term.text;
  payload["harm_type"] = to_string(term.harm_type);
  payload["component"] = to_string(term.component);
  payload["strategies"] = strategy_names;
  payload["attempt"] = attempt_number;

  std::string last_error;
  const int tries = std::max(max_format_retries, 1);
  for (int format_retry = 0; format_retry < tries; ++format_retry) {
    const std::uint64_t seed =
        attempt_seed(rng_seed, term.id, attempt_number, format_retry);
    const std::string reply =
        gateway.generate_text(generator, system_prompt, payload.dump(), seed);

    const json parsed = json::parse(reply, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() ||
        !parsed.contains("strategy") || !parsed.contains("prompt")) {
      last_error = "reply is not a {strategy, prompt} object";
      continue;
    }
    MisbindingStrategy strategy;
    try {
      strategy = misbinding_strategy_from_string(parsed["strategy"].get<std::string>());
    } catch (const PreconditionError& e) {
      last_error = e.what();
      continue;
    }
    if (admissible.count(strategy) == 0) {
      last_error = "strategy '" + to_string(strategy) +
                   "' not admissible for component " + to_string(term.component);
      continue;
    }
    const std::string candidate_text = parsed["prompt"].get<std::string>();
    if (candidate_text.empty()) {
      last_error = "empty candidate text";
      continue;
    }
    CandidateAttempt attempt;
    attempt.term_id = term.id;
    attempt.attempt = attempt_number;
    attempt.strategy = strategy;
    attempt.candidate_text = candidate_text;
    return attempt;
  }
  throw GenerationFormatError("candidate instantiation failed after " +
                              std::to_string(tries) + " attempt(s): " + last_error);
}

ValidationOutcome validate_prompt(const SensitiveTerm& term, Gateway& gateway,
                                  const BackendDescriptor& generator,
                                  const BackendDescriptor& filter_backend,
                                  const PromptTemplate& prompt_template,
                                  int threshold, int max_retries,
                                  std::uint64_t rng_seed) {
  if (threshold < 0 || threshold > 100) {
    throw PreconditionError("threshold must be in [0,100]");
  }
  if (max_retries < 1) {
    throw PreconditionError("max_retries must be positive");
  }

  ValidationOutcome outcome;
  for (int attempt_number = 1; attempt_number <= max_retries; ++attempt_number) {
    // A rejected candidate re-runs the full instantiation, so the generator
    // may pick a fresh strategy on every attempt.
    CandidateAttempt attempt =
        instantiate_candidate(term, gateway, generator, prompt_template,
                              rng_seed, attempt_number, max_retries);
    const RawSafetyScore gate =
        gateway.score_text_safety(filter_backend, attempt.candidate_text);
    attempt.gate_score = gate.score;
    attempt.verdict = gate.score >= threshold ? AttemptVerdict::Accepted
                                              : AttemptVerdict::Rejected;
    outcome.attempts.push_back(attempt);

    if (attempt.verdict == AttemptVerdict::Accepted) {
      MisbindingPrompt prompt;
      prompt.text = attempt.candidate_text;
      prompt.source_term_id = term.id;
      prompt.strategy = attempt.strategy;
      prompt.harm_type = term.harm_type;
      prompt.component = term.component;
      prompt.gate_score = attempt.gate_score;
      prompt.attempt_count = attempt_number;
      prompt.id = make_prompt_id(prompt);
      validate(prompt, threshold);
      outcome.prompt = std::move(prompt);
      return outcome;
    }
  }
  return outcome;  // exhausted after exactly max_retries attempts
}

CampaignResult run_generation_campaign(const std::vector<SensitiveTerm>& terms,
                                       Gateway& gateway,
                                       const BackendDescriptor& generator,
                                       const BackendDescriptor& filter_backend,
                                       const PromptTemplate& prompt_template,
                                       const AttackConfig& config,
                                       JsonlLogger* logger) {
  if (terms.empty()) {
    throw PreconditionError("generation campaign needs at least one term");
  }

  CampaignResult result;
  result.report.terms_total = static_cast<int>(terms.size());
  long long attempts_accepted_sum = 0;

  for (const auto& term : terms) {
    const auto harm = to_string(term.harm_type);
    const auto component = to_string(term.component);
    ++result.report.per_harm_total[harm];
    ++result.report.per_component_total[component];

    // Per-term salt keeps outcomes independent of campaign order.
    const std::uint64_t term_salt =
        sha256_prefix64(canonical_join({std::to_string(config.rng_seed), term.id}));

    ValidationOutcome outcome;
    try {
      outcome = validate_prompt(term, gateway, generator, filter_backend,
                                prompt_template, config.threshold,
                                config.max_retries, term_salt);
    } catch (const GenerationFormatError& e) {
      ++result.report.exhausted;
      if (logger != nullptr) {
        logger->warn("term_generation_failed",
                     {{"term_id", term.id}, {"error", e.what()}});
      }
      continue;
    }

    result.attempts.insert(result.attempts.end(), outcome.attempts.begin(),
                           outcome.attempts.end());
    if (outcome.prompt) {
      ++result.report.prompts_accepted;
      ++result.report.per_harm_accepted[harm];
      ++result.report.per_component_accepted[component];
      attempts_accepted_sum += outcome.prompt->attempt_count;
      result.prompts.push_back(std::move(*outcome.prompt));
    } else {
      ++result.report.exhausted;
      if (logger != nullptr) {
        logger->info("term_exhausted",
                     {{"term_id", term.id},
                      {"attempts", std::to_string(config.max_retries)}});
      }
    }
  }

  result.report.acceptance_rate =
      static_cast<double>(result.report.prompts_accepted) /
      static_cast<double>(result.report.terms_total);
  result.report.mean_attempts_accepted =
      result.report.prompts_accepted > 0
          ? static_cast<double>(attempts_accepted_sum) /
                static_cast<double>(result.report.prompts_accepted)
          : 0.0;
  return result;
}

}  // namespace misbind
