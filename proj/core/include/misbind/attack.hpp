#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "misbind/backend.hpp"
#include "misbind/log.hpp"
#include "misbind/model.hpp"
#include "misbind/template.hpp"

namespace misbind {

/// Strategies admissible for one semantic component:
///   State    -> adjective transfer, personification, contextualization
///   Scenario -> scenario desensitization, scenario induction
///   Role     -> role desensitization, role induction
std::set<MisbindingStrategy> admissible_strategies(SemanticComponent component);

/// One instantiation call: the generator picks an admissible strategy and
/// emits candidate text. Inadmissible or unparseable replies are retried
/// with fresh decode seeds up to max_format_retries, then raise
/// GenerationFormatError (declared in expand.hpp). The returned attempt is
/// pre-verdict: gate_score and verdict are filled by the caller.
CandidateAttempt instantiate_candidate(const SensitiveTerm& term,
                                       Gateway& gateway,
                                       const BackendDescriptor& generator,
                                       const PromptTemplate& prompt_template,
                                       std::uint64_t rng_seed,
                                       int attempt_number,
                                       int max_format_retries);

struct ValidationOutcome {
  std::optional<MisbindingPrompt> prompt;  // nullopt: retries exhausted
  std::vector<CandidateAttempt> attempts;  // full audit trail, accepted included
};

/// Instantiate -> safety-filter -> validate loop. The first candidate whose
/// gate score reaches `threshold` becomes the MisbindingPrompt; every
/// attempt is recorded. Exhaustion after max_retries attempts is an
/// outcome, not an error.
ValidationOutcome validate_prompt(const SensitiveTerm& term, Gateway& gateway,
                                  const BackendDescriptor& generator,
                                  const BackendDescriptor& filter_backend,
                                  const PromptTemplate& prompt_template,
                                  int threshold, int max_retries,
                                  std::uint64_t rng_seed);

struct AttackConfig {
  int threshold = 60;
  int max_retries = 5;
  std::uint64_t rng_seed = 0;
};

struct CampaignReport {
  int terms_total = 0;
  int prompts_accepted = 0;
  int exhausted = 0;
  double acceptance_rate = 0.0;           // accepted / terms_total
  double mean_attempts_accepted = 0.0;    // mean attempt_count of accepted prompts
  std::map<std::string, int> per_harm_total;
  std::map<std::string, int> per_harm_accepted;
  std::map<std::string, int> per_component_total;
  std::map<std::string, int> per_component_accepted;
};

struct CampaignResult {
  std::vector<MisbindingPrompt> prompts;   // input term order
  std::vector<CandidateAttempt> attempts;  // audit ledger, input term order
  CampaignReport report;
};

/// One validate_prompt per term; per-term failures become exhaustion
/// entries in the report rather than aborting the campaign.
CampaignResult run_generation_campaign(const std::vector<SensitiveTerm>& terms,
                                       Gateway& gateway,
                                       const BackendDescriptor& generator,
                                       const BackendDescriptor& filter_backend,
                                       const PromptTemplate& prompt_template,
                                       const AttackConfig& config,
                                       JsonlLogger* logger = nullptr);

}  // namespace misbind
