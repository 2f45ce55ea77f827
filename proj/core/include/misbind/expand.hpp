#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "misbind/backend.hpp"
#include "misbind/errors.hpp"
#include "misbind/model.hpp"
#include "misbind/template.hpp"

namespace misbind {

/// A generator reply that could not be parsed into the required shape.
class GenerationFormatError : public Error {
 public:
  using Error::Error;
};

struct ExpansionTask {
  SensitiveTerm seed;
  SemanticComponent target_component = SemanticComponent::Role;
  ExpansionStrategy strategy = ExpansionStrategy::AssociativeExpansion;
  int count_requested = 0;
};

/// The 3x3 source/target strategy matrix; total over all nine cells,
/// diagonal cells map to AssociativeExpansion.
ExpansionStrategy strategy_for(SemanticComponent source, SemanticComponent target);

/// Asks the generator for up to count_requested new terms. Every returned
/// term carries component = target, the seed's harm type, origin Expanded
/// and parent_id = seed.id; texts already in `existing_normalized` are
/// dropped. Unparseable replies are retried with fresh decode seeds up to
/// max_retries times, then raise GenerationFormatError.
std::vector<SensitiveTerm> expand_term(
    const ExpansionTask& task, Gateway& gateway,
    const BackendDescriptor& generator, const PromptTemplate& prompt_template,
    const std::unordered_set<std::string>& existing_normalized,
    int max_retries, std::uint64_t rng_seed);

struct ExpansionConfig {
  int target_size = 0;
  int per_task_count = 4;
  int task_budget = 1000;
  int max_retries = 5;
  std::uint64_t rng_seed = 0;
};

struct HarmShare {
  double seed_share = 0.0;
  double output_share = 0.0;
  bool within_tolerance = true;  // |output - seed| <= 0.10
};

struct ExpansionReport {
  int target_size = 0;
  int final_size = 0;
  int tasks_run = 0;
  int tasks_failed = 0;
  bool shortfall = false;
  std::map<std::string, HarmShare> harm_distribution;  // harm type -> shares
};

struct ExpansionResult {
  std::vector<SensitiveTerm> dataset;  // seeds first, then expansions in task order
  ExpansionReport report;
};

/// Grows the seed vocabulary to target_size. Tasks cycle round-robin over
/// (seed, target component) pairs in an rng_seed-shuffled order until the
/// target or the task budget is reached; a shortfall yields a report, not
/// an error.
ExpansionResult run_expansion_campaign(const std::vector<SensitiveTerm>& seeds,
                                       const ExpansionConfig& config,
                                       Gateway& gateway,
                                       const BackendDescriptor& generator,
                                       const PromptTemplate& prompt_template,
                                       JsonlLogger* logger = nullptr);

}  // namespace misbind
