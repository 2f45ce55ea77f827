#include "misbind/expand.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

#include "misbind/hash.hpp"

namespace misbind {
namespace {

using nlohmann::json;

std::uint64_t task_seed(std::uint64_t rng_seed, const std::string& seed_id,
                        SemanticComponent target, int round, int attempt) {
  return sha256_prefix64(canonical_join(
      {"expand", std::to_string(rng_seed), seed_id, to_string(target),
       std::to_string(round), std::to_string(attempt)}));
}

json task_payload(const ExpansionTask& task) {
  json payload;
  payload["seed_text"] = task.seed.text;
  payload["harm_type"] = to_string(task.seed.harm_type);
  payload["source_component"] = to_string(task.seed.component);
  payload["target_component"] = to_string(task.target_component);
  payload["strategy"] = to_string(task.strategy);
  payload["count"] = task.count_requested;
  return payload;
}

std::vector<std::string> parse_term_list(const std::string& reply) {
  const json parsed = json::parse(reply, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array()) {
    throw GenerationFormatError("expected a JSON array of term strings");
  }
  std::vector<std::string> texts;
  for (const auto& item : parsed) {
    if (!item.is_string()) {
      throw GenerationFormatError("term list contains a non-string entry");
    }
    texts.push_back(item.get<std::string>());
  }
  return texts;
}

/// Pinned Fisher-Yates so shuffles do not depend on the standard library's
/// std::shuffle implementation.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::uint64_t state = seed ^ 0x9e3779b97f4a7c15ULL;
  auto next = [&state]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  };
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(next() % i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

ExpansionStrategy strategy_for(SemanticComponent source, SemanticComponent target) {
  if (source == target) {
    return ExpansionStrategy::AssociativeExpansion;
  }
  switch (source) {
    case SemanticComponent::Role:
      return target == SemanticComponent::State ? ExpansionStrategy::StateInference
                                                : ExpansionStrategy::ScenarioMapping;
    case SemanticComponent::State:
      return target == SemanticComponent::Role
                 ? ExpansionStrategy::RoleInference
                 : ExpansionStrategy::ContextualGrounding;
    case SemanticComponent::Scenario:
      return target == SemanticComponent::Role
                 ? ExpansionStrategy::RoleInstantiation
                 : ExpansionStrategy::StateGeneration;
  }
  throw PreconditionError("unknown semantic component");
}

std::vector<SensitiveTerm> expand_term(
    const ExpansionTask& task, Gateway& gateway,
    const BackendDescriptor& generator, const PromptTemplate& prompt_template,
    const std::unordered_set<std::string>& existing_normalized,
    int max_retries, std::uint64_t rng_seed) {
  if (task.strategy != strategy_for(task.seed.component, task.target_component)) {
    throw PreconditionError("task strategy does not match the strategy matrix");
  }
  if (task.count_requested <= 0) {
    return {};
  }

  const std::string system_prompt = prompt_template.render({
      {"seed_text", task.seed.text},
      {"harm_type", to_string(task.seed.harm_type)},
      {"source_component", to_string(task.seed.component)},
      {"target_component", to_string(task.target_component)},
      {"strategy", to_string(task.strategy)},
      {"count", std::to_string(task.count_requested)},
  });
  const std::string payload = task_payload(task).dump();

  std::string last_error;
  const int attempts = std::max(max_retries, 1);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    const std::uint64_t seed =
        task_seed(rng_seed, task.seed.id, task.target_component, 0, attempt);
    const std::string reply =
        gateway.generate_text(generator, system_prompt, payload, seed);
    std::vector<std::string> texts;
    try {
      texts = parse_term_list(reply);
    } catch (const GenerationFormatError& e) {
      last_error = e.what();
      continue;
    }

    std::vector<SensitiveTerm> terms;
    std::unordered_set<std::string> emitted;
    for (const auto& text : texts) {
      if (static_cast<int>(terms.size()) >= task.count_requested) {
        break;
      }
      const std::string normalized = normalize_text(text);
      if (normalized.empty() || existing_normalized.count(normalized) > 0 ||
          !emitted.insert(normalized).second) {
        continue;
      }
      SensitiveTerm term;
      term.text = text;
      term.harm_type = task.seed.harm_type;
      term.component = task.target_component;
      term.origin = TermOrigin::Expanded;
      term.parent_id = task.seed.id;
      term.strategy = task.strategy;
      term.id = make_term_id(term);
      validate(term);
      terms.push_back(std::move(term));
    }
    return terms;
  }
  throw GenerationFormatError("term list unparseable after " +
                              std::to_string(attempts) + " attempt(s): " + last_error);
}

ExpansionResult run_expansion_campaign(const std::vector<SensitiveTerm>& seeds,
                                       const ExpansionConfig& config,
                                       Gateway& gateway,
                                       const BackendDescriptor& generator,
                                       const PromptTemplate& prompt_template,
                                       JsonlLogger* logger) {
  if (seeds.empty()) {
    throw PreconditionError("expansion needs at least one seed term");
  }
  for (const auto& seed : seeds) {
    if (seed.origin != TermOrigin::Seed) {
      throw PreconditionError("expansion input must contain only seed terms");
    }
  }

  ExpansionResult result;
  result.dataset = seeds;
  result.report.target_size = config.target_size;

  std::unordered_set<std::string> normalized;
  for (const auto& seed : seeds) {
    normalized.insert(normalize_text(seed.text));
  }

  struct Pair {
    std::size_t seed_index;
    SemanticComponent target;
  };
  std::vector<Pair> pairs;
  pairs.reserve(seeds.size() * kComponentCount);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (const auto target : all_components()) {
      pairs.push_back({i, target});
    }
  }
  deterministic_shuffle(pairs, config.rng_seed);

  int round = 0;
  while (static_cast<int>(result.dataset.size()) < config.target_size &&
         result.report.tasks_run < config.task_budget) {
    bool any_progress = false;
    for (const auto& pair : pairs) {
      if (static_cast<int>(result.dataset.size()) >= config.target_size ||
          result.report.tasks_run >= config.task_budget) {
        break;
      }
      const auto& seed = seeds[pair.seed_index];
      ExpansionTask task;
      task.seed = seed;
      task.target_component = pair.target;
      task.strategy = strategy_for(seed.component, pair.target);
      task.count_requested =
          std::min(config.per_task_count,
                   config.target_size - static_cast<int>(result.dataset.size()));
      ++result.report.tasks_run;
      try {
        // The round index salts the decode seed so repeat visits to a pair
        // explore fresh generations.
        auto terms = expand_term(task, gateway, generator, prompt_template,
                                 normalized, config.max_retries,
                                 config.rng_seed + static_cast<std::uint64_t>(round));
        for (auto& term : terms) {
          normalized.insert(normalize_text(term.text));
          result.dataset.push_back(std::move(term));
          any_progress = true;
        }
      } catch (const GenerationFormatError& e) {
        ++result.report.tasks_failed;
        if (logger != nullptr) {
          logger->warn("expansion_task_skipped",
                       {{"seed_id", seed.id},
                        {"target", to_string(pair.target)},
                        {"error", e.what()}});
        }
      }
    }
    ++round;
    if (!any_progress) {
      break;  // no pair can contribute anything new
    }
  }

  result.report.final_size = static_cast<int>(result.dataset.size());
  result.report.shortfall = result.report.final_size < config.target_size;

  // Harm-type share of the output vs the seed set, tolerance +-10 points.
  std::map<std::string, double> seed_counts;
  std::map<std::string, double> output_counts;
  for (const auto harm : all_harm_types()) {
    seed_counts[to_string(harm)] = 0;
    output_counts[to_string(harm)] = 0;
  }
  for (const auto& seed : seeds) {
    seed_counts[to_string(seed.harm_type)] += 1;
  }
  for (const auto& term : result.dataset) {
    output_counts[to_string(term.harm_type)] += 1;
  }
  for (const auto harm : all_harm_types()) {
    const auto name = to_string(harm);
    HarmShare share;
    share.seed_share = seed_counts[name] / static_cast<double>(seeds.size());
    share.output_share =
        output_counts[name] / static_cast<double>(result.dataset.size());
    share.within_tolerance =
        std::fabs(share.output_share - share.seed_share) <= 0.10;
    result.report.harm_distribution[name] = share;
  }

  if (logger != nullptr && result.report.shortfall) {
    logger->warn("expansion_shortfall",
                 {{"target", std::to_string(config.target_size)},
                  {"final", std::to_string(result.report.final_size)}});
  }
  return result;
}

}  // namespace misbind
