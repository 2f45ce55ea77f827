#include "misbind/rank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "misbind/errors.hpp"
#include "misbind/metrics.hpp"

namespace misbind {
namespace {

bool has_ties(const std::vector<double>& ranks) {
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedRateError("constant ranking has no defined correlation");
  }
  return sxy / std::sqrt(sxx * syy);
}

void check_rank_vector(const RankVector& vector) {
  if (vector.labels.size() != vector.ranks.size()) {
    throw PreconditionError("rank vector labels and ranks differ in length");
  }
  const auto n = static_cast<double>(vector.ranks.size());
  const double sum = std::accumulate(vector.ranks.begin(), vector.ranks.end(), 0.0);
  if (std::fabs(sum - n * (n + 1.0) / 2.0) > 1e-9) {
    throw PreconditionError("ranks do not sum to n(n+1)/2");
  }
}

std::uint64_t xorshift_next(std::uint64_t& state) {
  state ^= state << 13;
  state ^= state >> 7;
  state ^= state << 17;
  return state;
}

}  // namespace

double RankVector::rank_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) {
      return ranks[i];
    }
  }
  throw PreconditionError("no such label in rank vector: '" + label + "'");
}

RankVector rank_by_score(const std::map<std::string, double>& scores,
                         RankDirection direction) {
  if (scores.empty()) {
    throw PreconditionError("rank_by_score needs at least one score");
  }
  for (const auto& [label, score] : scores) {
    if (std::isnan(score)) {
      throw PreconditionError("NaN score for label '" + label + "'");
    }
  }

  // Sort labels best-first; ties keep label order for a stable grouping.
  std::vector<std::pair<std::string, double>> ordered(scores.begin(), scores.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [direction](const auto& lhs, const auto& rhs) {
                     return direction == RankDirection::HigherIsBetter
                                ? lhs.second > rhs.second
                                : lhs.second < rhs.second;
                   });

  std::map<std::string, double> rank_of;
  std::size_t i = 0;
  while (i < ordered.size()) {
    std::size_t j = i;
    while (j + 1 < ordered.size() && ordered[j + 1].second == ordered[i].second) {
      ++j;
    }
    // Positions i..j (0-based) share the average of ranks i+1..j+1.
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) {
      rank_of[ordered[k].first] = shared;
    }
    i = j + 1;
  }

  RankVector result;
  for (const auto& [label, rank] : rank_of) {  // std::map iterates sorted
    result.labels.push_back(label);
    result.ranks.push_back(rank);
  }
  return result;
}

RankVector rank_vector_from_ranks(const std::map<std::string, double>& ranks) {
  RankVector result;
  for (const auto& [label, rank] : ranks) {
    result.labels.push_back(label);
    result.ranks.push_back(rank);
  }
  check_rank_vector(result);
  return result;
}

double spearman_rho(const RankVector& a, const RankVector& b) {
  check_rank_vector(a);
  check_rank_vector(b);
  if (a.labels != b.labels) {
    throw PreconditionError("rank vectors must cover the same labels");
  }
  const std::size_t n = a.labels.size();
  if (n < 2) {
    throw PreconditionError("spearman_rho needs at least two labels");
  }
  if (has_ties(a.ranks) || has_ties(b.ranks)) {
    return pearson(a.ranks, b.ranks);
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.ranks[i] - b.ranks[i];
    d2 += d * d;
  }
  const auto dn = static_cast<double>(n);
  return 1.0 - 6.0 * d2 / (dn * (dn * dn - 1.0));
}

std::vector<GammaSweepRow> gamma_sweep(
    const std::map<std::string, std::vector<std::pair<double, double>>>& per_model_records,
    const std::vector<double>& gammas, const RankVector& human) {
  if (per_model_records.empty()) {
    throw PreconditionError("gamma_sweep needs at least one model");
  }
  for (const double gamma : gammas) {
    if (!(gamma >= 1.0)) {
      throw PreconditionError("all gammas must be >= 1");
    }
  }

  std::vector<GammaSweepRow> rows;
  rows.reserve(gammas.size());
  for (const double gamma : gammas) {
    GammaSweepRow row;
    row.gamma = gamma;
    std::map<std::string, double> means;
    for (const auto& [model, records] : per_model_records) {
      if (records.empty()) {
        throw PreconditionError("model '" + model + "' has no records");
      }
      double sum = 0.0;
      for (const auto& [s_align, s_safe] : records) {
        sum += abss(s_align, s_safe, gamma);
      }
      means[model] = sum / static_cast<double>(records.size());
    }
    row.model_scores.assign(means.begin(), means.end());
    row.ranks = rank_by_score(means, RankDirection::HigherIsBetter);
    row.rho = spearman_rho(row.ranks, human);
    rows.push_back(std::move(row));
  }

  // Flag the argmax row; the smallest gamma wins exact ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].rho > rows[best].rho) {
      best = i;
    }
  }
  if (!rows.empty()) {
    rows[best].is_argmax = true;
  }
  return rows;
}

RankVector aggregate_human_rankings(
    const std::map<std::string, std::vector<std::string>>& participant_orderings) {
  if (participant_orderings.empty()) {
    throw PreconditionError("no participant rankings given");
  }
  std::map<std::string, double> rank_sums;
  std::size_t expected = participant_orderings.begin()->second.size();
  for (const auto& [participant, ordering] : participant_orderings) {
    if (ordering.size() != expected) {
      throw PreconditionError("participant '" + participant +
                              "' ranked a different number of models");
    }
    for (std::size_t position = 0; position < ordering.size(); ++position) {
      rank_sums[ordering[position]] += static_cast<double>(position + 1);
    }
  }
  if (rank_sums.size() != expected) {
    throw PreconditionError("participants ranked inconsistent model sets");
  }
  std::map<std::string, double> mean_ranks;
  for (const auto& [model, sum] : rank_sums) {
    mean_ranks[model] = sum / static_cast<double>(participant_orderings.size());
  }
  return rank_by_score(mean_ranks, RankDirection::LowerIsBetter);
}

double permutation_test_p(const RankVector& a, const RankVector& b,
                          int permutations, std::uint64_t seed) {
  if (permutations <= 0) {
    throw PreconditionError("permutations must be positive");
  }
  const double observed = spearman_rho(a, b);
  std::uint64_t state = seed ^ 0x9e3779b97f4a7c15ULL;
  int at_least = 0;
  std::vector<double> shuffled = b.ranks;
  for (int i = 0; i < permutations; ++i) {
    for (std::size_t j = shuffled.size(); j > 1; --j) {
      const std::size_t k = static_cast<std::size_t>(xorshift_next(state) % j);
      std::swap(shuffled[j - 1], shuffled[k]);
    }
    RankVector permuted;
    permuted.labels = b.labels;
    permuted.ranks = shuffled;
    if (spearman_rho(a, permuted) >= observed - 1e-12) {
      ++at_least;
    }
  }
  return static_cast<double>(at_least) / static_cast<double>(permutations);
}

}  // namespace misbind
