#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "misbind/model.hpp"

namespace misbind {

/// A ranking over labeled models. Labels are kept in sorted order for
/// determinism; rank 1 is best and exact ties share the average of their
/// positional ranks, so the ranks always sum to n(n+1)/2.
struct RankVector {
  std::vector<std::string> labels;
  std::vector<double> ranks;

  double rank_of(const std::string& label) const;
};

enum class RankDirection { HigherIsBetter, LowerIsBetter };

/// Ranks models by score. NaN scores are rejected.
RankVector rank_by_score(const std::map<std::string, double>& scores,
                         RankDirection direction);

/// Builds a RankVector directly from per-label rank values (1 = best).
RankVector rank_vector_from_ranks(const std::map<std::string, double>& ranks);

/// Spearman's rank correlation. Tie-free vectors use
/// 1 - 6*sum(d^2)/(n(n^2-1)); vectors with ties fall back to the Pearson
/// correlation of the rank values. Both vectors must carry the same labels
/// and at least two of them.
double spearman_rho(const RankVector& a, const RankVector& b);

struct GammaSweepRow {
  double gamma = 0.0;
  std::vector<std::pair<std::string, double>> model_scores;  // sorted by label
  RankVector ranks;
  double rho = 0.0;
  bool is_argmax = false;  // highest rho; smallest gamma wins ties
};

/// For each gamma: recompute per-record abss, average per model, rank, and
/// correlate with the human ranking. per_model_records maps model id to its
/// (s_align, s_safe) pairs.
std::vector<GammaSweepRow> gamma_sweep(
    const std::map<std::string, std::vector<std::pair<double, double>>>& per_model_records,
    const std::vector<double>& gammas, const RankVector& human);

/// Mean-rank aggregation of per-participant orderings (best model first),
/// re-ranked into a final preference ranking.
RankVector aggregate_human_rankings(
    const std::map<std::string, std::vector<std::string>>& participant_orderings);

/// One-sided permutation test: the share of label permutations of `b` whose
/// rho reaches the observed one. Deterministic for a fixed seed.
double permutation_test_p(const RankVector& a, const RankVector& b,
                          int permutations, std::uint64_t seed);

}  // namespace misbind
