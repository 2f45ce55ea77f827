#pragma once

#include <string>
#include <utility>
#include <vector>

#include "misbind/bench.hpp"
#include "misbind/metrics.hpp"
#include "misbind/rank.hpp"

namespace misbind {

/// Bypass-rate table: one row per labeled corpus, one column per filter
/// plus the ALL column. Columns with no scored cells render as "n/a".
std::string bypass_table_markdown(
    const std::vector<std::pair<std::string, VerdictMatrix>>& corpora);
std::string bypass_table_csv(
    const std::vector<std::pair<std::string, VerdictMatrix>>& corpora);

/// Alignment / safety / ABSS summary in the standard column order:
/// per-scorer alignment, A-Avg., per-evaluator safety, S-Avg., ABSS.
std::string eval_table_markdown(const std::vector<EvalTableRow>& rows);
std::string eval_table_csv(const std::vector<EvalTableRow>& rows);

/// Gamma sweep: per-model "score (rank)" cells, Spearman's rho and an
/// argmax marker per row.
std::string gamma_table_csv(const std::vector<GammaSweepRow>& rows);
std::string gamma_table_markdown(const std::vector<GammaSweepRow>& rows);

}  // namespace misbind
