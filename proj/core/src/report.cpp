#include "misbind/report.hpp"

#include <cstdio>
#include <sstream>

namespace misbind {
namespace {

std::string fixed(double value, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
  return buffer;
}

std::string rank_label(double rank) {
  if (rank == static_cast<double>(static_cast<long long>(rank))) {
    return std::to_string(static_cast<long long>(rank));
  }
  return fixed(rank, 1);
}

std::string rate_cell(const VerdictMatrix& matrix, const std::string& filter_id) {
  try {
    return fixed(bypass_rate(matrix, filter_id), 2);
  } catch (const UndefinedRateError&) {
    return "n/a";
  }
}

std::string all_cell(const VerdictMatrix& matrix) {
  try {
    return fixed(all_bypass_rate(matrix), 2);
  } catch (const UndefinedRateError&) {
    return "n/a";
  }
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) {
    return field;
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') {
      out += "\"\"";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

void markdown_row(std::ostringstream& out, const std::vector<std::string>& cells) {
  out << "|";
  for (const auto& cell : cells) {
    out << " " << cell << " |";
  }
  out << "\n";
}

void markdown_separator(std::ostringstream& out, std::size_t columns) {
  out << "|";
  for (std::size_t i = 0; i < columns; ++i) {
    out << " --- |";
  }
  out << "\n";
}

void csv_row(std::ostringstream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) {
      out << ",";
    }
    out << csv_escape(cells[i]);
  }
  out << "\n";
}

std::vector<std::string> bypass_header(const VerdictMatrix& matrix) {
  std::vector<std::string> header{"Prompt Type"};
  header.insert(header.end(), matrix.filter_ids.begin(), matrix.filter_ids.end());
  header.push_back("ALL.");
  return header;
}

std::vector<std::string> bypass_cells(const std::string& label,
                                      const VerdictMatrix& matrix) {
  std::vector<std::string> cells{label};
  for (const auto& filter_id : matrix.filter_ids) {
    cells.push_back(rate_cell(matrix, filter_id));
  }
  cells.push_back(all_cell(matrix));
  return cells;
}

std::vector<std::string> eval_header(const EvalTableRow& first) {
  std::vector<std::string> header{"Prompt", "Model"};
  for (const auto& [scorer, value] : first.alignment_aux) {
    header.push_back(scorer);
  }
  header.push_back("A-Avg.");
  for (const auto& [evaluator, value] : first.safety) {
    header.push_back(evaluator);
  }
  header.push_back("S-Avg.");
  header.push_back("ABSS");
  return header;
}

std::vector<std::string> eval_cells(const EvalTableRow& row) {
  std::vector<std::string> cells{row.prompt_set, row.model_id};
  for (const auto& [scorer, value] : row.alignment_aux) {
    cells.push_back(fixed(value, 4));
  }
  cells.push_back(fixed(row.a_avg, 4));
  for (const auto& [evaluator, value] : row.safety) {
    cells.push_back(fixed(value, 4));
  }
  cells.push_back(fixed(row.s_avg, 4));
  cells.push_back(fixed(row.abss_mean, 4));
  return cells;
}

std::vector<std::string> gamma_header(const GammaSweepRow& first) {
  std::vector<std::string> header{"gamma"};
  for (const auto& [model, score] : first.model_scores) {
    header.push_back(model);
  }
  header.push_back("spearman_rho");
  header.push_back("argmax");
  return header;
}

std::vector<std::string> gamma_cells(const GammaSweepRow& row) {
  std::vector<std::string> cells{fixed(row.gamma, 1)};
  for (const auto& [model, score] : row.model_scores) {
    cells.push_back(fixed(score, 3) + " (" + rank_label(row.ranks.rank_of(model)) + ")");
  }
  cells.push_back(fixed(row.rho, 3));
  cells.push_back(row.is_argmax ? "*" : "");
  return cells;
}

}  // namespace

std::string bypass_table_markdown(
    const std::vector<std::pair<std::string, VerdictMatrix>>& corpora) {
  std::ostringstream out;
  if (corpora.empty()) {
    return out.str();
  }
  const auto header = bypass_header(corpora.front().second);
  markdown_row(out, header);
  markdown_separator(out, header.size());
  for (const auto& [label, matrix] : corpora) {
    markdown_row(out, bypass_cells(label, matrix));
  }
  return out.str();
}

std::string bypass_table_csv(
    const std::vector<std::pair<std::string, VerdictMatrix>>& corpora) {
  std::ostringstream out;
  if (corpora.empty()) {
    return out.str();
  }
  csv_row(out, bypass_header(corpora.front().second));
  for (const auto& [label, matrix] : corpora) {
    csv_row(out, bypass_cells(label, matrix));
  }
  return out.str();
}

std::string eval_table_markdown(const std::vector<EvalTableRow>& rows) {
  std::ostringstream out;
  if (rows.empty()) {
    return out.str();
  }
  const auto header = eval_header(rows.front());
  markdown_row(out, header);
  markdown_separator(out, header.size());
  for (const auto& row : rows) {
    markdown_row(out, eval_cells(row));
  }
  return out.str();
}

std::string eval_table_csv(const std::vector<EvalTableRow>& rows) {
  std::ostringstream out;
  if (rows.empty()) {
    return out.str();
  }
  csv_row(out, eval_header(rows.front()));
  for (const auto& row : rows) {
    csv_row(out, eval_cells(row));
  }
  return out.str();
}

std::string gamma_table_csv(const std::vector<GammaSweepRow>& rows) {
  std::ostringstream out;
  if (rows.empty()) {
    return out.str();
  }
  csv_row(out, gamma_header(rows.front()));
  for (const auto& row : rows) {
    csv_row(out, gamma_cells(row));
  }
  return out.str();
}

std::string gamma_table_markdown(const std::vector<GammaSweepRow>& rows) {
  std::ostringstream out;
  if (rows.empty()) {
    return out.str();
  }
  const auto header = gamma_header(rows.front());
  markdown_row(out, header);
  markdown_separator(out, header.size());
  for (const auto& row : rows) {
    markdown_row(out, gamma_cells(row));
  }
  return out.str();
}

}  // namespace misbind
