#pragma once

// Internal JSONL helpers shared by the persistence layer. Not installed.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "misbind/errors.hpp"

namespace misbind::detail {

using OrderedJson = nlohmann::ordered_json;

/// Calls `fn(line_number, object)` for every line. Lines must each hold one
/// JSON object; anything else raises ParseError with the 1-based line number.
inline void for_each_jsonl_object(
    const std::string& path,
    const std::function<void(std::size_t, const OrderedJson&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open for read: " + path);
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    OrderedJson parsed = OrderedJson::parse(line, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
      throw ParseError(path, line_no, "not a JSON object");
    }
    fn(line_no, parsed);
  }
}

/// Writes one compact JSON document per line; returns bytes written.
inline std::size_t write_jsonl(const std::vector<OrderedJson>& rows,
                               const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open for write: " + path);
  }
  std::size_t bytes = 0;
  for (const auto& row : rows) {
    const std::string line = row.dump();
    out << line << '\n';
    bytes += line.size() + 1;
  }
  out.flush();
  if (!out) {
    throw IoError("write failed: " + path);
  }
  return bytes;
}

}  // namespace misbind::detail
