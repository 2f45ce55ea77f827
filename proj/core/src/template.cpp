#include "misbind/template.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "misbind/errors.hpp"

namespace misbind {
namespace {

bool is_placeholder_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

}  // namespace

PromptTemplate PromptTemplate::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("template file not found: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str());
}

PromptTemplate PromptTemplate::from_text(std::string text) {
  PromptTemplate result;
  result.text_ = std::move(text);
  return result;
}

std::string PromptTemplate::render(
    const std::map<std::string, std::string>& values) const {
  std::string out;
  out.reserve(text_.size());
  std::size_t i = 0;
  while (i < text_.size()) {
    const char c = text_[i];
    if (c != '{') {
      out.push_back(c);
      ++i;
      continue;
    }
    // "{{" is a literal brace.
    if (i + 1 < text_.size() && text_[i + 1] == '{') {
      out.push_back('{');
      i += 2;
      continue;
    }
    std::size_t end = i + 1;
    while (end < text_.size() && is_placeholder_char(text_[end])) {
      ++end;
    }
    if (end >= text_.size() || text_[end] != '}' || end == i + 1) {
      out.push_back(c);
      ++i;
      continue;
    }
    const std::string name = text_.substr(i + 1, end - i - 1);
    const auto it = values.find(name);
    if (it == values.end()) {
      throw ConfigError("template placeholder '{" + name + "}' has no value");
    }
    out.append(it->second);
    i = end + 1;
  }
  return out;
}

}  // namespace misbind
