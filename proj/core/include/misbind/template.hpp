#pragma once

#include <map>
#include <string>

namespace misbind {

/// UTF-8 text with named {placeholder} slots. Rendering substitutes every
/// slot; a placeholder without a provided value is a ConfigError.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  static PromptTemplate from_file(const std::string& path);
  static PromptTemplate from_text(std::string text);

  std::string render(const std::map<std::string, std::string>& values) const;
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

}  // namespace misbind
