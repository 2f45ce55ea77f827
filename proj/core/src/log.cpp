#include "misbind/log.hpp"

#include <nlohmann/json.hpp>

#include "misbind/errors.hpp"

namespace misbind {

JsonlLogger::JsonlLogger(const std::filesystem::path& path) {
  out_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
  if (!*out_) {
    throw IoError("cannot open log file: " + path.string());
  }
}

void JsonlLogger::log(std::string_view level, std::string_view event,
                      const Fields& fields) {
  if (out_ == nullptr) {
    return;
  }
  std::lock_guard lock(mutex_);
  nlohmann::ordered_json line;
  line["seq"] = next_seq_++;
  line["level"] = level;
  line["event"] = event;
  for (const auto& [key, value] : fields) {
    line[key] = value;
  }
  *out_ << line.dump() << '\n';
  out_->flush();
}

}  // namespace misbind
