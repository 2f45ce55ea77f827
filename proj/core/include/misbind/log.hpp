#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace misbind {

/// Structured JSONL logger. Lines carry a monotonic sequence number instead
/// of wall-clock time so identical runs produce identical log bytes.
class JsonlLogger {
 public:
  using Fields = std::vector<std::pair<std::string, std::string>>;

  JsonlLogger() = default;  // null logger, discards everything
  explicit JsonlLogger(const std::filesystem::path& path);

  void log(std::string_view level, std::string_view event, const Fields& fields = {});

  void info(std::string_view event, const Fields& fields = {}) { log("info", event, fields); }
  void warn(std::string_view event, const Fields& fields = {}) { log("warn", event, fields); }

  bool enabled() const { return out_ != nullptr; }

 private:
  std::mutex mutex_;
  std::uint64_t next_seq_ = 0;
  std::unique_ptr<std::ofstream> out_;
};

}  // namespace misbind
