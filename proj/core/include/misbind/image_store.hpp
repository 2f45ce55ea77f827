#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>

#include "misbind/model.hpp"

namespace misbind {

/// Content-addressed blob store under `<root>/images/<sha256>.bin`.
/// Writes are idempotent: equal bytes land at the same address.
class ImageStore {
 public:
  explicit ImageStore(std::filesystem::path root);

  ContentAddress put(std::string_view bytes);
  std::string get(const ContentAddress& address) const;
  bool contains(const ContentAddress& address) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::mutex write_mutex_;
  std::filesystem::path root_;
};

}  // namespace misbind
