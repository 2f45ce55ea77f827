#include "misbind/image_store.hpp"

#include <fstream>
#include <sstream>

#include "misbind/errors.hpp"
#include "misbind/hash.hpp"

namespace misbind {

ImageStore::ImageStore(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_ / "images", ec);
  if (ec) {
    throw IoError("cannot create image store at " + root_.string());
  }
}

ContentAddress ImageStore::put(std::string_view bytes) {
  ContentAddress address;
  address.sha256 = sha256_hex(bytes);
  address.path = "images/" + address.sha256 + ".bin";
  const auto full = root_ / address.path;
  std::lock_guard lock(write_mutex_);
  if (std::filesystem::exists(full)) {
    return address;
  }
  std::ofstream out(full, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write image: " + full.string());
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) {
    throw IoError("image write failed: " + full.string());
  }
  return address;
}

std::string ImageStore::get(const ContentAddress& address) const {
  std::ifstream in(root_ / address.path, std::ios::binary);
  if (!in) {
    throw IoError("image not found: " + address.path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool ImageStore::contains(const ContentAddress& address) const {
  return std::filesystem::exists(root_ / address.path);
}

}  // namespace misbind
