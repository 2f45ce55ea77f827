#include "misbind/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace misbind {
namespace {

std::array<unsigned char, 32> sha256_digest(std::string_view data) {
  std::array<unsigned char, 32> out{};
  unsigned int out_len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) {
    throw std::runtime_error("EVP_MD_CTX_new failed");
  }
  bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
            EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 &&
            EVP_DigestFinal_ex(ctx, out.data(), &out_len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok || out_len != out.size()) {
    throw std::runtime_error("sha256 digest failed");
  }
  return out;
}

constexpr char kHexDigits[] = "0123456789abcdef";

}  // namespace

std::string sha256_hex(std::string_view data) {
  const auto digest = sha256_digest(data);
  std::string hex;
  hex.reserve(digest.size() * 2);
  for (unsigned char byte : digest) {
    hex.push_back(kHexDigits[byte >> 4]);
    hex.push_back(kHexDigits[byte & 0x0f]);
  }
  return hex;
}

std::uint64_t sha256_prefix64(std::string_view data) {
  const auto digest = sha256_digest(data);
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) {
    value = (value << 8) | digest[static_cast<std::size_t>(i)];
  }
  return value;
}

std::string canonical_join(std::initializer_list<std::string_view> fields) {
  std::string joined;
  bool first = true;
  for (std::string_view field : fields) {
    if (!first) {
      joined.push_back('\x1f');
    }
    joined.append(field);
    first = false;
  }
  return joined;
}

std::string content_id(std::string_view prefix, std::string_view canonical) {
  return std::string(prefix) + sha256_hex(canonical).substr(0, 16);
}

}  // namespace misbind
