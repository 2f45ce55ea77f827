#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace misbind {

/// SHA-256 digest of `data`, lowercase hex (64 chars).
std::string sha256_hex(std::string_view data);

/// First 8 digest bytes of sha256(data), big-endian. Seeds every mock backend.
std::uint64_t sha256_prefix64(std::string_view data);

/// Joins fields with the 0x1f unit separator. Field order is significant;
/// callers use this as the canonical pre-image for ids and mock outputs.
std::string canonical_join(std::initializer_list<std::string_view> fields);

/// Content-derived record id: `prefix` + first 16 hex chars of the digest.
std::string content_id(std::string_view prefix, std::string_view canonical);

}  // namespace misbind
