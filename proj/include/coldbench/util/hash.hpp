#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace coldbench {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a. Used for stream names and feature hashing, never for content keys.
std::uint64_t fnv1a64(std::string_view data) noexcept;

}  // namespace coldbench
