#pragma once

#include <string>
#include <string_view>

namespace findrift {

// SHA-256 of the UTF-8 bytes, as 64 lowercase hex chars.
std::string sha256_hex(std::string_view data);

// First 8 bytes of sha256(data), big-endian, as an unsigned 64-bit value.
// Used to derive reproducible PRNG seeds from string identities.
std::uint64_t sha256_prefix_u64(std::string_view data);

}  // namespace findrift
