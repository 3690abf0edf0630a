#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace samner {

// FNV-1a, used for request fingerprints and artifact/config hashes.
// Stable across platforms; not cryptographic.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 1469598103934665603ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string to_hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

inline std::string content_hash(std::string_view data) { return to_hex16(fnv1a64(data)); }

}  // namespace samner
