#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kgqa {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

/// 16-hex-digit FNV-1a digest of `bytes`.
inline std::string hex_digest(std::string_view bytes) {
  return to_hex(fnv1a64(bytes));
}

}  // namespace kgqa
