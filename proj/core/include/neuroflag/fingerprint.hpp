#pragma once

#include <cstdint>
#include <string_view>

namespace neuroflag {

/// 64-bit FNV-1a hash, used to fingerprint resolved configurations.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace neuroflag
