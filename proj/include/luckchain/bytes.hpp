#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace luckchain {

using Bytes = std::vector<std::uint8_t>;
using Digest32 = std::array<std::uint8_t, 32>;
using Key32 = std::array<std::uint8_t, 32>;
using Tag64 = std::array<std::uint8_t, 64>;
using CpuId = std::array<std::uint8_t, 16>;

inline constexpr Digest32 kZeroDigest{};

std::string to_hex(const std::uint8_t* data, std::size_t len);

template <std::size_t N>
std::string to_hex(const std::array<std::uint8_t, N>& a) {
  return to_hex(a.data(), a.size());
}

inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

template <std::size_t N>
Bytes to_bytes(const std::array<std::uint8_t, N>& a) {
  return Bytes(a.begin(), a.end());
}

// Digests are uniformly distributed; the first eight bytes are hash enough.
struct DigestHash {
  std::size_t operator()(const Digest32& d) const noexcept {
    std::uint64_t x;
    std::memcpy(&x, d.data(), sizeof(x));
    return static_cast<std::size_t>(x);
  }
};

}  // namespace luckchain
