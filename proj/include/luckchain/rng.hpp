#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "luckchain/bytes.hpp"

namespace luckchain {

// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Counter-mode SplitMix64: output i is a pure function of (seed, i), so
// replay and out-of-order derivation are exact.
class CounterRng {
 public:
  CounterRng() = default;
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t at(std::uint64_t i) const {
    return mix64(seed_ + (i + 1) * 0x9e3779b97f4a7c15ULL);
  }

  std::uint64_t next_u64() { return at(ctr_++); }

  // Uniform in [0,1) with 53 significant bits.
  static double to_unit(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
  }

  double next_unit() { return to_unit(next_u64()); }

  double next_exponential(double mean) {
    if (mean <= 0.0) return 0.0;
    return -mean * std::log1p(-next_unit());
  }

  // Uniform integer in [0, n) by rejection-free scaling; n must be > 0.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  std::uint64_t index() const { return ctr_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t ctr_ = 0;
};

// Independent stream seed from a label and up to two ids; SHA-256 based so
// streams cannot collide by arithmetic accident.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace luckchain
