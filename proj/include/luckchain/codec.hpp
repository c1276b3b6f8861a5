#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

#include "luckchain/bytes.hpp"

namespace luckchain {

// Canonical wire encoding: fixed-width big-endian integers, u32
// length-prefixed byte fields, IEEE-754 bit patterns for doubles.
class Encoder {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }

  void u16(std::uint16_t v) {
    buf_.push_back(std::uint8_t(v >> 8));
    buf_.push_back(std::uint8_t(v));
  }

  void u32(std::uint32_t v) {
    for (int i = 3; i >= 0; --i) buf_.push_back(std::uint8_t(v >> (8 * i)));
  }

  void u64(std::uint64_t v) {
    for (int i = 7; i >= 0; --i) buf_.push_back(std::uint8_t(v >> (8 * i)));
  }

  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  // Length-prefixed variable-size field.
  void bytes(std::span<const std::uint8_t> b) {
    u32(static_cast<std::uint32_t>(b.size()));
    raw(b);
  }

  void bytes(const Bytes& b) { bytes(std::span<const std::uint8_t>(b)); }

  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  // Fixed-size field, no prefix.
  void raw(std::span<const std::uint8_t> b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
  }

  template <std::size_t N>
  void raw(const std::array<std::uint8_t, N>& a) {
    raw(std::span<const std::uint8_t>(a.data(), a.size()));
  }

  const Bytes& data() const { return buf_; }
  Bytes take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  Bytes buf_;
};

// Bounds-checked reader; any overrun latches the failure flag and all
// subsequent reads return zeroes. Callers check ok()/finished() once.
class Decoder {
 public:
  explicit Decoder(std::span<const std::uint8_t> data) : data_(data) {}
  Decoder(const std::uint8_t* p, std::size_t n)
      : data_(std::span<const std::uint8_t>(p, n)) {}

  std::uint8_t u8() {
    if (!need(1)) return 0;
    return data_[pos_++];
  }

  std::uint32_t u32() {
    if (!need(4)) return 0;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }

  std::uint64_t u64() {
    if (!need(8)) return 0;
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }

  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

  double f64() { return std::bit_cast<double>(u64()); }

  Bytes bytes(std::uint32_t max_len = 0xffffffffu) {
    std::uint32_t n = u32();
    if (n > max_len || !need(n)) {
      fail();
      return {};
    }
    Bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    std::array<std::uint8_t, N> out{};
    if (!need(N)) return out;
    std::memcpy(out.data(), data_.data() + pos_, N);
    pos_ += N;
    return out;
  }

  bool ok() const { return ok_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  // True only when every byte was consumed without error; trailing garbage
  // is a decode failure for canonical formats.
  bool finished() const { return ok_ && pos_ == data_.size(); }
  void fail() { ok_ = false; }

 private:
  bool need(std::size_t n) {
    if (!ok_ || data_.size() - pos_ < n) {
      ok_ = false;
      return false;
    }
    return true;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

}  // namespace luckchain
