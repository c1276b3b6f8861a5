#pragma once

#include <cstddef>
#include <cstdint>

#include "luckchain/bytes.hpp"

namespace luckchain {

// Incremental SHA-256 (FIPS 180-4).
class Sha256 {
 public:
  Sha256() { reset(); }

  void reset();
  void update(const void* data, std::size_t len);
  void update(const Bytes& b) { update(b.data(), b.size()); }
  Digest32 finish();

  static Digest32 digest(const void* data, std::size_t len) {
    Sha256 h;
    h.update(data, len);
    return h.finish();
  }
  static Digest32 digest(const Bytes& b) { return digest(b.data(), b.size()); }

 private:
  void compress(const std::uint8_t block[64]);

  std::uint32_t state_[8];
  std::uint64_t total_len_ = 0;
  std::uint8_t buf_[64];
  std::size_t buf_len_ = 0;
};

// RFC 2104 HMAC over SHA-256.
Digest32 hmac_sha256(const std::uint8_t* key, std::size_t key_len,
                     const std::uint8_t* msg, std::size_t msg_len);

inline Digest32 hmac_sha256(const Key32& key, const Bytes& msg) {
  return hmac_sha256(key.data(), key.size(), msg.data(), msg.size());
}

// 64-byte keyed tag: two-block HKDF-style expansion of HMAC-SHA256,
// tag = HMAC(key, 0x01 || msg) || HMAC(key, 0x02 || msg).
Tag64 keyed_tag64(const Key32& key, const Bytes& msg);

}  // namespace luckchain
