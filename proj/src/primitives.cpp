#include "luckchain/primitives.hpp"

#include <cmath>

#include "luckchain/crypto.hpp"
#include "luckchain/errors.hpp"

namespace luckchain {

void PrimitiveConfig::validate() const {
  if (round_time_ms <= 0) raise(Err::ConfigError, "round_time_ms must be positive");
  if (max_mine_delay_ms < 0) {
    raise(Err::ConfigError, "max_mine_delay_ms must be non-negative");
  }
  if (max_mine_delay_ms >= round_time_ms) {
    raise(Err::ConfigError, "max_mine_delay_ms must be below round_time_ms");
  }
  if (pot_duration_ms <= 0) raise(Err::ConfigError, "pot_duration_ms must be positive");
  if (pow_zero_bits > 255) raise(Err::ConfigError, "pow_zero_bits out of range");
  if (pow_max_iterations == 0) {
    raise(Err::ConfigError, "pow_max_iterations must be positive");
  }
}

std::int64_t mine_delay(double luck_value, const PrimitiveConfig& cfg) {
  if (!(luck_value >= 0.0 && luck_value < 1.0)) {
    raise(Err::Internal, "luck value outside [0,1)");
  }
  return std::llround((1.0 - luck_value) *
                      static_cast<double>(cfg.max_mine_delay_ms));
}

std::uint32_t leading_zero_bits(const Digest32& d) {
  std::uint32_t bits = 0;
  for (std::uint8_t byte : d) {
    if (byte == 0) {
      bits += 8;
      continue;
    }
    for (int i = 7; i >= 0; --i) {
      if (byte & (1u << i)) return bits;
      ++bits;
    }
  }
  return bits;
}

Bytes encode_pow_payload(const Bytes& nonce, std::uint32_t zero_bits) {
  Encoder enc;
  enc.bytes(nonce);
  enc.u32(zero_bits);
  return enc.take();
}

std::optional<PowResult> tee_pow(tee::TeePlatform& platform,
                                 const tee::EnclaveHandle& handle,
                                 const Bytes& nonce, std::uint32_t zero_bits,
                                 std::uint64_t max_iterations) {
  Encoder base;
  base.str("luckchain.pow.v1");
  base.bytes(nonce);
  for (std::uint64_t i = 0; i < max_iterations; ++i) {
    Encoder attempt;
    attempt.raw(std::span<const std::uint8_t>(base.data()));
    attempt.u64(i);
    Digest32 h = Sha256::digest(attempt.data());
    if (leading_zero_bits(h) >= zero_bits) {
      PowResult out;
      out.evaluations = i + 1;
      out.attestation =
          platform.attest(handle, encode_pow_payload(nonce, zero_bits),
                          std::nullopt);
      return out;
    }
  }
  return std::nullopt;
}

Bytes encode_pot_payload(const Bytes& nonce, std::int64_t duration_ms) {
  Encoder enc;
  enc.bytes(nonce);
  enc.i64(duration_ms);
  return enc.take();
}

PendingTimeProof proof_of_time_begin(tee::TeePlatform& platform,
                                     const tee::EnclaveHandle& handle,
                                     Bytes nonce, std::int64_t duration_ms) {
  if (duration_ms < 0) raise(Err::ConfigError, "negative duration");
  PendingTimeProof pending;
  pending.nonce = std::move(nonce);
  pending.duration_ms = duration_ms;
  pending.started_ms = platform.trusted_time(handle);
  return pending;
}

tee::Attestation proof_of_time_release(tee::TeePlatform& platform,
                                       const tee::EnclaveHandle& handle,
                                       const PendingTimeProof& pending) {
  std::int64_t now = platform.trusted_time(handle);
  if (now < pending.started_ms + pending.duration_ms) {
    raise(Err::TooEarly, "duration not elapsed");
  }
  if (platform.read_counter(handle) != handle.counter_at_start) {
    raise(Err::ConcurrentInvocation, "enclave restarted during wait");
  }
  return platform.attest(handle,
                         encode_pot_payload(pending.nonce, pending.duration_ms),
                         std::nullopt);
}

Bytes encode_poo_payload(const Bytes& nonce) {
  Encoder enc;
  enc.bytes(nonce);
  return enc.take();
}

tee::Attestation proof_of_ownership(tee::TeePlatform& platform,
                                    const tee::EnclaveHandle& handle,
                                    const Bytes& nonce) {
  return platform.attest(handle, encode_poo_payload(nonce), nonce);
}

const Digest32& consensus_measurement() {
  static const Digest32 m = [] {
    Encoder enc;
    enc.str("luckchain.consensus-enclave.v1");
    return Sha256::digest(enc.data());
  }();
  return m;
}

void pol_round(tee::TeePlatform& platform, tee::EnclaveHandle& handle,
               const Digest32& previous_parent) {
  tee::EnclaveHandle::Round round;
  round.parent = previous_parent;
  round.time_ms = platform.trusted_time(handle);
  handle.round = round;
}

void pol_round(tee::TeePlatform& platform, tee::EnclaveHandle& handle,
               const Block* block) {
  pol_round(platform, handle, parent_of(block));
}

MinePending pol_mine_begin(tee::TeePlatform& platform, tee::EnclaveHandle& handle,
                           const BlockHeader& header, const Block* previous_block,
                           const PrimitiveConfig& cfg,
                           std::optional<Bytes> basename) {
  return pol_mine_begin(platform, handle, header, block_digest(previous_block),
                        parent_of(previous_block), cfg, std::move(basename));
}

MinePending pol_mine_begin(tee::TeePlatform& platform, tee::EnclaveHandle& handle,
                           const BlockHeader& header,
                           const Digest32& previous_digest,
                           const Digest32& previous_parent,
                           const PrimitiveConfig& cfg,
                           std::optional<Bytes> basename) {
  if (!handle.round) raise(Err::NoRound, "mine before round");
  if (header.parent != previous_digest) {
    raise(Err::BadLink, "header does not link previous block");
  }
  if (previous_parent != handle.round->parent) {
    raise(Err::WrongParent, "previous block is not in the bound round");
  }
  std::int64_t now = platform.trusted_time(handle);
  if (now < handle.round->time_ms + cfg.round_time_ms) {
    raise(Err::TooEarly, "round time not elapsed");
  }
  handle.round.reset();  // one proof per round

  MinePending pending;
  pending.luck_value = platform.random_draw(handle);
  pending.release_delay_ms = mine_delay(pending.luck_value, cfg);
  pending.release_at_ms = now + pending.release_delay_ms;
  pending.nonce = header_digest(header);
  pending.basename = std::move(basename);
  return pending;
}

LuckProof pol_mine_release(tee::TeePlatform& platform,
                           const tee::EnclaveHandle& handle,
                           const MinePending& pending) {
  if (platform.read_counter(handle) != handle.counter_at_start) {
    raise(Err::ConcurrentInvocation, "enclave restarted during mine wait");
  }
  LuckProof proof;
  proof.nonce = pending.nonce;
  proof.luck_value = pending.luck_value;
  proof.attestation =
      platform.attest(handle, encode_luck_payload(pending.nonce, pending.luck_value),
                      pending.basename);
  return proof;
}

MineResult pol_mine(tee::TeePlatform& platform, tee::EnclaveHandle& handle,
                    const BlockHeader& header, const Block* previous_block,
                    const PrimitiveConfig& cfg, std::optional<Bytes> basename) {
  MinePending pending = pol_mine_begin(platform, handle, header, previous_block,
                                       cfg, std::move(basename));
  MineResult out;
  out.release_delay_ms = pending.release_delay_ms;
  out.proof = pol_mine_release(platform, handle, pending);
  return out;
}

}  // namespace luckchain
