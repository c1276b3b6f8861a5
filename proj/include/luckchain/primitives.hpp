#pragma once

#include <optional>

#include "luckchain/ledger.hpp"
#include "luckchain/tee.hpp"

namespace luckchain {

// Round pacing and primitive tuning. round_time is the mandatory wait between
// binding a round and mining; max_mine_delay scales the luck-dependent
// release delay.
struct PrimitiveConfig {
  std::int64_t round_time_ms = 15000;
  std::int64_t max_mine_delay_ms = 10000;
  std::int64_t pot_duration_ms = 1000;
  std::uint32_t pow_zero_bits = 8;
  std::uint64_t pow_max_iterations = 1ull << 24;

  void validate() const;  // throws ConfigError
};

// f(l) = round((1 - l) * max_mine_delay): luckier proofs release earlier.
std::int64_t mine_delay(double luck_value, const PrimitiveConfig& cfg);

// --- proof of work (wrapped in the TEE) ---

struct PowResult {
  tee::Attestation attestation;
  std::uint64_t evaluations = 0;  // hash count, for energy accounting
};

// Deterministic inner preimage search over (nonce, counter); success when the
// digest has at least zero_bits leading zero bits. Exhaustion returns nullopt.
std::optional<PowResult> tee_pow(tee::TeePlatform& platform,
                                 const tee::EnclaveHandle& handle,
                                 const Bytes& nonce, std::uint32_t zero_bits,
                                 std::uint64_t max_iterations);

std::uint32_t leading_zero_bits(const Digest32& d);
Bytes encode_pow_payload(const Bytes& nonce, std::uint32_t zero_bits);

// --- proof of elapsed time ---

struct PendingTimeProof {
  Bytes nonce;
  std::int64_t duration_ms = 0;
  std::int64_t started_ms = 0;
};

PendingTimeProof proof_of_time_begin(tee::TeePlatform& platform,
                                     const tee::EnclaveHandle& handle,
                                     Bytes nonce, std::int64_t duration_ms);

// Release-time checks: duration elapsed (TooEarly) and monotonic counter
// unchanged since enclave start (ConcurrentInvocation).
tee::Attestation proof_of_time_release(tee::TeePlatform& platform,
                                       const tee::EnclaveHandle& handle,
                                       const PendingTimeProof& pending);

// Synchronous form for callers that control the clock; sleep(duration_ms)
// must advance it.
template <class Sleep>
tee::Attestation proof_of_time(tee::TeePlatform& platform,
                               const tee::EnclaveHandle& handle, Bytes nonce,
                               std::int64_t duration_ms, Sleep&& sleep) {
  PendingTimeProof pending =
      proof_of_time_begin(platform, handle, std::move(nonce), duration_ms);
  sleep(duration_ms);
  return proof_of_time_release(platform, handle, pending);
}

Bytes encode_pot_payload(const Bytes& nonce, std::int64_t duration_ms);

// --- proof of ownership ---

// Name-base attestation over the nonce, with the nonce as basename; repeated
// calls on one CPU yield the same pseudonym.
tee::Attestation proof_of_ownership(tee::TeePlatform& platform,
                                    const tee::EnclaveHandle& handle,
                                    const Bytes& nonce);

Bytes encode_poo_payload(const Bytes& nonce);

// Measurement of the consensus enclave program; every consensus attestation
// in a simulation verifies against this identity.
const Digest32& consensus_measurement();

// --- proof of luck ---

// Binds the round to block's parent (nullptr = genesis sentinel, parent is
// the zero digest) and records the bind time.
void pol_round(tee::TeePlatform& platform, tee::EnclaveHandle& handle,
               const Block* block);

// Digest form for chains whose entries are not Blocks: previous_parent is the
// parent digest of the entry the round binds to (zero for the empty chain).
void pol_round(tee::TeePlatform& platform, tee::EnclaveHandle& handle,
               const Digest32& previous_parent);

struct MinePending {
  Digest32 nonce{};
  double luck_value = 0.0;
  std::int64_t release_delay_ms = 0;
  std::int64_t release_at_ms = 0;
  std::optional<Bytes> basename;
};

// Validates round state, links and timing, then consumes the round and draws
// l. The release (counter recheck + attestation) happens at
// now + release_delay; the simulator schedules it, tests may call it
// immediately. Errors: NoRound, BadLink, WrongParent, TooEarly.
MinePending pol_mine_begin(tee::TeePlatform& platform, tee::EnclaveHandle& handle,
                           const BlockHeader& header, const Block* previous_block,
                           const PrimitiveConfig& cfg,
                           std::optional<Bytes> basename = std::nullopt);

// Digest form: previous_digest/previous_parent describe the chain head the
// header must extend (zero digests for the empty chain).
MinePending pol_mine_begin(tee::TeePlatform& platform, tee::EnclaveHandle& handle,
                           const BlockHeader& header,
                           const Digest32& previous_digest,
                           const Digest32& previous_parent,
                           const PrimitiveConfig& cfg,
                           std::optional<Bytes> basename = std::nullopt);

// Error: ConcurrentInvocation if the (cpu, measurement) counter moved since
// enclave start.
LuckProof pol_mine_release(tee::TeePlatform& platform,
                           const tee::EnclaveHandle& handle,
                           const MinePending& pending);

struct MineResult {
  LuckProof proof;
  std::int64_t release_delay_ms = 0;
};

// begin + immediate release; the uninterrupted synchronous composition.
MineResult pol_mine(tee::TeePlatform& platform, tee::EnclaveHandle& handle,
                    const BlockHeader& header, const Block* previous_block,
                    const PrimitiveConfig& cfg,
                    std::optional<Bytes> basename = std::nullopt);

}  // namespace luckchain
