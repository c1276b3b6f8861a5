#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "luckchain/bytes.hpp"
#include "luckchain/codec.hpp"

namespace luckchain::tee {

enum class AttestMode : std::uint8_t { random_base = 0, name_base = 1 };

// Signed statement binding (measurement, payload). In name-base mode it also
// carries a pseudonym that is a deterministic function of (CPU key, basename),
// so proofs from one CPU under one basename are linkable without identifying
// the CPU.
struct Attestation {
  Digest32 measurement{};
  Bytes payload;
  AttestMode mode = AttestMode::random_base;
  std::optional<Bytes> basename;
  std::optional<Key32> pseudonym;
  Tag64 signature{};
};

void encode_attestation(Encoder& enc, const Attestation& att);
std::optional<Attestation> decode_attestation(Decoder& dec);

// Identity snapshot handed back from create_cpu; the signing secret never
// leaves the platform.
struct CpuIdentity {
  CpuId cpu_id{};
  std::uint32_t index = 0;
  std::int64_t clock_offset_ms = 0;
};

// Trusted-vendor view: verification keys for registered CPUs plus a
// revocation list. Standalone so verification works offline.
class VendorRegistry {
 public:
  void add(const CpuId& id, const Key32& verification_key);  // DuplicateCpu
  void revoke(const CpuId& id);                              // UnknownCpu
  bool registered(const CpuId& id) const { return keys_.count(id) != 0; }
  bool revoked(const CpuId& id) const { return revoked_.count(id) != 0; }
  std::size_t size() const { return keys_.size(); }
  const std::map<CpuId, Key32>& keys() const { return keys_; }
  const std::set<CpuId>& revoked_set() const { return revoked_; }

 private:
  std::map<CpuId, Key32> keys_;
  std::set<CpuId> revoked_;
};

struct VerifyResult {
  bool valid = false;
  Bytes payload;  // attested payload, returned only when valid
};

// Accepts iff the signature verifies under some registered, unrevoked CPU key
// with the expected measurement, and (name-base) the pseudonym matches that
// key and basename. Malformed structure yields invalid, never an exception.
VerifyResult verify_attestation(const Attestation& att,
                                const Digest32& expected_measurement,
                                const VendorRegistry& registry);

// Expected cpu id for a verification key; snapshot loaders use this to bind
// registry entries to their keys.
CpuId cpu_id_for_key(const Key32& verification_key);

// Running enclave session. Round state stores the bound block's parent digest
// and bind time, the only round fields the mining checks read.
struct EnclaveHandle {
  CpuId cpu{};
  Digest32 measurement{};
  std::uint64_t counter_at_start = 0;

  struct Round {
    Digest32 parent{};
    std::int64_t time_ms = 0;
  };
  std::optional<Round> round;
};

// Simulation clock shared between the scheduler and the platform; trusted
// time is this clock plus the per-CPU offset.
class SimClock {
 public:
  std::int64_t now_ms() const { return now_; }
  void advance_to(std::int64_t t);
  void advance_by(std::int64_t d) { advance_to(now_ + d); }

 private:
  std::int64_t now_ = 0;
};

class TeePlatform {
 public:
  TeePlatform(std::uint64_t master_seed, std::shared_ptr<const SimClock> clock);

  // Derives the CPU's signing secret from (master_seed, index) and registers
  // its verification key. Duplicate index -> DuplicateCpu.
  CpuIdentity create_cpu(std::uint32_t index, VendorRegistry& registry,
                         std::int64_t clock_offset_ms = 0);

  // Bumps the (cpu, measurement) monotonic counter and opens a session.
  EnclaveHandle start_enclave(const CpuId& cpu, const Digest32& measurement);

  std::uint64_t read_counter(const EnclaveHandle& h) const;
  std::int64_t trusted_time(const EnclaveHandle& h) const;

  // Uniform [0,1) with 53 bits; stream is a pure function of
  // (master_seed, cpu, draw index).
  double random_draw(const EnclaveHandle& h);

  Attestation attest(const EnclaveHandle& h, Bytes payload,
                     std::optional<Bytes> basename) const;

  // Adversary-model compromise: a signing oracle for the CPU's key. The
  // pseudonym is still the PRF of the real key, so linkability survives.
  void mark_compromised(const CpuId& cpu);
  bool is_compromised(const CpuId& cpu) const;
  Attestation forge_attestation(const CpuId& cpu, const Digest32& measurement,
                                Bytes payload,
                                std::optional<Bytes> basename) const;

  std::uint64_t master_seed() const { return master_seed_; }
  const SimClock& clock() const { return *clock_; }

 private:
  struct CpuState {
    Key32 secret{};
    std::uint64_t rng_seed = 0;
    std::uint64_t draw_index = 0;
    std::int64_t clock_offset_ms = 0;
    std::uint32_t index = 0;
    std::map<Digest32, std::uint64_t> counters;  // per measurement
  };

  const CpuState& cpu_state(const CpuId& id) const;
  Attestation sign_attestation(const CpuState& cpu, const Digest32& measurement,
                               Bytes payload,
                               std::optional<Bytes> basename) const;

  std::uint64_t master_seed_;
  Key32 master_key_{};
  std::shared_ptr<const SimClock> clock_;
  std::map<CpuId, CpuState> cpus_;
  std::set<CpuId> compromised_;
};

}  // namespace luckchain::tee
