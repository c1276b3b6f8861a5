#include "luckchain/tee.hpp"

#include <cstring>

#include "luckchain/crypto.hpp"
#include "luckchain/errors.hpp"
#include "luckchain/rng.hpp"

namespace luckchain::tee {

namespace {

constexpr std::string_view kAttestLabel = "luckchain.attest.v1";
constexpr std::string_view kPseudonymLabel = "luckchain.pseudonym.v1";
constexpr std::string_view kCpuIdLabel = "luckchain.cpu-id.v1";

Bytes attestation_signing_input(const Digest32& measurement, const Bytes& payload,
                                AttestMode mode,
                                const std::optional<Bytes>& basename,
                                const std::optional<Key32>& pseudonym) {
  Encoder enc;
  enc.str(kAttestLabel);
  enc.raw(measurement);
  enc.bytes(payload);
  enc.u8(static_cast<std::uint8_t>(mode));
  if (mode == AttestMode::name_base) {
    enc.bytes(*basename);
    enc.raw(*pseudonym);
  }
  return enc.take();
}

Key32 pseudonym_for(const Key32& key, const Bytes& basename) {
  Encoder enc;
  enc.str(kPseudonymLabel);
  enc.bytes(basename);
  return hmac_sha256(key, enc.data());
}

bool well_formed(const Attestation& att) {
  switch (att.mode) {
    case AttestMode::random_base:
      return !att.basename && !att.pseudonym;
    case AttestMode::name_base:
      return att.basename.has_value() && att.pseudonym.has_value();
  }
  return false;
}

}  // namespace

void encode_attestation(Encoder& enc, const Attestation& att) {
  enc.raw(att.measurement);
  enc.bytes(att.payload);
  enc.u8(static_cast<std::uint8_t>(att.mode));
  if (att.mode == AttestMode::name_base) {
    enc.bytes(*att.basename);
    enc.raw(*att.pseudonym);
  }
  enc.raw(att.signature);
}

std::optional<Attestation> decode_attestation(Decoder& dec) {
  Attestation att;
  att.measurement = dec.fixed<32>();
  att.payload = dec.bytes();
  std::uint8_t mode = dec.u8();
  if (mode > 1) {
    dec.fail();
    return std::nullopt;
  }
  att.mode = static_cast<AttestMode>(mode);
  if (att.mode == AttestMode::name_base) {
    att.basename = dec.bytes();
    att.pseudonym = dec.fixed<32>();
  }
  att.signature = dec.fixed<64>();
  if (!dec.ok()) return std::nullopt;
  return att;
}

void VendorRegistry::add(const CpuId& id, const Key32& verification_key) {
  if (!keys_.emplace(id, verification_key).second) {
    raise(Err::DuplicateCpu, "cpu already registered: " + to_hex(id));
  }
}

void VendorRegistry::revoke(const CpuId& id) {
  if (keys_.count(id) == 0) {
    raise(Err::UnknownCpu, "revocation of unregistered cpu: " + to_hex(id));
  }
  revoked_.insert(id);
}

VerifyResult verify_attestation(const Attestation& att,
                                const Digest32& expected_measurement,
                                const VendorRegistry& registry) {
  if (!well_formed(att)) return {};
  if (att.measurement != expected_measurement) return {};

  Bytes input = attestation_signing_input(att.measurement, att.payload, att.mode,
                                          att.basename, att.pseudonym);
  for (const auto& [id, key] : registry.keys()) {
    if (registry.revoked(id)) continue;
    if (keyed_tag64(key, input) != att.signature) continue;
    if (att.mode == AttestMode::name_base &&
        pseudonym_for(key, *att.basename) != *att.pseudonym) {
      return {};
    }
    return {true, att.payload};
  }
  return {};
}

CpuId cpu_id_for_key(const Key32& verification_key) {
  Encoder enc;
  enc.str(kCpuIdLabel);
  enc.raw(verification_key);
  Digest32 d = Sha256::digest(enc.data());
  CpuId id;
  std::memcpy(id.data(), d.data(), id.size());
  return id;
}

void SimClock::advance_to(std::int64_t t) {
  if (t < now_) raise(Err::Internal, "clock moved backwards");
  now_ = t;
}

TeePlatform::TeePlatform(std::uint64_t master_seed,
                         std::shared_ptr<const SimClock> clock)
    : master_seed_(master_seed), clock_(std::move(clock)) {
  if (!clock_) raise(Err::ConfigError, "platform requires a clock");
  Encoder enc;
  enc.str("luckchain.master-key.v1");
  enc.u64(master_seed_);
  master_key_ = Sha256::digest(enc.data());
}

CpuIdentity TeePlatform::create_cpu(std::uint32_t index, VendorRegistry& registry,
                                    std::int64_t clock_offset_ms) {
  Encoder enc;
  enc.str("cpu-secret");
  enc.u32(index);
  CpuState st;
  st.secret = hmac_sha256(master_key_, enc.data());
  st.rng_seed = derive_seed(master_seed_, "cpu-rng", index);
  st.clock_offset_ms = clock_offset_ms;
  st.index = index;

  CpuId id = cpu_id_for_key(st.secret);
  registry.add(id, st.secret);  // throws DuplicateCpu on index reuse
  cpus_.emplace(id, std::move(st));
  return CpuIdentity{id, index, clock_offset_ms};
}

const TeePlatform::CpuState& TeePlatform::cpu_state(const CpuId& id) const {
  auto it = cpus_.find(id);
  if (it == cpus_.end()) raise(Err::UnknownCpu, "no such cpu: " + to_hex(id));
  return it->second;
}

EnclaveHandle TeePlatform::start_enclave(const CpuId& cpu,
                                         const Digest32& measurement) {
  auto it = cpus_.find(cpu);
  if (it == cpus_.end()) raise(Err::UnknownCpu, "no such cpu: " + to_hex(cpu));
  std::uint64_t counter = ++it->second.counters[measurement];
  EnclaveHandle h;
  h.cpu = cpu;
  h.measurement = measurement;
  h.counter_at_start = counter;
  return h;
}

std::uint64_t TeePlatform::read_counter(const EnclaveHandle& h) const {
  const CpuState& st = cpu_state(h.cpu);
  auto it = st.counters.find(h.measurement);
  return it == st.counters.end() ? 0 : it->second;
}

std::int64_t TeePlatform::trusted_time(const EnclaveHandle& h) const {
  return clock_->now_ms() + cpu_state(h.cpu).clock_offset_ms;
}

double TeePlatform::random_draw(const EnclaveHandle& h) {
  auto it = cpus_.find(h.cpu);
  if (it == cpus_.end()) raise(Err::UnknownCpu, "no such cpu: " + to_hex(h.cpu));
  CounterRng rng(it->second.rng_seed);
  return CounterRng::to_unit(rng.at(it->second.draw_index++));
}

Attestation TeePlatform::sign_attestation(const CpuState& cpu,
                                          const Digest32& measurement,
                                          Bytes payload,
                                          std::optional<Bytes> basename) const {
  Attestation att;
  att.measurement = measurement;
  att.payload = std::move(payload);
  if (basename) {
    att.mode = AttestMode::name_base;
    att.basename = std::move(*basename);
    att.pseudonym = pseudonym_for(cpu.secret, *att.basename);
  }
  Bytes input = attestation_signing_input(att.measurement, att.payload, att.mode,
                                          att.basename, att.pseudonym);
  att.signature = keyed_tag64(cpu.secret, input);
  return att;
}

Attestation TeePlatform::attest(const EnclaveHandle& h, Bytes payload,
                                std::optional<Bytes> basename) const {
  return sign_attestation(cpu_state(h.cpu), h.measurement, std::move(payload),
                          std::move(basename));
}

void TeePlatform::mark_compromised(const CpuId& cpu) {
  cpu_state(cpu);  // existence check
  compromised_.insert(cpu);
}

bool TeePlatform::is_compromised(const CpuId& cpu) const {
  return compromised_.count(cpu) != 0;
}

Attestation TeePlatform::forge_attestation(const CpuId& cpu,
                                           const Digest32& measurement,
                                           Bytes payload,
                                           std::optional<Bytes> basename) const {
  if (!is_compromised(cpu)) {
    raise(Err::NotCompromised, "forgery refused for cpu " + to_hex(cpu));
  }
  return sign_attestation(cpu_state(cpu), measurement, std::move(payload),
                          std::move(basename));
}

}  // namespace luckchain::tee
