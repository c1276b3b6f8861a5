#include "luckchain/superblock.hpp"

#include <algorithm>
#include <map>

#include "luckchain/crypto.hpp"
#include "luckchain/errors.hpp"

namespace luckchain {

std::vector<Transaction> SuperBlock::merged_transactions() const {
  std::map<Digest32, const Transaction*> by_id;
  for (const CandidateBlock& m : members) {
    for (const Transaction& tx : m.transactions) by_id.emplace(tx.tx_id, &tx);
  }
  std::vector<Transaction> out;
  out.reserve(by_id.size());
  for (const auto& [id, tx] : by_id) out.push_back(*tx);
  return out;
}

SuperBlock merge_luckiest(std::vector<CandidateBlock> candidates, std::size_t m,
                          MergeStats* stats) {
  if (m == 0) raise(Err::ConfigError, "merge size must be positive");
  if (candidates.empty()) raise(Err::InsufficientProofs, "no candidates");

  const Digest32 parent = candidates.front().parent;
  for (const CandidateBlock& c : candidates) {
    if (c.parent != parent) raise(Err::Internal, "candidates span parents");
  }

  // Keep the luckiest proof per pseudonym; compromised hardware is thereby
  // limited to one member regardless of how many proofs it emits.
  std::map<Key32, CandidateBlock> by_pseudonym;
  std::size_t dropped = 0;
  for (CandidateBlock& c : candidates) {
    if (!c.proof.attestation.pseudonym) {
      raise(Err::Internal, "candidate without pseudonym");
    }
    const Key32& who = *c.proof.attestation.pseudonym;
    auto it = by_pseudonym.find(who);
    if (it == by_pseudonym.end()) {
      by_pseudonym.emplace(who, std::move(c));
    } else {
      ++dropped;
      if (c.proof.luck_value > it->second.proof.luck_value) {
        it->second = std::move(c);
      }
    }
  }
  if (stats) stats->duplicate_pseudonym_dropped += dropped;

  if (by_pseudonym.size() < m) {
    raise(Err::InsufficientProofs, "fewer distinct pseudonyms than merge size");
  }

  std::vector<CandidateBlock> pool;
  pool.reserve(by_pseudonym.size());
  for (auto& [who, c] : by_pseudonym) pool.push_back(std::move(c));
  std::sort(pool.begin(), pool.end(),
            [](const CandidateBlock& a, const CandidateBlock& b) {
              if (a.proof.luck_value != b.proof.luck_value) {
                return a.proof.luck_value > b.proof.luck_value;
              }
              return *a.proof.attestation.pseudonym <
                     *b.proof.attestation.pseudonym;
            });
  pool.resize(m);

  SuperBlock sb;
  sb.parent = parent;
  sb.members = std::move(pool);
  return sb;
}

double superblock_luck(const SuperBlock& sb) {
  if (sb.members.empty()) raise(Err::Internal, "empty super-block");
  return sb.members.back().proof.luck_value;
}

CandidateCheck check_candidate(const CandidateBlock& c,
                               const tee::VendorRegistry& registry,
                               const Digest32& measurement) {
  if (!valid_transactions(c.transactions)) return {false, "transactions"};
  const tee::Attestation& att = c.proof.attestation;
  if (att.mode != tee::AttestMode::name_base) return {false, "mode"};
  if (!att.basename || *att.basename != to_bytes(c.parent)) {
    return {false, "basename"};
  }
  auto verified = tee::verify_attestation(att, measurement, registry);
  if (!verified.valid) return {false, "attestation"};
  auto data = decode_luck_payload(verified.payload);
  if (!data) return {false, "proof-payload"};
  if (data->first != c.proof.nonce) return {false, "proof-payload"};
  if (std::bit_cast<std::uint64_t>(data->second) !=
      std::bit_cast<std::uint64_t>(c.proof.luck_value)) {
    return {false, "proof-payload"};
  }
  if (!(data->second >= 0.0 && data->second < 1.0)) return {false, "luck-range"};
  BlockHeader header = make_header(c.parent, c.transactions);
  if (header_digest(header) != c.proof.nonce) return {false, "nonce-binding"};
  return {true, ""};
}

SuperBlockCheck check_superblock(const SuperBlock& sb, const Digest32& prev_digest,
                                 const tee::VendorRegistry& registry,
                                 const Digest32& measurement) {
  if (sb.parent != prev_digest) return {false, "parent-link"};
  if (sb.members.empty()) return {false, "members"};
  for (std::size_t i = 0; i < sb.members.size(); ++i) {
    const CandidateBlock& c = sb.members[i];
    if (c.parent != sb.parent) return {false, "member-parent"};
    CandidateCheck chk = check_candidate(c, registry, measurement);
    if (!chk.ok) return {false, chk.what};
    if (i > 0 &&
        !(sb.members[i - 1].proof.luck_value > c.proof.luck_value)) {
      // Strictly descending luck keeps the encoding canonical.
      return {false, "luck-order"};
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (*sb.members[j].proof.attestation.pseudonym ==
          *c.proof.attestation.pseudonym) {
        return {false, "pseudonym-distinct"};
      }
    }
  }
  return {true, ""};
}

bool validate_superblock(const SuperBlock& sb, const tee::VendorRegistry& registry,
                         const Digest32& measurement) {
  return check_superblock(sb, sb.parent, registry, measurement).ok;
}

void encode_candidate(Encoder& enc, const CandidateBlock& c) {
  enc.raw(c.parent);
  enc.u32(static_cast<std::uint32_t>(c.transactions.size()));
  for (const Transaction& tx : c.transactions) encode_transaction(enc, tx);
  encode_attestation(enc, c.proof.attestation);
}

Bytes encode_candidate(const CandidateBlock& c) {
  Encoder enc;
  encode_candidate(enc, c);
  return enc.take();
}

std::optional<CandidateBlock> decode_candidate(Decoder& dec) {
  CandidateBlock c;
  c.parent = dec.fixed<32>();
  std::uint32_t n = dec.u32();
  if (!dec.ok() || n > (1u << 20)) {
    dec.fail();
    return std::nullopt;
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    Bytes payload = dec.bytes(kMaxTxPayload);
    if (!dec.ok()) return std::nullopt;
    c.transactions.push_back(Transaction::make(std::move(payload)));
  }
  auto att = tee::decode_attestation(dec);
  if (!att) return std::nullopt;
  c.proof.attestation = std::move(*att);
  auto data = decode_luck_payload(c.proof.attestation.payload);
  if (!data) {
    dec.fail();
    return std::nullopt;
  }
  c.proof.nonce = data->first;
  c.proof.luck_value = data->second;
  return c;
}

void encode_superblock(Encoder& enc, const SuperBlock& sb) {
  enc.raw(sb.parent);
  enc.u32(static_cast<std::uint32_t>(sb.members.size()));
  for (const CandidateBlock& c : sb.members) encode_candidate(enc, c);
}

std::optional<SuperBlock> decode_superblock(Decoder& dec) {
  SuperBlock sb;
  sb.parent = dec.fixed<32>();
  std::uint32_t n = dec.u32();
  // A memberless super-block has no luck value, so it cannot exist as a
  // chain entry; reject it here rather than letting one materialize.
  if (!dec.ok() || n == 0 || n > (1u << 16)) {
    dec.fail();
    return std::nullopt;
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    auto c = decode_candidate(dec);
    if (!c) return std::nullopt;
    sb.members.push_back(std::move(*c));
  }
  return sb;
}

Digest32 superblock_digest(const SuperBlock& sb) {
  Encoder enc;
  enc.str("luckchain.superblock.v1");
  encode_superblock(enc, sb);
  return Sha256::digest(enc.data());
}

Digest32 candidate_digest(const CandidateBlock& c) {
  Encoder enc;
  enc.str("luckchain.candidate.v1");
  encode_candidate(enc, c);
  return Sha256::digest(enc.data());
}

SuperBlockSizes superblock_sizes(const SuperBlock& sb) {
  SuperBlockSizes out;
  for (const CandidateBlock& m : sb.members) {
    for (const Transaction& tx : m.transactions) {
      out.raw_tx_bytes += tx.payload.size();
    }
  }
  for (const Transaction& tx : sb.merged_transactions()) {
    out.dedup_tx_bytes += tx.payload.size();
  }
  return out;
}

Digest32 entry_digest(const SuperBlock& sb) { return superblock_digest(sb); }
double entry_luck(const SuperBlock& sb) { return superblock_luck(sb); }
std::uint64_t entry_encoded_size(const SuperBlock& sb) {
  Encoder enc;
  encode_superblock(enc, sb);
  return enc.size();
}

double luck(const SuperChain& chain) {
  double total = 0.0;
  for (const SuperBlock* sb : chain.entries()) total += superblock_luck(*sb);
  return total;
}

bool valid(const SuperChain& chain, const tee::VendorRegistry& registry,
           const Digest32& measurement) {
  Digest32 prev = kZeroDigest;
  for (const SuperBlock* sb : chain.entries()) {
    if (!check_superblock(*sb, prev, registry, measurement).ok) return false;
    prev = superblock_digest(*sb);
  }
  return true;
}

Bytes encode_chain(const SuperChain& chain) {
  Encoder enc;
  enc.u32(static_cast<std::uint32_t>(chain.length()));
  for (const SuperBlock* sb : chain.entries()) encode_superblock(enc, *sb);
  return enc.take();
}

std::optional<SuperChain> decode_superchain(std::span<const std::uint8_t> data) {
  Decoder dec(data);
  std::uint32_t n = dec.u32();
  if (!dec.ok() || n > (1u << 24)) return std::nullopt;
  SuperChain chain;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto sb = decode_superblock(dec);
    if (!sb) return std::nullopt;
    chain = chain.append(std::move(*sb));
  }
  if (!dec.finished()) return std::nullopt;
  return chain;
}

}  // namespace luckchain
