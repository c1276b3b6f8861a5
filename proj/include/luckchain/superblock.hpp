#pragma once

#include "luckchain/ledger.hpp"

namespace luckchain {

// One participant's per-round block in luckiest-m mode: mined on the shared
// parent with a name-base proof whose basename is the parent digest.
struct CandidateBlock {
  Digest32 parent{};
  std::vector<Transaction> transactions;
  LuckProof proof;
};

// Merge of the m luckiest distinct-pseudonym candidates. Members keep their
// transaction lists so each proof's nonce binding stays verifiable; the
// merged view is derived deterministically.
struct SuperBlock {
  Digest32 parent{};
  std::vector<CandidateBlock> members;  // luck descending, pseudonyms distinct

  // Deduplicated union of member transactions, ordered by tx_id.
  std::vector<Transaction> merged_transactions() const;
};

struct MergeStats {
  std::size_t duplicate_pseudonym_dropped = 0;
};

// Deterministic in the candidate *set*: dedups by pseudonym keeping the
// luckiest, sorts by (luck desc, pseudonym), takes the top m. Throws
// InsufficientProofs when fewer than m distinct pseudonyms remain.
SuperBlock merge_luckiest(std::vector<CandidateBlock> candidates, std::size_t m,
                          MergeStats* stats = nullptr);

// Chain-weight contribution: the m-th (smallest) member luck.
double superblock_luck(const SuperBlock& sb);

struct CandidateCheck {
  bool ok = false;
  const char* what = "";
};

CandidateCheck check_candidate(const CandidateBlock& c,
                               const tee::VendorRegistry& registry,
                               const Digest32& measurement);

struct SuperBlockCheck {
  bool ok = false;
  const char* what = "";
};

// Full structural check against the previous entry's digest: parent linkage,
// every member candidate, strictly descending luck, distinct pseudonyms.
SuperBlockCheck check_superblock(const SuperBlock& sb, const Digest32& prev_digest,
                                 const tee::VendorRegistry& registry,
                                 const Digest32& measurement);

bool validate_superblock(const SuperBlock& sb, const tee::VendorRegistry& registry,
                         const Digest32& measurement);

Digest32 superblock_digest(const SuperBlock& sb);
// Content identity of a candidate including its attestation; candidate
// headers alone can coincide across CPUs mining the same transactions.
Digest32 candidate_digest(const CandidateBlock& c);
void encode_candidate(Encoder& enc, const CandidateBlock& c);
std::optional<CandidateBlock> decode_candidate(Decoder& dec);
Bytes encode_candidate(const CandidateBlock& c);
void encode_superblock(Encoder& enc, const SuperBlock& sb);
std::optional<SuperBlock> decode_superblock(Decoder& dec);

// Raw vs deduplicated transaction byte sizes, for merge accounting.
struct SuperBlockSizes {
  std::uint64_t raw_tx_bytes = 0;
  std::uint64_t dedup_tx_bytes = 0;
};
SuperBlockSizes superblock_sizes(const SuperBlock& sb);

Digest32 entry_digest(const SuperBlock& sb);
double entry_luck(const SuperBlock& sb);
std::uint64_t entry_encoded_size(const SuperBlock& sb);

using SuperChain = BasicChain<SuperBlock>;

double luck(const SuperChain& chain);
bool valid(const SuperChain& chain, const tee::VendorRegistry& registry,
           const Digest32& measurement);
Bytes encode_chain(const SuperChain& chain);
std::optional<SuperChain> decode_superchain(std::span<const std::uint8_t> data);

}  // namespace luckchain
