#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "luckchain/bytes.hpp"
#include "luckchain/codec.hpp"
#include "luckchain/tee.hpp"

namespace luckchain {

inline constexpr std::size_t kMaxTxPayload = 64 * 1024;

struct Transaction {
  Digest32 tx_id{};
  Bytes payload;

  static Transaction make(Bytes payload);
};

// Winning lottery ticket for one block: the attested draw plus the header
// digest it binds to. nonce and luck_value mirror the attested payload.
struct LuckProof {
  Digest32 nonce{};
  double luck_value = 0.0;
  tee::Attestation attestation;
};

struct BlockHeader {
  Digest32 parent{};
  Digest32 tx_root{};
};

struct Block {
  Digest32 parent{};
  std::vector<Transaction> transactions;
  LuckProof proof;
};

Digest32 tx_root(std::span<const Transaction> txs);
BlockHeader make_header(const Digest32& parent, std::span<const Transaction> txs);
// Header digest doubles as the proof nonce: hash of (parent, transactions).
Digest32 header_digest(const BlockHeader& h);

Digest32 block_digest(const Block& b);
// Genesis sentinel: the absent block hashes to the zero digest.
Digest32 block_digest(const Block* b);
// Parent digest of a block, with the sentinel's parent defined as zero.
Digest32 parent_of(const Block* b);

void encode_transaction(Encoder& enc, const Transaction& tx);
void encode_block(Encoder& enc, const Block& b);
Bytes encode_block(const Block& b);
std::optional<Block> decode_block(Decoder& dec);

// (nonce, luck) attested payload codec shared by mining and validation.
Bytes encode_luck_payload(const Digest32& nonce, double luck_value);
std::optional<std::pair<Digest32, double>> decode_luck_payload(const Bytes& payload);

// Immutable chain with a structurally shared spine: append is O(1) and keeps
// per-entry cumulative luck (summed in block order), digest, and encoded
// size, so adoption checks on long chains stay cheap.
template <class B>
class BasicChain {
 public:
  struct Node {
    B entry;
    std::shared_ptr<const Node> prev;
    std::uint64_t index = 0;
    double cum_luck = 0.0;
    Digest32 digest{};
    std::uint64_t cum_bytes = 0;
  };

  BasicChain() = default;

  BasicChain append(B entry) const;

  std::size_t length() const { return head_ ? head_->index + 1 : 0; }
  bool empty() const { return !head_; }
  const B* latest() const { return head_ ? &head_->entry : nullptr; }
  Digest32 latest_digest() const { return head_ ? head_->digest : kZeroDigest; }
  double total_luck() const { return head_ ? head_->cum_luck : 0.0; }
  std::uint64_t encoded_size() const { return 4 + (head_ ? head_->cum_bytes : 0); }

  // Earliest to latest.
  std::vector<const B*> entries() const {
    std::vector<const B*> out(length());
    for (const Node* n = head_.get(); n; n = n->prev.get()) out[n->index] = &n->entry;
    return out;
  }

  const Node* node_at(std::uint64_t index) const {
    if (index >= length()) return nullptr;
    const Node* n = head_.get();
    while (n->index != index) n = n->prev.get();
    return n;
  }

  const std::shared_ptr<const Node>& head() const { return head_; }

 private:
  std::shared_ptr<const Node> head_;
};

// Per-entry policies used by the chain spine.
Digest32 entry_digest(const Block& b);
double entry_luck(const Block& b);
std::uint64_t entry_encoded_size(const Block& b);

template <class B>
BasicChain<B> BasicChain<B>::append(B entry) const {
  auto node = std::make_shared<Node>();
  node->cum_luck = total_luck() + entry_luck(entry);
  node->cum_bytes = (head_ ? head_->cum_bytes : 0) + entry_encoded_size(entry);
  node->index = length();
  node->digest = entry_digest(entry);
  node->entry = std::move(entry);
  node->prev = head_;
  BasicChain out;
  out.head_ = std::move(node);
  return out;
}

using Chain = BasicChain<Block>;

// Total luck recomputed from the attested payloads, earliest to latest; the
// oracle form of Chain::total_luck().
double luck(const Chain& chain);

bool valid_transactions(std::span<const Transaction> txs);

struct BlockCheck {
  bool ok = false;
  const char* what = "";  // first failed check, for diagnostics
};

BlockCheck check_block(const Block& b, const Digest32& prev_digest,
                       const tee::VendorRegistry& registry,
                       const Digest32& measurement);

// Full validation, earliest to latest: parent links (genesis parent is the
// zero digest), transaction validity, attestation verification, payload
// consistency, and nonce binding to (parent, transactions).
bool valid(const Chain& chain, const tee::VendorRegistry& registry,
           const Digest32& measurement);

Bytes encode_chain(const Chain& chain);
std::optional<Chain> decode_chain(std::span<const std::uint8_t> data);

struct PrimitiveConfig;

// Drains new_txs into a block on top of chain via a synchronous mine;
// the scheduled-release flow in the simulator uses the two-phase form.
Chain commit(std::span<const Transaction> new_txs, const Chain& chain,
             tee::TeePlatform& platform, tee::EnclaveHandle& handle,
             const PrimitiveConfig& cfg);

}  // namespace luckchain
