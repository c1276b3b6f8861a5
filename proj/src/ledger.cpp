#include "luckchain/ledger.hpp"

#include <unordered_set>

#include "luckchain/crypto.hpp"
#include "luckchain/errors.hpp"
#include "luckchain/primitives.hpp"

namespace luckchain {

namespace {
constexpr std::string_view kHeaderLabel = "luckchain.header.v1";
constexpr std::string_view kBlockLabel = "luckchain.block.v1";
constexpr std::string_view kTxRootLabel = "luckchain.tx-root.v1";
}  // namespace

Transaction Transaction::make(Bytes payload) {
  Transaction tx;
  tx.tx_id = Sha256::digest(payload);
  tx.payload = std::move(payload);
  return tx;
}

Digest32 tx_root(std::span<const Transaction> txs) {
  Encoder enc;
  enc.str(kTxRootLabel);
  enc.u32(static_cast<std::uint32_t>(txs.size()));
  for (const Transaction& tx : txs) enc.raw(tx.tx_id);
  return Sha256::digest(enc.data());
}

BlockHeader make_header(const Digest32& parent, std::span<const Transaction> txs) {
  return BlockHeader{parent, tx_root(txs)};
}

Digest32 header_digest(const BlockHeader& h) {
  Encoder enc;
  enc.str(kHeaderLabel);
  enc.raw(h.parent);
  enc.raw(h.tx_root);
  return Sha256::digest(enc.data());
}

Digest32 block_digest(const Block& b) {
  Encoder enc;
  enc.str(kBlockLabel);
  encode_block(enc, b);
  return Sha256::digest(enc.data());
}

Digest32 block_digest(const Block* b) { return b ? block_digest(*b) : kZeroDigest; }

Digest32 parent_of(const Block* b) { return b ? b->parent : kZeroDigest; }

void encode_transaction(Encoder& enc, const Transaction& tx) {
  enc.bytes(tx.payload);
}

void encode_block(Encoder& enc, const Block& b) {
  enc.raw(b.parent);
  enc.u32(static_cast<std::uint32_t>(b.transactions.size()));
  for (const Transaction& tx : b.transactions) encode_transaction(enc, tx);
  encode_attestation(enc, b.proof.attestation);
}

Bytes encode_block(const Block& b) {
  Encoder enc;
  encode_block(enc, b);
  return enc.take();
}

std::optional<Block> decode_block(Decoder& dec) {
  Block b;
  b.parent = dec.fixed<32>();
  std::uint32_t n = dec.u32();
  if (!dec.ok() || n > (1u << 20)) {
    dec.fail();
    return std::nullopt;
  }
  b.transactions.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Bytes payload = dec.bytes(kMaxTxPayload);
    if (!dec.ok()) return std::nullopt;
    b.transactions.push_back(Transaction::make(std::move(payload)));
  }
  auto att = tee::decode_attestation(dec);
  if (!att) return std::nullopt;
  b.proof.attestation = std::move(*att);
  // The denormalized proof fields come from the attested payload itself, so
  // the wire format cannot state one luck value and sign another.
  auto data = decode_luck_payload(b.proof.attestation.payload);
  if (!data) {
    dec.fail();
    return std::nullopt;
  }
  b.proof.nonce = data->first;
  b.proof.luck_value = data->second;
  return b;
}

Bytes encode_luck_payload(const Digest32& nonce, double luck_value) {
  Encoder enc;
  enc.raw(nonce);
  enc.f64(luck_value);
  return enc.take();
}

std::optional<std::pair<Digest32, double>> decode_luck_payload(const Bytes& payload) {
  Decoder dec(payload.data(), payload.size());
  Digest32 nonce = dec.fixed<32>();
  double l = dec.f64();
  if (!dec.finished()) return std::nullopt;
  return std::make_pair(nonce, l);
}

Digest32 entry_digest(const Block& b) { return block_digest(b); }
double entry_luck(const Block& b) { return b.proof.luck_value; }
std::uint64_t entry_encoded_size(const Block& b) { return encode_block(b).size(); }

double luck(const Chain& chain) {
  double total = 0.0;
  for (const Block* b : chain.entries()) {
    auto data = decode_luck_payload(b->proof.attestation.payload);
    if (!data) raise(Err::Internal, "luck over a structurally invalid chain");
    total += data->second;
  }
  return total;
}

bool valid_transactions(std::span<const Transaction> txs) {
  std::unordered_set<Digest32, DigestHash> seen;
  seen.reserve(txs.size());
  for (const Transaction& tx : txs) {
    if (tx.payload.size() > kMaxTxPayload) return false;
    if (tx.tx_id != Sha256::digest(tx.payload)) return false;
    if (!seen.insert(tx.tx_id).second) return false;
  }
  return true;
}

BlockCheck check_block(const Block& b, const Digest32& prev_digest,
                       const tee::VendorRegistry& registry,
                       const Digest32& measurement) {
  if (b.parent != prev_digest) return {false, "parent-link"};
  if (!valid_transactions(b.transactions)) return {false, "transactions"};
  auto verified = verify_attestation(b.proof.attestation, measurement, registry);
  if (!verified.valid) return {false, "attestation"};
  auto data = decode_luck_payload(verified.payload);
  if (!data) return {false, "proof-payload"};
  if (data->first != b.proof.nonce) return {false, "proof-payload"};
  if (std::bit_cast<std::uint64_t>(data->second) !=
      std::bit_cast<std::uint64_t>(b.proof.luck_value)) {
    return {false, "proof-payload"};
  }
  if (!(data->second >= 0.0 && data->second < 1.0)) return {false, "luck-range"};
  BlockHeader header = make_header(b.parent, b.transactions);
  if (header_digest(header) != b.proof.nonce) return {false, "nonce-binding"};
  return {true, ""};
}

bool valid(const Chain& chain, const tee::VendorRegistry& registry,
           const Digest32& measurement) {
  Digest32 prev = kZeroDigest;
  for (const Block* b : chain.entries()) {
    if (!check_block(*b, prev, registry, measurement).ok) return false;
    prev = block_digest(*b);
  }
  return true;
}

Bytes encode_chain(const Chain& chain) {
  Encoder enc;
  enc.u32(static_cast<std::uint32_t>(chain.length()));
  for (const Block* b : chain.entries()) encode_block(enc, *b);
  return enc.take();
}

std::optional<Chain> decode_chain(std::span<const std::uint8_t> data) {
  Decoder dec(data);
  std::uint32_t n = dec.u32();
  if (!dec.ok() || n > (1u << 24)) return std::nullopt;
  Chain chain;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto b = decode_block(dec);
    if (!b) return std::nullopt;
    chain = chain.append(std::move(*b));
  }
  if (!dec.finished()) return std::nullopt;
  return chain;
}

Chain commit(std::span<const Transaction> new_txs, const Chain& chain,
             tee::TeePlatform& platform, tee::EnclaveHandle& handle,
             const PrimitiveConfig& cfg) {
  BlockHeader header = make_header(chain.latest_digest(), new_txs);
  MineResult mined = pol_mine(platform, handle, header, chain.latest(), cfg);
  Block b;
  b.parent = header.parent;
  b.transactions.assign(new_txs.begin(), new_txs.end());
  b.proof = std::move(mined.proof);
  return chain.append(std::move(b));
}

}  // namespace luckchain
