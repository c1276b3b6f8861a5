#include "luckchain/node.hpp"

#include "luckchain/crypto.hpp"
#include "luckchain/errors.hpp"

namespace luckchain {

Message Message::make_tx(Transaction t) {
  Message m;
  m.kind = Kind::transaction;
  m.tx = std::move(t);
  return m;
}

Message Message::make_chain(Chain c) {
  Message m;
  m.kind = Kind::chain;
  m.chain = std::move(c);
  return m;
}

Message Message::make_super(SuperChain c) {
  Message m;
  m.kind = Kind::super_chain;
  m.super_chain = std::move(c);
  return m;
}

Message Message::make_candidate(CandidateBlock c) {
  Message m;
  m.kind = Kind::candidate;
  m.candidate = std::move(c);
  return m;
}

std::uint64_t Message::wire_bytes() const {
  switch (kind) {
    case Kind::transaction:
      return 1 + 4 + tx.payload.size();
    case Kind::chain:
      return 1 + chain.encoded_size();
    case Kind::super_chain:
      return 1 + super_chain.encoded_size();
    case Kind::candidate:
      return 1 + encode_candidate(candidate).size();
  }
  return 0;
}

Node::Node(const Params& params, tee::TeePlatform& platform,
           const tee::CpuIdentity& cpu)
    : params_(params),
      platform_(platform),
      cpu_(cpu),
      handle_(platform.start_enclave(cpu.cpu_id, params.measurement)) {
  if (!params_.registry) raise(Err::ConfigError, "node needs a registry");
}

void Node::start(NodePort& port) { new_round(port); }

void Node::new_round(NodePort& port) {
  pol_round(platform_, handle_, chain_.latest());
  round_parent_ = chain_.empty()
                      ? std::nullopt
                      : std::optional<Digest32>(chain_.latest()->parent);
  ++callback_gen_;
  callback_due_ = port.now_ms() + params_.cfg.round_time_ms;
  port.schedule_callback(params_.cfg.round_time_ms, callback_gen_);
  port.trace_bind(*callback_due_);
}

void Node::on_transaction(const Transaction& tx, NodePort& port) {
  if (tx.payload.empty() || tx.payload.size() > kMaxTxPayload) return;
  if (tx.tx_id != Sha256::digest(tx.payload)) return;
  if (pending_.count(tx.tx_id) != 0 || drained_.count(tx.tx_id) != 0 ||
      chain_tx_ids_.count(tx.tx_id) != 0) {
    return;  // seen before: gossip stops here
  }
  pending_.emplace(tx.tx_id, tx);
  port.broadcast(Message::make_tx(tx));
}

bool Node::validate(const Chain& incoming, const char** why) {
  if (!params_.cache_validation) {
    if (valid(incoming, *params_.registry, params_.measurement)) return true;
    *why = "invalid";
    return false;
  }
  // The cache certifies entry content by digest, not the offered spine:
  // decoded chains can relink cached entries over a tampered interior, so
  // linkage is re-checked on every spine before the cache is consulted.
  for (const Chain::Node* n = incoming.head().get(); n; n = n->prev.get()) {
    const Digest32 prev = n->prev ? n->prev->digest : kZeroDigest;
    if (n->entry.parent != prev) {
      *why = "parent-link";
      return false;
    }
  }
  // Walk back to the deepest unverified entry; a digest in validated_ seals
  // its whole ancestry because each digest covers its parent digest.
  std::vector<const Chain::Node*> todo;
  for (const Chain::Node* n = incoming.head().get();
       n && validated_.count(n->digest) == 0; n = n->prev.get()) {
    todo.push_back(n);
  }
  for (auto it = todo.rbegin(); it != todo.rend(); ++it) {
    const Chain::Node* n = *it;
    Digest32 prev = n->prev ? n->prev->digest : kZeroDigest;
    BlockCheck chk =
        check_block(n->entry, prev, *params_.registry, params_.measurement);
    if (!chk.ok) {
      *why = chk.what;
      return false;
    }
    validated_.insert(n->digest);
  }
  return true;
}

void Node::adopt(const Chain& incoming, NodePort& port) {
  apply_chain_switch(chain_, incoming, chain_tx_ids_, pending_,
                     [](const Block& b) -> const std::vector<Transaction>& {
                       return b.transactions;
                     });
  for (auto& [id, tx] : drained_) {
    if (chain_tx_ids_.count(id) == 0) pending_.emplace(id, tx);
  }
  drained_.clear();

  chain_ = incoming;
  bool restart = !round_parent_ || chain_.latest()->parent != *round_parent_;
  if (restart) new_round(port);
  port.trace_adopt(chain_.length(), chain_.total_luck(), chain_.latest_digest(),
                   restart);
  port.broadcast(Message::make_chain(chain_));
}

void Node::on_chain(const Chain& incoming, NodePort& port) {
  if (incoming.total_luck() <= chain_.total_luck()) {
    port.trace_reject("luck");
    return;
  }
  const char* why = "";
  if (!validate(incoming, &why)) {
    port.trace_reject(why);
    return;
  }
  adopt(incoming, port);
}

void Node::forge_step(NodePort& port) {
  const Digest32 parent = chain_.latest_digest();
  BlockHeader header = make_header(parent, {});
  Digest32 nonce = header_digest(header);
  Block b;
  b.parent = parent;
  b.proof.nonce = nonce;
  b.proof.luck_value = params_.forge->forge_l;
  b.proof.attestation = platform_.forge_attestation(
      cpu_.cpu_id, params_.measurement,
      encode_luck_payload(nonce, params_.forge->forge_l), std::nullopt);
  Chain forged = chain_.append(std::move(b));
  port.trace_release(forged.latest_digest(), params_.forge->forge_l);
  port.send_to_self(Message::make_chain(std::move(forged)));
  // Keep forging on a round cadence even when a forged chain loses.
  ++callback_gen_;
  callback_due_ = port.now_ms() + params_.cfg.round_time_ms;
  port.schedule_callback(params_.cfg.round_time_ms, callback_gen_);
}

void Node::on_mine_callback(std::uint64_t gen, NodePort& port) {
  if (gen != callback_gen_) return;  // cancelled by a later round
  callback_due_.reset();
  if (params_.forge) {
    forge_step(port);
    return;
  }

  std::vector<Transaction> txs;
  txs.reserve(pending_.size());
  for (auto& [id, tx] : pending_) txs.push_back(tx);
  BlockHeader header = make_header(block_digest(chain_.latest()), txs);

  MinePending pending;
  try {
    pending = pol_mine_begin(platform_, handle_, header, chain_.latest(),
                             params_.cfg);
  } catch (const Error& e) {
    port.trace_skip(err_name(e.kind()));
    new_round(port);
    return;
  }
  pending_.clear();
  for (const Transaction& tx : txs) drained_.emplace(tx.tx_id, tx);

  mining_ = MiningState{pending, chain_, std::move(txs), ++release_gen_};
  port.schedule_release(pending.release_delay_ms, release_gen_);
  port.trace_mine(pending.luck_value, pending.release_at_ms);
}

void Node::on_release(std::uint64_t gen, NodePort& port) {
  if (!mining_ || gen != mining_->gen) return;
  MiningState m = std::move(*mining_);
  mining_.reset();

  LuckProof proof;
  try {
    proof = pol_mine_release(platform_, handle_, m.pending);
  } catch (const Error& e) {
    port.trace_skip(err_name(e.kind()));
    return;  // drained_ keeps the transactions until the next adoption
  }

  double luck_value = proof.luck_value;
  Block b;
  b.parent = block_digest(m.base.latest());
  b.transactions = std::move(m.txs);
  b.proof = std::move(proof);
  Chain mined = m.base.append(std::move(b));
  port.trace_release(mined.latest_digest(), luck_value);
  port.send_to_self(Message::make_chain(std::move(mined)));
}

}  // namespace luckchain
