#include "luckchain/sb_node.hpp"

#include "luckchain/crypto.hpp"

#include "luckchain/errors.hpp"

namespace luckchain {

SbNode::SbNode(const Params& params, tee::TeePlatform& platform,
               const tee::CpuIdentity& cpu)
    : params_(params),
      platform_(platform),
      cpu_(cpu),
      handle_(platform.start_enclave(cpu.cpu_id, params.measurement)) {
  if (!params_.registry) raise(Err::ConfigError, "node needs a registry");
  if (params_.merge_m == 0) raise(Err::ConfigError, "merge size must be positive");
}

void SbNode::start(NodePort& port) { new_round(port); }

void SbNode::new_round(NodePort& port) {
  pol_round(platform_, handle_,
            chain_.empty() ? kZeroDigest : chain_.latest()->parent);
  round_parent_ = chain_.empty()
                      ? std::nullopt
                      : std::optional<Digest32>(chain_.latest()->parent);
  ++callback_gen_;
  ++merge_gen_;  // a merge window for the abandoned round must not fire
  callback_due_ = port.now_ms() + params_.cfg.round_time_ms;
  port.schedule_callback(params_.cfg.round_time_ms, callback_gen_);
  port.trace_bind(*callback_due_);
}

void SbNode::on_transaction(const Transaction& tx, NodePort& port) {
  if (tx.payload.empty() || tx.payload.size() > kMaxTxPayload) return;
  if (tx.tx_id != Sha256::digest(tx.payload)) return;
  if (pending_.count(tx.tx_id) != 0 || drained_.count(tx.tx_id) != 0 ||
      chain_tx_ids_.count(tx.tx_id) != 0) {
    return;  // seen before: gossip stops here
  }
  pending_.emplace(tx.tx_id, tx);
  port.broadcast(Message::make_tx(tx));
}

bool SbNode::validate(const SuperChain& incoming) {
  if (!params_.cache_validation) {
    return valid(incoming, *params_.registry, params_.measurement);
  }
  // The cache certifies entry content by digest, not the offered spine:
  // decoded chains can relink cached entries over a tampered interior, so
  // linkage is re-checked on every spine before the cache is consulted.
  for (const SuperChain::Node* n = incoming.head().get(); n; n = n->prev.get()) {
    const Digest32 prev = n->prev ? n->prev->digest : kZeroDigest;
    if (n->entry.parent != prev) return false;
  }
  std::vector<const SuperChain::Node*> todo;
  for (const SuperChain::Node* n = incoming.head().get();
       n && validated_.count(n->digest) == 0; n = n->prev.get()) {
    todo.push_back(n);
  }
  for (auto it = todo.rbegin(); it != todo.rend(); ++it) {
    const SuperChain::Node* n = *it;
    Digest32 prev = n->prev ? n->prev->digest : kZeroDigest;
    if (n->entry.parent != prev) return false;
    if (!validate_superblock(n->entry, *params_.registry, params_.measurement)) {
      return false;
    }
    validated_.insert(n->digest);
  }
  return true;
}

void SbNode::adopt(const SuperChain& incoming, NodePort& port) {
  apply_chain_switch(chain_, incoming, chain_tx_ids_, pending_,
                     [](const SuperBlock& sb) { return sb.merged_transactions(); });
  for (auto& [id, tx] : drained_) {
    if (chain_tx_ids_.count(id) == 0) pending_.emplace(id, tx);
  }
  drained_.clear();

  chain_ = incoming;
  // Candidates for other heads are dead weight once a head is adopted; only
  // the pool the next merge window reads survives.
  const Digest32 head = chain_.latest_digest();
  for (auto it = pools_.begin(); it != pools_.end();) {
    it = it->first == head ? std::next(it) : pools_.erase(it);
  }

  bool restart = !round_parent_ || chain_.latest()->parent != *round_parent_;
  if (restart) new_round(port);
  port.trace_adopt(chain_.length(), chain_.total_luck(), head, restart);
  port.broadcast(Message::make_super(chain_));
}

void SbNode::on_super_chain(const SuperChain& incoming, NodePort& port) {
  if (incoming.total_luck() <= chain_.total_luck()) {
    port.trace_reject("luck");
    return;
  }
  if (!validate(incoming)) {
    port.trace_reject("invalid");
    return;
  }
  adopt(incoming, port);
}

void SbNode::on_candidate(const CandidateBlock& c, NodePort& port) {
  CandidateCheck chk = check_candidate(c, *params_.registry, params_.measurement);
  if (!chk.ok) {
    port.trace_reject(chk.what);
    return;
  }
  port.trace_candidate(c.proof.luck_value, c.parent == chain_.latest_digest());
  pools_[c.parent].push_back(c);
}

void SbNode::forge_candidates(NodePort& port) {
  const Digest32 parent = chain_.latest_digest();
  BlockHeader header = make_header(parent, {});
  Digest32 nonce = header_digest(header);
  for (int i = 0; i < params_.forge->duplicates; ++i) {
    // Same basename, so every emission maps to one pseudonym; the merge
    // keeps only the luckiest of them.
    double l = params_.forge->forge_l - 1e-6 * i;
    CandidateBlock c;
    c.parent = parent;
    c.proof.nonce = nonce;
    c.proof.luck_value = l;
    c.proof.attestation =
        platform_.forge_attestation(cpu_.cpu_id, params_.measurement,
                                    encode_luck_payload(nonce, l),
                                    to_bytes(parent));
    port.trace_release(candidate_digest(c), l);
    port.broadcast(Message::make_candidate(c));
  }
  ++callback_gen_;
  callback_due_ = port.now_ms() + params_.cfg.round_time_ms;
  port.schedule_callback(params_.cfg.round_time_ms, callback_gen_);
}

void SbNode::on_mine_callback(std::uint64_t gen, NodePort& port) {
  if (gen != callback_gen_) return;  // cancelled by a later round
  callback_due_.reset();
  if (params_.forge) {
    forge_candidates(port);
    return;
  }

  std::vector<Transaction> txs;
  txs.reserve(pending_.size());
  for (auto& [id, tx] : pending_) txs.push_back(tx);
  const Digest32 parent = chain_.latest_digest();
  const Digest32 parent_of_head =
      chain_.empty() ? kZeroDigest : chain_.latest()->parent;
  BlockHeader header = make_header(parent, txs);

  MinePending pending;
  try {
    pending = pol_mine_begin(platform_, handle_, header, parent, parent_of_head,
                             params_.cfg, to_bytes(parent));
  } catch (const Error& e) {
    port.trace_skip(err_name(e.kind()));
    new_round(port);
    return;
  }
  pending_.clear();
  for (const Transaction& tx : txs) drained_.emplace(tx.tx_id, tx);

  mining_ = MiningState{pending, parent, std::move(txs), ++release_gen_};
  port.schedule_release(pending.release_delay_ms, release_gen_);
  port.trace_mine(pending.luck_value, pending.release_at_ms);

  // The merge window closes once every peer's release delay could have
  // elapsed, plus slack for delivery.
  ++merge_gen_;
  port.schedule_merge(params_.cfg.max_mine_delay_ms + params_.merge_slack_ms,
                      merge_gen_);
}

void SbNode::on_release(std::uint64_t gen, NodePort& port) {
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
  CandidateBlock c;
  c.parent = m.parent;
  c.transactions = std::move(m.txs);
  c.proof = std::move(proof);
  port.trace_release(candidate_digest(c), luck_value);
  port.broadcast(Message::make_candidate(c));
  pools_[c.parent].push_back(std::move(c));
}

void SbNode::on_merge(std::uint64_t gen, NodePort& port) {
  if (gen != merge_gen_) return;
  const Digest32 head = chain_.latest_digest();
  auto it = pools_.find(head);
  std::vector<CandidateBlock> pool =
      it == pools_.end() ? std::vector<CandidateBlock>{} : it->second;

  const std::size_t collected = pool.size();
  MergeStats stats;
  SuperBlock sb;
  try {
    sb = merge_luckiest(std::move(pool), params_.merge_m, &stats);
  } catch (const Error& e) {
    (void)e;
    port.trace_merge(collected, stats.duplicate_pseudonym_dropped, false);
    new_round(port);  // keep the pool and retry with the next round's proofs
    return;
  }
  port.trace_merge(sb.members.size(), stats.duplicate_pseudonym_dropped, true);
  SuperChain extended = chain_.append(std::move(sb));
  port.send_to_self(Message::make_super(std::move(extended)));
}

}  // namespace luckchain
