#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "luckchain/ledger.hpp"
#include "luckchain/primitives.hpp"
#include "luckchain/superblock.hpp"

namespace luckchain {

// Network payloads. Senders are unauthenticated: claimed_sender is advisory
// and never consulted by the protocol.
struct Message {
  enum class Kind : std::uint8_t {
    transaction = 0,
    chain = 1,
    super_chain = 2,
    candidate = 3,
  };

  Kind kind = Kind::transaction;
  Transaction tx;
  Chain chain;
  SuperChain super_chain;
  CandidateBlock candidate;
  std::optional<int> claimed_sender;

  static Message make_tx(Transaction t);
  static Message make_chain(Chain c);
  static Message make_super(SuperChain c);
  static Message make_candidate(CandidateBlock c);

  std::uint64_t wire_bytes() const;
  bool is_chain_kind() const {
    return kind == Kind::chain || kind == Kind::super_chain;
  }
};

// Chain-message header cost under header-first accounting: kind tag, head
// digest, total luck, length.
inline constexpr std::uint64_t kChainHeaderBytes = 1 + 32 + 8 + 8;
// Two header-sized control frames for the fetch round trip.
inline constexpr std::uint64_t kHeaderHandshakeBytes = 2 * kChainHeaderBytes;

// Scheduler-facing surface of a participant. Timers are generation-guarded:
// a fired timer whose generation is stale was cancelled.
class NodePort {
 public:
  virtual ~NodePort() = default;

  virtual std::int64_t now_ms() const = 0;
  virtual void broadcast(const Message& msg) = 0;
  virtual void send_to_self(const Message& msg) = 0;
  virtual void schedule_callback(std::int64_t delay_ms, std::uint64_t gen) = 0;
  virtual void schedule_release(std::int64_t delay_ms, std::uint64_t gen) = 0;
  virtual void schedule_merge(std::int64_t delay_ms, std::uint64_t gen) = 0;

  // Observation hooks; no-ops by default so simple test ports stay small.
  virtual void trace_bind(std::int64_t callback_due_ms) { (void)callback_due_ms; }
  virtual void trace_mine(double luck_value, std::int64_t release_at_ms) {
    (void)luck_value;
    (void)release_at_ms;
  }
  virtual void trace_release(const Digest32& digest, double luck_value) {
    (void)digest;
    (void)luck_value;
  }
  virtual void trace_adopt(std::uint64_t length, double total_luck,
                           const Digest32& head, bool restarted) {
    (void)length;
    (void)total_luck;
    (void)head;
    (void)restarted;
  }
  virtual void trace_reject(const char* why) { (void)why; }
  virtual void trace_skip(const char* err) { (void)err; }
  virtual void trace_merge(std::size_t members, std::uint64_t duplicates_dropped,
                           bool formed) {
    (void)members;
    (void)duplicates_dropped;
    (void)formed;
  }
  virtual void trace_candidate(double luck_value, bool extends_head) {
    (void)luck_value;
    (void)extends_head;
  }
};

// Compromised-TEE behavior: proofs come from the platform's signing oracle
// with a chosen luck value instead of the mining flow.
struct ForgeSpec {
  double forge_l = 0.999999;
  int duplicates = 1;  // forged candidates per round (super-block mode)
};

// Transaction bookkeeping for a chain switch, walking only the branches that
// differ: new-branch transactions leave pending and enter chain_tx_ids,
// old-branch transactions not on the new chain return to pending. txs_of
// extracts the transaction list of a chain entry.
template <class B, class TxsOf>
void apply_chain_switch(const BasicChain<B>& from, const BasicChain<B>& to,
                        std::set<Digest32>& chain_tx_ids,
                        std::map<Digest32, Transaction>& pending,
                        TxsOf&& txs_of) {
  using Node = typename BasicChain<B>::Node;
  const Node* o = from.head().get();
  const Node* n = to.head().get();
  std::vector<const B*> removed;
  std::vector<const B*> added;
  while (o && (!n || o->index > n->index)) {
    removed.push_back(&o->entry);
    o = o->prev.get();
  }
  while (n && (!o || n->index > o->index)) {
    added.push_back(&n->entry);
    n = n->prev.get();
  }
  while (o && n && o != n && o->digest != n->digest) {
    removed.push_back(&o->entry);
    added.push_back(&n->entry);
    o = o->prev.get();
    n = n->prev.get();
  }
  std::vector<Transaction> dropped;
  for (const B* e : removed) {
    for (const Transaction& tx : txs_of(*e)) {
      chain_tx_ids.erase(tx.tx_id);
      dropped.push_back(tx);
    }
  }
  for (const B* e : added) {
    for (const Transaction& tx : txs_of(*e)) {
      chain_tx_ids.insert(tx.tx_id);
      pending.erase(tx.tx_id);
    }
  }
  for (Transaction& tx : dropped) {
    if (chain_tx_ids.count(tx.tx_id) == 0) {
      pending.emplace(tx.tx_id, std::move(tx));
    }
  }
}

// One participant of the base protocol: transaction gossip, luck-ordered
// chain adoption, round timers, and the two-phase mine whose release is
// self-delivered and therefore suppressed by any luckier chain seen first.
class Node {
 public:
  struct Params {
    int id = 0;
    PrimitiveConfig cfg{};
    const tee::VendorRegistry* registry = nullptr;
    Digest32 measurement{};
    bool cache_validation = true;
    std::optional<ForgeSpec> forge;
  };

  Node(const Params& params, tee::TeePlatform& platform,
       const tee::CpuIdentity& cpu);

  void start(NodePort& port);
  void on_transaction(const Transaction& tx, NodePort& port);
  void on_chain(const Chain& incoming, NodePort& port);
  void on_mine_callback(std::uint64_t gen, NodePort& port);
  void on_release(std::uint64_t gen, NodePort& port);

  int id() const { return params_.id; }
  const Chain& chain() const { return chain_; }
  const std::map<Digest32, Transaction>& pending() const { return pending_; }
  std::optional<std::int64_t> callback_due() const { return callback_due_; }
  std::uint64_t callback_gen() const { return callback_gen_; }
  const tee::CpuIdentity& cpu() const { return cpu_; }
  bool mining_in_flight() const { return mining_.has_value(); }

 private:
  struct MiningState {
    MinePending pending;
    Chain base;
    std::vector<Transaction> txs;
    std::uint64_t gen = 0;
  };

  void new_round(NodePort& port);
  void adopt(const Chain& incoming, NodePort& port);
  bool validate(const Chain& incoming, const char** why);
  void forge_step(NodePort& port);

  Params params_;
  tee::TeePlatform& platform_;
  tee::CpuIdentity cpu_;
  tee::EnclaveHandle handle_;

  Chain chain_;
  std::map<Digest32, Transaction> pending_;
  std::set<Digest32> chain_tx_ids_;
  std::map<Digest32, Transaction> drained_;  // mined but not yet settled

  std::optional<Digest32> round_parent_;  // parent of the round block
  std::optional<std::int64_t> callback_due_;
  std::uint64_t callback_gen_ = 0;
  std::uint64_t release_gen_ = 0;
  std::optional<MiningState> mining_;

  std::set<Digest32> validated_;  // chain-spine digests already verified
};

}  // namespace luckchain
