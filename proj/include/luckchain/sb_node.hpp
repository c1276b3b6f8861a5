#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "luckchain/node.hpp"
#include "luckchain/superblock.hpp"

namespace luckchain {

// Participant of the luckiest-m variant. Each round it mines one candidate
// on the current head (name-base attestation, basename = head digest) and
// releases it after the luck delay; when the round's release window closes
// it merges the m luckiest distinct-pseudonym candidates it has collected
// into a super-block and self-delivers the extended chain.
class SbNode {
 public:
  struct Params {
    int id = 0;
    PrimitiveConfig cfg{};
    std::size_t merge_m = 3;
    std::int64_t merge_slack_ms = 2000;  // collection grace past max delay
    const tee::VendorRegistry* registry = nullptr;
    Digest32 measurement{};
    bool cache_validation = true;
    std::optional<ForgeSpec> forge;
  };

  SbNode(const Params& params, tee::TeePlatform& platform,
         const tee::CpuIdentity& cpu);

  void start(NodePort& port);
  void on_transaction(const Transaction& tx, NodePort& port);
  void on_super_chain(const SuperChain& incoming, NodePort& port);
  void on_candidate(const CandidateBlock& c, NodePort& port);
  void on_mine_callback(std::uint64_t gen, NodePort& port);
  void on_release(std::uint64_t gen, NodePort& port);
  void on_merge(std::uint64_t gen, NodePort& port);

  int id() const { return params_.id; }
  const SuperChain& chain() const { return chain_; }
  const std::map<Digest32, Transaction>& pending() const { return pending_; }
  std::optional<std::int64_t> callback_due() const { return callback_due_; }
  const tee::CpuIdentity& cpu() const { return cpu_; }

 private:
  struct MiningState {
    MinePending pending;
    Digest32 parent{};
    std::vector<Transaction> txs;
    std::uint64_t gen = 0;
  };

  void new_round(NodePort& port);
  void adopt(const SuperChain& incoming, NodePort& port);
  bool validate(const SuperChain& incoming);
  void schedule_merge_window(NodePort& port);
  void forge_candidates(NodePort& port);

  Params params_;
  tee::TeePlatform& platform_;
  tee::CpuIdentity cpu_;
  tee::EnclaveHandle handle_;

  SuperChain chain_;
  std::map<Digest32, Transaction> pending_;
  std::set<Digest32> chain_tx_ids_;
  std::map<Digest32, Transaction> drained_;

  // Collected candidates keyed by the head digest they extend.
  std::map<Digest32, std::vector<CandidateBlock>> pools_;

  std::optional<Digest32> round_parent_;
  std::optional<std::int64_t> callback_due_;
  std::uint64_t callback_gen_ = 0;
  std::uint64_t release_gen_ = 0;
  std::uint64_t merge_gen_ = 0;
  std::optional<MiningState> mining_;

  std::set<Digest32> validated_;
};

}  // namespace luckchain
