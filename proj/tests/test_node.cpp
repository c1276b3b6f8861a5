#include <doctest.h>

#include <string>
#include <vector>

#include "luckchain/crypto.hpp"
#include "luckchain/errors.hpp"
#include "luckchain/node.hpp"
#include "luckchain/rng.hpp"

using namespace luckchain;
using namespace luckchain::tee;

namespace {

// Captures every scheduler interaction so handler behavior can be asserted
// as a transcript.
struct RecordingPort : NodePort {
  std::shared_ptr<SimClock> clock;
  struct Timer {
    std::int64_t due = 0;
    std::uint64_t gen = 0;
  };
  std::vector<Message> broadcasts;
  std::vector<Message> self;
  std::optional<Timer> callback;
  std::optional<Timer> release;
  std::vector<std::string> events;

  explicit RecordingPort(std::shared_ptr<SimClock> c) : clock(std::move(c)) {}

  std::int64_t now_ms() const override { return clock->now_ms(); }
  void broadcast(const Message& msg) override { broadcasts.push_back(msg); }
  void send_to_self(const Message& msg) override { self.push_back(msg); }
  void schedule_callback(std::int64_t delay_ms, std::uint64_t gen) override {
    callback = Timer{now_ms() + delay_ms, gen};
  }
  void schedule_release(std::int64_t delay_ms, std::uint64_t gen) override {
    release = Timer{now_ms() + delay_ms, gen};
  }
  void schedule_merge(std::int64_t, std::uint64_t) override {}

  void trace_bind(std::int64_t) override { events.push_back("bind"); }
  void trace_mine(double, std::int64_t) override { events.push_back("mine"); }
  void trace_release(const Digest32&, double) override {
    events.push_back("release");
  }
  void trace_adopt(std::uint64_t, double, const Digest32&, bool restarted)
      override {
    events.push_back(restarted ? "adopt+restart" : "adopt");
  }
  void trace_reject(const char* why) override {
    events.push_back(std::string("reject:") + why);
  }
  void trace_skip(const char* err) override {
    events.push_back(std::string("skip:") + err);
  }
};

struct Rig {
  std::shared_ptr<SimClock> clock = std::make_shared<SimClock>();
  TeePlatform platform{77, clock};
  VendorRegistry registry;
  PrimitiveConfig cfg;

  Node::Params params_for(int id) {
    Node::Params p;
    p.id = id;
    p.cfg = cfg;
    p.registry = &registry;
    p.measurement = consensus_measurement();
    return p;
  }

  CpuIdentity cpu(std::uint32_t index) { return platform.create_cpu(index, registry); }

  // Drives one node through callback, release, and self-delivery.
  void run_round(Node& node, RecordingPort& port) {
    REQUIRE(port.callback.has_value());
    clock->advance_to(port.callback->due);
    node.on_mine_callback(port.callback->gen, port);
    REQUIRE(port.release.has_value());
    clock->advance_to(port.release->due);
    node.on_release(port.release->gen, port);
    while (!port.self.empty()) {
      Message msg = port.self.front();
      port.self.erase(port.self.begin());
      node.on_chain(msg.chain, port);
    }
  }

  // A structurally valid block with a chosen luck value, via the platform's
  // compromise oracle; lets tests pit exact luck values against real draws.
  Block forged_block(const CpuIdentity& cpu, const Digest32& parent,
                     std::vector<Transaction> txs, double l) {
    platform.mark_compromised(cpu.cpu_id);
    Block b;
    b.parent = parent;
    b.transactions = std::move(txs);
    b.proof.nonce = header_digest(make_header(parent, b.transactions));
    b.proof.luck_value = l;
    b.proof.attestation = platform.forge_attestation(
        cpu.cpu_id, consensus_measurement(),
        encode_luck_payload(b.proof.nonce, l), std::nullopt);
    return b;
  }
};

Transaction tx_of(std::uint8_t tag) { return Transaction::make(Bytes{tag}); }

}  // namespace

TEST_SUITE("node") {

TEST_CASE("transactions gossip once and never twice") {
  Rig rig;
  RecordingPort port(rig.clock);
  Node node(rig.params_for(0), rig.platform, rig.cpu(0));
  node.start(port);

  Transaction t = tx_of(1);
  node.on_transaction(t, port);
  CHECK(port.broadcasts.size() == 1);
  CHECK(port.broadcasts[0].kind == Message::Kind::transaction);
  CHECK(node.pending().count(t.tx_id) == 1);

  node.on_transaction(t, port);
  CHECK(port.broadcasts.size() == 1);

  Transaction empty;
  node.on_transaction(empty, port);
  Transaction mislabeled = tx_of(2);
  mislabeled.tx_id.fill(0);
  node.on_transaction(mislabeled, port);
  Transaction oversize = Transaction::make(Bytes(kMaxTxPayload + 1, 3));
  node.on_transaction(oversize, port);
  CHECK(port.broadcasts.size() == 1);
  CHECK(node.pending().size() == 1);

  // Once the transaction settles into the chain, redelivery stays silent.
  rig.run_round(node, port);
  REQUIRE(node.chain().length() == 1);
  CHECK(node.pending().empty());
  std::size_t before = port.broadcasts.size();
  node.on_transaction(t, port);
  CHECK(port.broadcasts.size() == before);
}

TEST_CASE("a solo round mines, releases, and adopts its own block") {
  Rig rig;
  RecordingPort port(rig.clock);
  Node node(rig.params_for(0), rig.platform, rig.cpu(0));

  node.start(port);
  CHECK(port.events == std::vector<std::string>{"bind"});
  CHECK(node.callback_due() == rig.cfg.round_time_ms);

  rig.run_round(node, port);
  // Self-adoption restarts the round: the new head no longer extends the
  // parent the round was bound to.
  CHECK(port.events == std::vector<std::string>{"bind", "mine", "release",
                                                "bind", "adopt+restart"});
  CHECK(node.chain().length() == 1);
  CHECK(valid(node.chain(), rig.registry, consensus_measurement()));

  // The adopted chain is gossiped.
  REQUIRE_FALSE(port.broadcasts.empty());
  CHECK(port.broadcasts.back().kind == Message::Kind::chain);
  CHECK(port.broadcasts.back().chain.latest_digest() == node.chain().latest_digest());

  rig.run_round(node, port);
  CHECK(node.chain().length() == 2);
  CHECK(node.chain().latest()->parent == node.chain().node_at(0)->digest);
}

TEST_CASE("luckier sibling adopts without a restart, parent change restarts") {
  Rig rig;
  RecordingPort port(rig.clock);
  Node node(rig.params_for(0), rig.platform, rig.cpu(0));
  CpuIdentity outsider = rig.cpu(9);

  node.start(port);
  rig.run_round(node, port);
  REQUIRE(node.chain().length() == 1);
  double own_luck = node.chain().total_luck();

  // The round is now bound to the head's parent (the zero digest). A luckier
  // sibling on the same parent swaps the head without touching the round.
  Chain sibling;
  sibling = sibling.append(
      rig.forged_block(outsider, kZeroDigest, {tx_of(7)}, 0.9999));
  REQUIRE(sibling.total_luck() > own_luck);

  std::uint64_t gen_before = node.callback_gen();
  auto due_before = node.callback_due();
  node.on_chain(sibling, port);
  CHECK(node.chain().latest_digest() == sibling.latest_digest());
  CHECK(port.events.back() == "adopt");
  CHECK(node.callback_gen() == gen_before);
  CHECK(node.callback_due() == due_before);

  // Extending that head changes the expected parent: adoption restarts.
  Block next = rig.forged_block(outsider, sibling.latest_digest(), {}, 0.9);
  Chain extended = sibling.append(next);
  node.on_chain(extended, port);
  CHECK(node.chain().length() == 2);
  CHECK(port.events.back() == "adopt+restart");
  CHECK(node.callback_gen() == gen_before + 1);
}

TEST_CASE("stale, equal, and invalid chains are rejected by name") {
  Rig rig;
  RecordingPort port(rig.clock);
  Node node(rig.params_for(0), rig.platform, rig.cpu(0));
  node.start(port);
  rig.run_round(node, port);
  rig.run_round(node, port);
  REQUIRE(node.chain().length() == 2);
  const Digest32 head = node.chain().latest_digest();

  // The node's own chain echoed back: equal luck is not strictly greater.
  node.on_chain(node.chain(), port);
  CHECK(port.events.back() == "reject:luck");
  CHECK(node.chain().latest_digest() == head);

  // A luck-gate pass with a bogus proof still dies in validation.
  Block bogus;
  bogus.parent = head;
  bogus.proof.nonce = header_digest(make_header(head, {}));
  bogus.proof.luck_value = 0.99;
  bogus.proof.attestation.payload = encode_luck_payload(bogus.proof.nonce, 0.99);
  Chain tampered = node.chain().append(bogus);
  REQUIRE(tampered.total_luck() > node.chain().total_luck());
  node.on_chain(tampered, port);
  CHECK(port.events.back() == "reject:attestation");
  CHECK(node.chain().latest_digest() == head);

  // Inflating only the mirror luck is caught by the payload comparison.
  CpuIdentity outsider = rig.cpu(9);
  Block forged = rig.forged_block(outsider, head, {}, 0.5);
  forged.proof.luck_value = 0.998877;
  Chain inflated = node.chain().append(forged);
  node.on_chain(inflated, port);
  CHECK(port.events.back() == "reject:proof-payload");
  CHECK(node.chain().latest_digest() == head);
}

TEST_CASE("a luckier chain seen first suppresses the node's own release") {
  Rig rig;
  RecordingPort port(rig.clock);
  Node node(rig.params_for(0), rig.platform, rig.cpu(0));
  CpuIdentity outsider = rig.cpu(9);

  node.start(port);
  rig.clock->advance_to(port.callback->due);
  node.on_mine_callback(port.callback->gen, port);
  REQUIRE(port.release.has_value());
  REQUIRE(node.mining_in_flight());

  // A near-certainly luckier block lands while the release timer runs.
  Chain rival;
  rival = rival.append(rig.forged_block(outsider, kZeroDigest, {}, 0.999999));
  node.on_chain(rival, port);
  CHECK(node.chain().latest_digest() == rival.latest_digest());
  CHECK(node.mining_in_flight());  // the in-flight mine is not torn down

  // The release still fires and self-delivers, but loses the luck gate.
  rig.clock->advance_to(port.release->due);
  node.on_release(port.release->gen, port);
  REQUIRE(port.self.size() == 1);
  node.on_chain(port.self[0].chain, port);
  CHECK(port.events.back() == "reject:luck");
  CHECK(node.chain().latest_digest() == rival.latest_digest());
  CHECK_FALSE(node.mining_in_flight());
}

TEST_CASE("an unlucky rival does not suppress the node's own release") {
  Rig rig;
  RecordingPort port(rig.clock);
  Node node(rig.params_for(0), rig.platform, rig.cpu(0));
  CpuIdentity outsider = rig.cpu(9);

  node.start(port);
  rig.clock->advance_to(port.callback->due);
  node.on_mine_callback(port.callback->gen, port);

  Chain rival;
  rival = rival.append(rig.forged_block(outsider, kZeroDigest, {}, 1e-9));
  node.on_chain(rival, port);
  CHECK(node.chain().latest_digest() == rival.latest_digest());

  rig.clock->advance_to(port.release->due);
  node.on_release(port.release->gen, port);
  REQUIRE(port.self.size() == 1);
  node.on_chain(port.self[0].chain, port);
  // Both blocks extend the same parent, so this is a sibling swap: the
  // round bound after the rival adoption stays live.
  CHECK(port.events.back() == "adopt");
  CHECK(node.chain().length() == 1);
  CHECK(node.chain().latest_digest() != rival.latest_digest());
}

TEST_CASE("cached validation matches the oracle validator") {
  Rig rig;
  Node cached(rig.params_for(0), rig.platform, rig.cpu(0));
  Node::Params plain_params = rig.params_for(1);
  plain_params.cache_validation = false;
  Node plain(plain_params, rig.platform, rig.cpu(1));
  RecordingPort cport(rig.clock);
  RecordingPort pport(rig.clock);
  cached.start(cport);
  plain.start(pport);

  CpuIdentity miner = rig.cpu(9);
  CounterRng rng(derive_seed(4, "node-cache-fuzz"));
  Chain base;
  double next_luck = 0.6;
  for (int step = 0; step < 24; ++step) {
    Block b = rig.forged_block(miner, base.latest_digest(),
                               {tx_of(std::uint8_t(step))}, next_luck);
    Chain grown = base.append(b);

    Chain offered = grown;
    if (rng.next_unit() < 0.4) {
      // Tamper with a random block; both validators must refuse it.
      std::vector<Block> blocks;
      for (const Block* e : grown.entries()) blocks.push_back(*e);
      std::size_t at = std::size_t(rng.next_u64() % blocks.size());
      blocks[at].proof.attestation.payload.push_back(0x5a);
      Chain rebuilt;
      for (Block& blk : blocks) rebuilt = rebuilt.append(blk);
      offered = rebuilt;
    } else {
      base = grown;  // honest growth becomes the next step's base
    }

    cached.on_chain(offered, cport);
    plain.on_chain(offered, pport);
    CHECK(cached.chain().latest_digest() == plain.chain().latest_digest());
    // The plain validator reports a bare "invalid"; compare decisions, not
    // diagnostic names.
    auto decision = [](const std::string& ev) {
      return ev.substr(0, ev.find(':'));
    };
    CHECK(decision(cport.events.back()) == decision(pport.events.back()));
    next_luck += 0.37;
    while (next_luck >= 1.0) next_luck -= 1.0;
    if (next_luck <= 0.0) next_luck = 0.1;
  }
  REQUIRE(cached.chain().length() > 2);

  // Regression: a spine that reuses an already-validated head digest over a
  // tampered interior must fail the linkage walk, not ride the cache.
  std::vector<Block> relinked;
  for (const Block* e : cached.chain().entries()) relinked.push_back(*e);
  relinked[0].proof.attestation.payload.push_back(0x5a);
  Chain franken;
  for (Block& blk : relinked) franken = franken.append(blk);
  CHECK(franken.latest_digest() == cached.chain().latest_digest());
  Digest32 head_before = cached.chain().latest_digest();
  cached.on_chain(franken, cport);
  CHECK(cached.chain().latest_digest() == head_before);
  CHECK(cport.events.back() == "reject:luck");  // same total, gate fires first

  Block heavier = rig.forged_block(miner, relinked.back().parent, {}, 0.99999);
  relinked.back() = heavier;
  Chain franken2;
  for (Block& blk : relinked) franken2 = franken2.append(blk);
  REQUIRE(franken2.total_luck() > cached.chain().total_luck());
  cached.on_chain(franken2, cport);
  CHECK(cached.chain().latest_digest() == head_before);
  CHECK(cport.events.back() == "reject:parent-link");
}

TEST_CASE("a reorg returns abandoned transactions to the pending pool") {
  Rig rig;
  RecordingPort port(rig.clock);
  Node node(rig.params_for(0), rig.platform, rig.cpu(0));
  CpuIdentity outsider = rig.cpu(9);

  node.start(port);
  Transaction keep = tx_of(1);
  node.on_transaction(keep, port);
  rig.run_round(node, port);
  REQUIRE(node.chain().length() == 1);
  REQUIRE(node.chain().latest()->transactions.size() == 1);
  CHECK(node.pending().empty());

  // A luckier disjoint branch that settles a different transaction.
  Transaction other = tx_of(2);
  Chain rival;
  rival = rival.append(rig.forged_block(outsider, kZeroDigest, {other}, 0.9999));
  node.on_chain(rival, port);
  REQUIRE(node.chain().latest_digest() == rival.latest_digest());

  CHECK(node.pending().count(keep.tx_id) == 1);
  CHECK(node.pending().count(other.tx_id) == 0);

  // A further block settling the returned transaction clears it again.
  Block settles = rig.forged_block(outsider, rival.latest_digest(), {keep}, 0.9);
  Chain longer = rival.append(settles);
  node.on_chain(longer, port);
  CHECK(node.pending().empty());

  // Redelivering either transaction stays silent.
  std::size_t before = port.broadcasts.size();
  node.on_transaction(keep, port);
  node.on_transaction(other, port);
  CHECK(port.broadcasts.size() == before);
}

TEST_CASE("chain switches walk only the differing branches") {
  auto mk = [](const Digest32& parent, std::uint8_t tag, double l) {
    Block b;
    b.parent = parent;
    b.transactions = {tx_of(tag)};
    b.proof.nonce = header_digest(make_header(parent, b.transactions));
    b.proof.luck_value = l;
    b.proof.attestation.payload = encode_luck_payload(b.proof.nonce, l);
    return b;
  };
  auto txs_of = [](const Block& b) -> const std::vector<Transaction>& {
    return b.transactions;
  };

  Chain trunk;
  trunk = trunk.append(mk(kZeroDigest, 1, 0.5));
  trunk = trunk.append(mk(trunk.latest_digest(), 2, 0.5));
  Chain left = trunk.append(mk(trunk.latest_digest(), 3, 0.4));
  Chain right = trunk.append(mk(trunk.latest_digest(), 4, 0.6));
  right = right.append(mk(right.latest_digest(), 5, 0.6));

  std::set<Digest32> on_chain;
  std::map<Digest32, Transaction> pending;
  for (const Block* b : left.entries()) {
    for (const Transaction& tx : b->transactions) on_chain.insert(tx.tx_id);
  }
  pending.emplace(tx_of(4).tx_id, tx_of(4));  // about to settle
  pending.emplace(tx_of(9).tx_id, tx_of(9));  // unrelated, must survive

  apply_chain_switch(left, right, on_chain, pending, txs_of);

  // Trunk transactions stay settled; the abandoned branch's return; the new
  // branch's settle and leave pending.
  CHECK(on_chain.count(tx_of(1).tx_id) == 1);
  CHECK(on_chain.count(tx_of(2).tx_id) == 1);
  CHECK(on_chain.count(tx_of(3).tx_id) == 0);
  CHECK(on_chain.count(tx_of(4).tx_id) == 1);
  CHECK(on_chain.count(tx_of(5).tx_id) == 1);
  CHECK(pending.count(tx_of(3).tx_id) == 1);
  CHECK(pending.count(tx_of(4).tx_id) == 0);
  CHECK(pending.count(tx_of(9).tx_id) == 1);

  // Switching between disjoint chains replaces the settled set wholesale.
  std::set<Digest32> ids2;
  std::map<Digest32, Transaction> pending2;
  Chain lone;
  lone = lone.append(mk(kZeroDigest, 8, 0.7));
  for (const Block* b : lone.entries()) {
    for (const Transaction& tx : b->transactions) ids2.insert(tx.tx_id);
  }
  apply_chain_switch(lone, right, ids2, pending2, txs_of);
  CHECK(ids2.count(tx_of(8).tx_id) == 0);
  CHECK(pending2.count(tx_of(8).tx_id) == 1);
  CHECK(ids2.count(tx_of(5).tx_id) == 1);
}

TEST_CASE("a node requires a registry") {
  Rig rig;
  Node::Params params = rig.params_for(0);
  params.registry = nullptr;
  bool config_error = false;
  try {
    Node node(params, rig.platform, rig.cpu(0));
  } catch (const Error& e) {
    config_error = e.kind() == Err::ConfigError;
  }
  CHECK(config_error);
}

}  // TEST_SUITE
