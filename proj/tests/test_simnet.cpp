#include <doctest.h>

#include <json.hpp>
#include <set>
#include <string>

#include "luckchain/simnet.hpp"

using namespace luckchain;

namespace {

Scenario base_scenario(int participants, int rounds) {
  Scenario sc;
  sc.seed = 42;
  sc.participants = participants;
  sc.horizon_rounds = rounds;
  return sc;
}

// scheduled splits into exactly these four fates.
void check_conservation(const TraceCounters& c) {
  CHECK(c.scheduled == c.delivered + c.dropped_partition + c.dropped_adversary +
                           c.undelivered_at_end);
}

std::set<Digest32> chain_tx_ids(const Chain& chain) {
  std::set<Digest32> out;
  for (const Block* b : chain.entries()) {
    for (const Transaction& tx : b->transactions) out.insert(tx.tx_id);
  }
  return out;
}

}  // namespace

TEST_SUITE("simnet") {

TEST_CASE("a single node converges with itself") {
  Scenario sc = base_scenario(1, 3);
  RunResult r = run_scenario(sc);

  CHECK(r.trace.converged);
  REQUIRE(r.chains.size() == 1);
  CHECK(r.chains[0].length() >= 3);
  CHECK(valid(r.chains[0], r.registry, r.measurement));

  // No peers: nothing is ever enqueued or delivered, every release is a
  // self-delivery.
  CHECK(r.trace.counters.scheduled == 0);
  CHECK(r.trace.counters.delivered == 0);
  CHECK(r.trace.counters.self_deliveries == r.trace.counters.releases);
  CHECK(r.trace.counters.suppressed_releases == 0);
  check_conservation(r.trace.counters);

  REQUIRE(r.trace.finals.size() == 1);
  CHECK(r.trace.finals[0].chain_length == r.chains[0].length());
  CHECK(r.trace.finals[0].head == r.chains[0].latest_digest());

  REQUIRE(r.trace.rounds.size() == r.chains[0].length());
  for (std::size_t i = 0; i < r.trace.rounds.size(); ++i) {
    const RoundRow& row = r.trace.rounds[i];
    CHECK(row.height == i + 1);
    CHECK(row.winner == 0);
    CHECK(row.winner_luck >= 0.0);
    CHECK(row.winner_luck < 1.0);
    CHECK(row.decided_ms >= 0);
    if (i > 0) {
      CHECK(row.chain_luck > r.trace.rounds[i - 1].chain_luck);
      CHECK(row.decided_ms >= r.trace.rounds[i - 1].decided_ms);
    }
  }
}

TEST_CASE("identical runs replay byte-identically, seeds matter") {
  Scenario sc = base_scenario(4, 5);
  sc.tx_per_round = 1;

  RunResult a = run_scenario(sc);
  RunResult b = run_scenario(sc);
  CHECK(a.trace.digest_hex() == b.trace.digest_hex());
  CHECK(a.trace.event_count() == b.trace.event_count());
  CHECK(a.trace.end_ms == b.trace.end_ms);
  REQUIRE(a.chains.size() == b.chains.size());
  for (std::size_t i = 0; i < a.chains.size(); ++i) {
    CHECK(a.chains[i].latest_digest() == b.chains[i].latest_digest());
  }

  Scenario other = sc;
  other.seed = 43;
  RunResult c = run_scenario(other);
  CHECK(a.trace.digest_hex() != c.trace.digest_hex());
}

TEST_CASE("event lines are well-formed json with nondecreasing timestamps") {
  Scenario sc = base_scenario(5, 4);
  sc.tx_per_round = 2;
  sc.keep_events = true;
  RunResult r = run_scenario(sc);

  const std::set<std::string> vocabulary{
      "join",  "bind",      "mine", "release", "adopt", "reject",
      "skip",  "merge",     "candidate", "broadcast", "deliver", "self",
      "drop",  "split",     "heal", "reveal", "inject"};

  REQUIRE_FALSE(r.trace.events.empty());
  CHECK(r.trace.events.size() == r.trace.event_count());
  std::int64_t last_t = -1;
  std::size_t injects = 0;
  for (const std::string& line : r.trace.events) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    REQUIRE_FALSE(j.is_discarded());
    REQUIRE(j.contains("t"));
    REQUIRE(j.contains("ev"));
    std::int64_t t = j["t"].get<std::int64_t>();
    CHECK(t >= last_t);
    last_t = t;
    CHECK(vocabulary.count(j["ev"].get<std::string>()) == 1);
    if (j["ev"] == "inject") ++injects;
  }
  CHECK(injects == std::size_t(sc.tx_per_round) * std::size_t(sc.horizon_rounds));
}

TEST_CASE("a population converges on a single valid chain") {
  Scenario sc = base_scenario(12, 6);
  sc.tx_per_round = 1;
  RunResult r = run_scenario(sc);

  CHECK(r.trace.converged);
  REQUIRE(r.chains.size() == 12);
  const Digest32 head = r.chains[0].latest_digest();
  for (const Chain& c : r.chains) {
    CHECK(c.latest_digest() == head);
    CHECK(c.length() >= 6);
  }
  CHECK(valid(r.chains[0], r.registry, r.measurement));
  check_conservation(r.trace.counters);
  CHECK(r.trace.counters.delivered > 0);
  CHECK(r.trace.counters.dropped_partition == 0);
  CHECK(r.trace.counters.dropped_adversary == 0);

  // Per-height attribution: each block's winner is the node that released
  // its digest, and its luck matches the block proof.
  for (const RoundRow& row : r.trace.rounds) {
    CHECK(row.winner >= 0);
    CHECK(row.winner < 12);
    const Chain::Node* n = r.chains[0].node_at(row.height - 1);
    REQUIRE(n != nullptr);
    auto it = r.released_by.find(n->digest);
    REQUIRE(it != r.released_by.end());
    CHECK(it->second == row.winner);
    CHECK(row.winner_luck == n->entry.proof.luck_value);
  }

  // Injected transactions settle: the winning chain carries some of them.
  CHECK_FALSE(chain_tx_ids(r.chains[0]).empty());
}

TEST_CASE("header-first accounting undercuts full-wire accounting") {
  Scenario sc = base_scenario(10, 6);
  RunResult r = run_scenario(sc);
  CHECK(r.trace.counters.bytes_header_first < r.trace.counters.bytes_full);
  CHECK(r.trace.counters.bytes_header_first > 0);
}

TEST_CASE("height-triggered partitions isolate groups then heal and converge") {
  Scenario sc = base_scenario(10, 8);
  PartitionSpec p;
  p.groups = {{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}};
  p.start_ms = 1000;
  p.end_ms = -1;
  p.end_when_height = 3;
  sc.partitions = {p};
  RunResult r = run_scenario(sc);

  REQUIRE(r.trace.partitions.size() == 1);
  const PartitionOutcome& out = r.trace.partitions[0];
  CHECK(out.start_ms == 1000);
  CHECK(out.heal_ms > out.start_ms);
  CHECK(out.converged_ms >= out.heal_ms);
  REQUIRE(out.group_head.size() == 2);
  CHECK(out.group_head[0] != out.group_head[1]);
  CHECK(out.group_length[0] >= 3);
  CHECK(out.group_length[1] >= 3);
  REQUIRE(out.winner_group >= 0);
  REQUIRE(out.winner_group < 2);

  // The winner is the luckier head at heal, and the converged chain extends
  // that head.
  int w = out.winner_group;
  CHECK(out.group_luck[w] >= out.group_luck[1 - w]);
  CHECK(r.trace.converged);
  const Chain& final_chain = r.chains[0];
  const Chain::Node* at = final_chain.node_at(out.group_length[w] - 1);
  REQUIRE(at != nullptr);
  CHECK(at->digest == out.group_head[w]);

  CHECK(r.trace.counters.dropped_partition > 0);
  check_conservation(r.trace.counters);
}

TEST_CASE("timed partitions heal exactly at their deadline") {
  Scenario sc = base_scenario(6, 6);
  PartitionSpec p;
  p.groups = {{0, 1, 2}, {3, 4, 5}};
  p.start_ms = 500;
  p.end_ms = 30500;
  p.end_when_height = 0;
  sc.partitions = {p};
  RunResult r = run_scenario(sc);

  REQUIRE(r.trace.partitions.size() == 1);
  CHECK(r.trace.partitions[0].heal_ms == 30500);
  CHECK(r.trace.converged);
  check_conservation(r.trace.counters);
}

TEST_CASE("start offsets stagger the first binds") {
  Scenario sc = base_scenario(4, 3);
  sc.start_offsets_ms = {0, 2500, 5000, 7500};
  sc.latency.base_ms = 50;
  sc.latency.jitter_mean_ms = 0;
  sc.keep_events = true;
  RunResult r = run_scenario(sc);

  std::map<int, std::int64_t> first_bind;
  for (const std::string& line : r.trace.events) {
    nlohmann::json j = nlohmann::json::parse(line);
    if (j["ev"] != "bind") continue;
    int node = j["node"].get<int>();
    if (first_bind.count(node) == 0) first_bind[node] = j["t"].get<std::int64_t>();
  }
  REQUIRE(first_bind.size() == 4);
  CHECK(first_bind[0] == 0);
  CHECK(first_bind[1] == 2500);
  CHECK(first_bind[2] == 5000);
  CHECK(first_bind[3] == 7500);
  CHECK(r.trace.converged);
}

TEST_CASE("superblock scenarios build valid merged chains") {
  Scenario sc = base_scenario(6, 3);
  sc.consensus = ConsensusMode::superblock;
  sc.superblock_m = 3;
  sc.tx_per_round = 1;
  RunResult r = run_scenario(sc);

  CHECK(r.trace.converged);
  REQUIRE(r.super_chains.size() == 6);
  const SuperChain& chain = r.super_chains[0];
  CHECK(chain.length() >= 3);
  CHECK(valid(chain, r.registry, r.measurement));
  for (const SuperChain& c : r.super_chains) {
    CHECK(c.latest_digest() == chain.latest_digest());
  }
  for (const SuperBlock* sb : chain.entries()) {
    CHECK(sb->members.size() == 3);
    CHECK(sb->members.front().proof.luck_value >=
          sb->members.back().proof.luck_value);
  }
  CHECK(r.trace.counters.merges > 0);
  check_conservation(r.trace.counters);

  // Rows attribute each height to the releaser of its luckiest member.
  REQUIRE(r.trace.rounds.size() == chain.length());
  for (const RoundRow& row : r.trace.rounds) {
    CHECK(row.winner >= 0);
    CHECK(row.winner < 6);
    const SuperChain::Node* n = chain.node_at(row.height - 1);
    REQUIRE(n != nullptr);
    CHECK(row.winner_luck == n->entry.members.front().proof.luck_value);
    auto it = r.released_by.find(candidate_digest(n->entry.members.front()));
    REQUIRE(it != r.released_by.end());
    CHECK(it->second == row.winner);
  }
}

TEST_CASE("per-edge latency overrides shape delivery order") {
  Scenario sc = base_scenario(3, 2);
  sc.keep_events = true;
  sc.latency.base_ms = 100;
  sc.latency.jitter_mean_ms = 0;
  sc.latency.edges = {{0, 1, 10}, {0, 2, 4000}};
  RunResult r = run_scenario(sc);

  // Find the first broadcast-originated delivery from node 0 to each peer.
  std::int64_t sent = -1, to1 = -1, to2 = -1;
  for (const std::string& line : r.trace.events) {
    nlohmann::json j = nlohmann::json::parse(line);
    if (j["ev"] == "deliver" && j.contains("from") && j["from"] == 0) {
      if (j["node"] == 1 && to1 < 0) to1 = j["t"].get<std::int64_t>();
      if (j["node"] == 2 && to2 < 0) to2 = j["t"].get<std::int64_t>();
    }
  }
  REQUIRE(to1 >= 0);
  REQUIRE(to2 >= 0);
  CHECK(to2 - to1 >= 3000);
  (void)sent;
  CHECK(r.trace.converged);
}

}  // TEST_SUITE
