#include <doctest.h>

#include <cmath>

#include "luckchain/adversary.hpp"
#include "luckchain/luckstats.hpp"
#include "luckchain/simnet.hpp"

using namespace luckchain;

namespace {

Scenario fork_scenario(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.participants = 3;
  sc.horizon_rounds = 2;
  AdversarySpec adv;
  adv.kind = AdversarySpec::Kind::minority_fork;
  adv.controlled = {2};
  adv.fork_height = 0;
  adv.reveal_height = 1;
  sc.adversaries = {adv};
  return sc;
}

}  // namespace

TEST_SUITE("adversary") {

TEST_CASE("controller routing rules") {
  AdversarySpec spec;
  spec.kind = AdversarySpec::Kind::minority_fork;
  spec.controlled = {2, 3};
  spec.fork_height = 0;
  spec.reveal_height = 2;
  AdversaryController adv(spec);
  CHECK(adv.controls(2));
  CHECK_FALSE(adv.controls(0));
  CHECK(adv.active());

  Message chain_msg = Message::make_chain(Chain{});
  Message tx_msg = Message::make_tx(Transaction::make(Bytes{1}));
  // Chain traffic is cut in both directions across the boundary; intra-group
  // and transaction traffic flows.
  CHECK(adv.blocks(2, 0, chain_msg));
  CHECK(adv.blocks(0, 2, chain_msg));
  CHECK_FALSE(adv.blocks(2, 3, chain_msg));
  CHECK_FALSE(adv.blocks(0, 1, chain_msg));
  CHECK_FALSE(adv.blocks(2, 0, tx_msg));

  // Reveal fires only when both sides reach branch + reveal_height.
  CHECK_FALSE(adv.observe(1, 1));
  CHECK_FALSE(adv.observe(2, 1));
  CHECK(adv.observe(2, 2));
  adv.mark_revealed(1234);
  CHECK(adv.revealed());
  CHECK(adv.reveal_ms() == 1234);
  CHECK_FALSE(adv.blocks(2, 0, chain_msg));
  CHECK_FALSE(adv.observe(3, 3));

  AdversarySpec late = spec;
  late.fork_height = 2;
  AdversaryController deferred(late);
  CHECK_FALSE(deferred.active());
  CHECK_FALSE(deferred.blocks(2, 0, chain_msg));
  CHECK_FALSE(deferred.observe(1, 1));  // below the branch height
  CHECK_FALSE(deferred.observe(2, 2));  // branches here, goal becomes 4
  CHECK(deferred.active());
  CHECK(deferred.branch_height() == 2);
  CHECK(deferred.blocks(2, 0, chain_msg));
  CHECK_FALSE(deferred.observe(4, 3));
  CHECK(deferred.observe(4, 4));

  AdversarySpec w;
  w.kind = AdversarySpec::Kind::withhold_reveal;
  w.controlled = {1};
  w.reveal_height = 3;
  AdversaryController withholder(w);
  // One-way secrecy: own chains stay in, honest chains still arrive.
  CHECK(withholder.blocks(1, 0, chain_msg));
  CHECK_FALSE(withholder.blocks(0, 1, chain_msg));
  CHECK_FALSE(withholder.observe(5, 2));
  CHECK(withholder.observe(0, 3));

  AdversarySpec s;
  s.kind = AdversarySpec::Kind::spoofer;
  s.controlled = {0};
  s.spoof_as = 7;
  AdversaryController spoofer(s);
  CHECK(spoofer.relabel(0) == 7);
  CHECK(spoofer.relabel(1) == std::nullopt);
  CHECK_FALSE(spoofer.blocks(0, 1, chain_msg));
}

TEST_CASE("a one-round minority fork wins at the monte carlo rate") {
  // Success in a (2 honest, 1 isolated) fork over one block is the event
  // {lone draw > max of two draws}; the routing simulation must agree with
  // the direct sampler within combined uncertainty.
  const int runs = 400;
  int wins = 0;
  for (int i = 0; i < runs; ++i) {
    RunResult r = run_scenario(fork_scenario(9000 + std::uint64_t(i)));
    REQUIRE(r.trace.adversaries.size() == 1);
    const AdversaryOutcome& out = r.trace.adversaries[0];
    REQUIRE(out.revealed);
    CHECK(out.success == (out.fork_luck > out.honest_luck));
    if (out.success) ++wins;
  }
  double p_sim = double(wins) / runs;

  PersistenceQuery q;
  q.majority = 2;
  q.minority = 1;
  q.horizon = 1;
  q.trials = 100000;
  q.seed = 17;
  PersistenceResult mc = mc_persistence(q);
  double sigma_sim = std::sqrt(p_sim * (1.0 - p_sim) / runs);
  CHECK(std::abs(p_sim - mc.p_hat) <= 3.0 * sigma_sim + mc.ci_halfwidth);
  CHECK(std::abs(mc.p_hat - 1.0 / 3.0) <= mc.ci_halfwidth);
}

TEST_CASE("fork isolation drops chain traffic and settles after reveal") {
  RunResult r = run_scenario(fork_scenario(77));
  CHECK(r.trace.counters.dropped_adversary > 0);
  CHECK(r.trace.converged);
  CHECK(r.trace.counters.scheduled ==
        r.trace.counters.delivered + r.trace.counters.dropped_partition +
            r.trace.counters.dropped_adversary +
            r.trace.counters.undelivered_at_end);

  // Whoever won the reveal, every node ends on one valid chain.
  const Digest32 head = r.chains[0].latest_digest();
  for (const Chain& c : r.chains) CHECK(c.latest_digest() == head);
  CHECK(valid(r.chains[0], r.registry, r.measurement));
}

TEST_CASE("a withheld lower-luck fork is rejected at reveal") {
  Scenario sc;
  sc.participants = 5;
  sc.horizon_rounds = 4;
  AdversarySpec adv;
  adv.kind = AdversarySpec::Kind::withhold_reveal;
  adv.controlled = {4};
  adv.reveal_height = 2;
  sc.adversaries = {adv};

  // A seed where the withholder kept a private win, diverged, and lost: the
  // revealed fork is strictly less lucky and is rejected everywhere.
  sc.seed = 15;
  RunResult r = run_scenario(sc);
  REQUIRE(r.trace.adversaries.size() == 1);
  const AdversaryOutcome& out = r.trace.adversaries[0];
  REQUIRE(out.revealed);
  CHECK(out.success == (out.fork_luck > out.honest_luck));
  REQUIRE_FALSE(out.success);
  CHECK(out.fork_luck < out.honest_luck);
  CHECK(r.trace.counters.dropped_adversary > 0);
  CHECK(r.trace.converged);
  CHECK(r.chains[0].total_luck() >= out.honest_luck);

  // A withholder that never out-draws the majority just rides the honest
  // chain: at reveal its "fork" is that chain, luck exactly equal, no win.
  sc.seed = 5;
  RunResult tie = run_scenario(sc);
  REQUIRE(tie.trace.adversaries.size() == 1);
  CHECK_FALSE(tie.trace.adversaries[0].success);
  CHECK(tie.trace.adversaries[0].fork_luck ==
        tie.trace.adversaries[0].honest_luck);
}

TEST_CASE("a compromised tee dominates every height in luck mode") {
  Scenario sc;
  sc.seed = 11;
  sc.participants = 4;
  sc.horizon_rounds = 4;
  AdversarySpec adv;
  adv.kind = AdversarySpec::Kind::compromised_tee;
  adv.controlled = {3};
  adv.forge_l = 0.999999;
  sc.adversaries = {adv};
  RunResult r = run_scenario(sc);

  CHECK(r.trace.converged);
  REQUIRE(r.trace.adversaries.size() == 1);
  const AdversaryOutcome& out = r.trace.adversaries[0];
  CHECK(out.success);
  CHECK(out.forged_blocks == r.chains[0].length());
  CHECK(r.trace.counters.forged_proofs >= out.forged_blocks);

  // Every height carries the forged luck and is attributed to the forger.
  for (const RoundRow& row : r.trace.rounds) {
    CHECK(row.winner == 3);
    CHECK(row.winner_luck == 0.999999);
  }
  // Forged attestations verify: the registry cannot tell.
  CHECK(valid(r.chains[0], r.registry, r.measurement));
}

TEST_CASE("honest nodes outpace a non-forging rival every round") {
  // Negative control: the same scenario without the compromise shows the
  // lone node winning only its fair share, never every height.
  Scenario sc;
  sc.seed = 11;
  sc.participants = 4;
  sc.horizon_rounds = 6;
  RunResult r = run_scenario(sc);
  int wins3 = 0;
  for (const RoundRow& row : r.trace.rounds) {
    if (row.winner == 3) ++wins3;
  }
  CHECK(wins3 < int(r.trace.rounds.size()));
}

TEST_CASE("sender relabeling changes nothing about consensus") {
  Scenario plain;
  plain.seed = 21;
  plain.participants = 4;
  plain.horizon_rounds = 4;
  plain.tx_per_round = 1;

  Scenario spoofed = plain;
  AdversarySpec adv;
  adv.kind = AdversarySpec::Kind::spoofer;
  adv.controlled = {1};
  adv.spoof_as = 0;
  spoofed.adversaries = {adv};

  RunResult a = run_scenario(plain);
  RunResult b = run_scenario(spoofed);
  CHECK(b.trace.counters.dropped_adversary == 0);
  CHECK(b.trace.counters.forged_proofs == 0);
  REQUIRE(a.chains.size() == b.chains.size());
  for (std::size_t i = 0; i < a.chains.size(); ++i) {
    CHECK(a.chains[i].latest_digest() == b.chains[i].latest_digest());
  }
  CHECK(a.trace.end_ms == b.trace.end_ms);
}

TEST_CASE("superblock merging caps a flooding forger at one member slot") {
  Scenario sc;
  sc.seed = 31;
  sc.participants = 5;
  sc.horizon_rounds = 3;
  sc.consensus = ConsensusMode::superblock;
  sc.superblock_m = 3;
  AdversarySpec adv;
  adv.kind = AdversarySpec::Kind::compromised_tee;
  adv.controlled = {4};
  adv.forge_l = 0.999999;
  adv.duplicates = 3;
  sc.adversaries = {adv};
  RunResult r = run_scenario(sc);

  CHECK(r.trace.converged);
  REQUIRE_FALSE(r.super_chains.empty());
  const SuperChain& chain = r.super_chains[0];
  CHECK(valid(chain, r.registry, r.measurement));
  CHECK(r.trace.counters.duplicate_pseudonym_dropped > 0);

  for (const SuperBlock* sb : chain.entries()) {
    int forger_members = 0;
    for (const CandidateBlock& m : sb->members) {
      auto it = r.released_by.find(candidate_digest(m));
      if (it != r.released_by.end() && it->second == 4) ++forger_members;
    }
    CHECK(forger_members <= 1);
    // The chain-weight draw (the m-th member) stays an honest draw: the
    // forged 0.999999 can only ever sit at the top slot.
    CHECK(sb->members.back().proof.luck_value != doctest::Approx(0.999999));
  }
}

}  // TEST_SUITE
