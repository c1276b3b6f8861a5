#pragma once

#include <map>
#include <memory>
#include <vector>

#include "luckchain/node.hpp"
#include "luckchain/sb_node.hpp"
#include "luckchain/scenario.hpp"
#include "luckchain/trace.hpp"

namespace luckchain {

// Everything a run leaves behind: the event trace with its aggregates plus
// the final per-node chains for direct inspection.
struct RunResult {
  EventTrace trace;
  std::vector<Chain> chains;             // luck mode
  std::vector<SuperChain> super_chains;  // super-block mode
  std::map<Digest32, int> released_by;   // block/candidate digest -> miner
  tee::VendorRegistry registry;          // for standalone re-verification
  Digest32 measurement{};
};

// Executes the scenario on a single-threaded discrete-event scheduler.
// Identical (scenario, seed) gives an identical trace, byte for byte.
// event_sink, when set, receives each event line as it is recorded.
RunResult run_scenario(const Scenario& scenario, std::ostream* event_sink = nullptr);

}  // namespace luckchain
