#pragma once

#include <optional>
#include <string>
#include <vector>

#include "luckchain/primitives.hpp"

namespace luckchain {

// Attacker behaviors the simulator can host. Controlled ids index into the
// participant range.
struct AdversarySpec {
  enum class Kind {
    minority_fork,     // isolate controlled group, reveal fork at height
    withhold_reveal,   // suppress own chains until own height, then release
    spoofer,           // relabel claimed_sender on outgoing messages
    compromised_tee,   // forge luck proofs via the platform signing oracle
  };

  Kind kind = Kind::minority_fork;
  std::vector<int> controlled;
  int fork_height = 0;         // chain height at which the private fork begins
  int reveal_height = 1;       // fork blocks beyond branch point before reveal
  double forge_l = 0.999999;
  int duplicates = 1;          // forged candidates per round (super-block mode)
  std::optional<int> spoof_as;
};

const char* adversary_kind_name(AdversarySpec::Kind kind);
std::optional<AdversarySpec::Kind> adversary_kind_from(const std::string& name);

struct EdgeLatency {
  int from = 0;
  int to = 0;
  std::int64_t base_ms = 0;
};

// Complete-graph delivery delays: per-message latency = base + Exp(jitter),
// with directed per-edge base overrides.
struct LatencySpec {
  std::int64_t base_ms = 100;
  std::int64_t jitter_mean_ms = 150;
  std::vector<EdgeLatency> edges;
};

// Cross-group messages are dropped while the partition is active. The split
// ends at end_ms, or when every group's best chain has grown end_when_height
// entries past the height at start (end_ms = -1 selects the height trigger).
struct PartitionSpec {
  std::vector<std::vector<int>> groups;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = -1;
  int end_when_height = 0;
};

struct OutputSpec {
  std::string trace;    // JSON-lines event log
  std::string summary;  // per-round CSV
  std::string chain;    // final chain snapshot
};

enum class ConsensusMode { luck, superblock };

// One reproducible simulation: population, pacing, network shape, faults.
// Everything an identical run needs is in here plus the seed.
struct Scenario {
  int schema_version = 1;
  std::uint64_t seed = 1;
  int participants = 1;
  int horizon_rounds = 1;
  ConsensusMode consensus = ConsensusMode::luck;
  int superblock_m = 3;
  std::int64_t round_time_ms = 15000;
  std::int64_t max_mine_delay_ms = 10000;
  std::int64_t merge_slack_ms = 2000;
  int tx_per_round = 0;
  bool header_first = false;
  bool keep_events = false;
  std::vector<std::int64_t> start_offsets_ms;  // empty = all zero
  std::vector<std::int64_t> clock_offsets_ms;  // empty = all zero
  LatencySpec latency;
  std::vector<PartitionSpec> partitions;
  std::vector<AdversarySpec> adversaries;
  OutputSpec outputs;

  PrimitiveConfig primitive_config() const;
  void validate() const;  // throws ConfigError naming the offending field
};

// Strict parse: unknown keys anywhere are configuration errors naming the
// key. The emitted form spells out every field including defaults, so a
// dump parses back to the identical scenario.
Scenario scenario_from_json_text(const std::string& text);
Scenario scenario_from_file(const std::string& path);
std::string scenario_to_json_text(const Scenario& s);

}  // namespace luckchain
