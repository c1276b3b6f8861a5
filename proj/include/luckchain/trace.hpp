#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "luckchain/bytes.hpp"
#include "luckchain/crypto.hpp"

namespace luckchain {

// One row per consensus-chain height, in block order.
struct RoundRow {
  std::uint64_t height = 0;  // 1-based
  int winner = -1;           // participant whose proof tops this height
  double winner_luck = 0.0;
  double chain_luck = 0.0;  // cumulative through this height
  std::int64_t decided_ms = -1;  // first adoption of this height by any node
  std::uint64_t messages = 0;    // deliveries while this height was decided
  std::uint64_t bytes = 0;
  std::int64_t callback_spread_ms = -1;  // timer spread once all nodes caught up
};

struct NodeFinal {
  int node = -1;
  std::uint64_t chain_length = 0;
  double chain_luck = 0.0;
  Digest32 head{};
};

struct PartitionOutcome {
  std::int64_t start_ms = 0;
  std::int64_t heal_ms = -1;
  std::int64_t converged_ms = -1;  // first post-heal moment all heads agree
  std::uint64_t converged_height = 0;
  int winner_group = -1;  // group whose head the converged chain extends
  std::vector<double> group_luck;  // per group, luckiest head at heal
  std::vector<std::uint64_t> group_length;
  std::vector<Digest32> group_head;
};

struct AdversaryOutcome {
  std::string kind;
  bool revealed = false;
  std::int64_t reveal_ms = -1;
  bool success = false;  // withheld fork outlucked the honest chain at reveal
  double fork_luck = 0.0;
  double honest_luck = 0.0;
  std::uint64_t forged_blocks = 0;
  std::uint64_t duplicate_pseudonym_dropped = 0;
};

struct TraceCounters {
  std::uint64_t broadcasts = 0;
  std::uint64_t scheduled = 0;  // point-to-point deliveries enqueued
  std::uint64_t delivered = 0;
  std::uint64_t dropped_partition = 0;
  std::uint64_t dropped_adversary = 0;
  std::uint64_t self_deliveries = 0;
  std::uint64_t bytes_full = 0;          // whole-message accounting
  std::uint64_t bytes_header_first = 0;  // header handshake accounting
  std::uint64_t adoptions = 0;
  std::uint64_t rejections = 0;
  std::uint64_t mine_begins = 0;
  std::uint64_t releases = 0;
  std::uint64_t suppressed_releases = 0;
  std::uint64_t skipped_rounds = 0;
  std::uint64_t merges = 0;
  std::uint64_t void_merges = 0;
  std::uint64_t duplicate_pseudonym_dropped = 0;
  std::uint64_t stale_candidates = 0;
  std::uint64_t forged_proofs = 0;
  std::uint64_t pow_evaluations = 0;
  std::uint64_t undelivered_at_end = 0;  // still in flight when the run stopped
};

// Event log of one simulation: a running digest over the JSONL event lines
// (the replay-equality witness), optional retained/streamed lines, and the
// aggregate results the reports are built from.
class EventTrace {
 public:
  // sink, when set, receives each event line; keep_events retains lines in
  // memory for inspection (small scenarios only).
  void configure(bool keep_events, std::ostream* sink);

  // line is a complete JSON object without the trailing newline.
  void record(const std::string& line);

  std::string digest_hex() const;  // SHA-256 over the newline-joined lines
  std::uint64_t event_count() const { return count_; }

  TraceCounters counters;
  std::vector<RoundRow> rounds;
  std::vector<NodeFinal> finals;
  std::vector<PartitionOutcome> partitions;
  std::vector<AdversaryOutcome> adversaries;
  std::vector<std::string> events;  // only when keep_events
  bool converged = false;           // all final heads identical
  std::uint64_t horizon = 0;
  std::int64_t end_ms = 0;

 private:
  Sha256 digest_;
  std::uint64_t count_ = 0;
  bool keep_events_ = false;
  std::ostream* sink_ = nullptr;
};

std::string json_escape(const std::string& s);

// Shortest exact decimal for a binary64; stable across runs of one binary.
std::string fmt_double(double v);

void write_summary_csv(std::ostream& out, const EventTrace& t);

}  // namespace luckchain
