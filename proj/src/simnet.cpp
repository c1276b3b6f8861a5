#include "luckchain/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>
#include <type_traits>

#include "luckchain/adversary.hpp"
#include "luckchain/errors.hpp"
#include "luckchain/rng.hpp"

namespace luckchain {
namespace {

enum class Ev : std::uint8_t {
  start,     // node joins and binds its first round
  deliver,   // point-to-point message arrival (self deliveries included)
  callback,  // round timer
  release,   // proof release timer
  merge,     // super-block merge window close
  split,     // timed partition start
  heal,      // timed partition end
  reveal,    // adversary broadcast of a withheld chain
  inject,    // external transaction submission
};

const char* kind_name(Message::Kind k) {
  switch (k) {
    case Message::Kind::transaction: return "tx";
    case Message::Kind::chain: return "chain";
    case Message::Kind::super_chain: return "superchain";
    case Message::Kind::candidate: return "candidate";
  }
  return "?";
}

struct Pending {
  std::int64_t due = 0;
  std::uint64_t seq = 0;
  Ev kind = Ev::deliver;
  int node = -1;  // deliver target / timer owner / spec index for split|heal|reveal
  int from = -1;  // deliver sender; inject round index
  std::uint64_t gen = 0;
  Message msg;
};

struct PendingOrder {
  bool operator()(const Pending& a, const Pending& b) const {
    if (a.due != b.due) return a.due > b.due;
    return a.seq > b.seq;
  }
};

std::string short_hex(const Digest32& d) { return to_hex(d).substr(0, 16); }

// Per-height checkpoint of the delivery counters, taken the first time any
// chain reaches that height; round rows report deltas between checkpoints.
struct HeightMark {
  std::int64_t ms = 0;
  std::uint64_t delivered = 0;
  std::uint64_t bytes_full = 0;
  std::uint64_t bytes_header_first = 0;
};

class Simulation;

class SimPort : public NodePort {
 public:
  SimPort(Simulation* sim, int id) : sim_(sim), id_(id) {}

  std::int64_t now_ms() const override;
  void broadcast(const Message& msg) override;
  void send_to_self(const Message& msg) override;
  void schedule_callback(std::int64_t delay_ms, std::uint64_t gen) override;
  void schedule_release(std::int64_t delay_ms, std::uint64_t gen) override;
  void schedule_merge(std::int64_t delay_ms, std::uint64_t gen) override;

  void trace_bind(std::int64_t callback_due_ms) override;
  void trace_mine(double luck_value, std::int64_t release_at_ms) override;
  void trace_release(const Digest32& digest, double luck_value) override;
  void trace_adopt(std::uint64_t length, double total_luck, const Digest32& head,
                   bool restarted) override;
  void trace_reject(const char* why) override;
  void trace_skip(const char* err) override;
  void trace_merge(std::size_t members, std::uint64_t duplicates_dropped,
                   bool formed) override;
  void trace_candidate(double luck_value, bool extends_head) override;

 private:
  Simulation* sim_;
  int id_;
};

struct ActivePartition {
  int spec_index = -1;
  std::vector<int> group_of;                 // node id -> group index
  std::vector<std::uint64_t> base_height;    // per group, best height at split
  std::int64_t start_ms = 0;
};

class Simulation {
 public:
  Simulation(const Scenario& sc, std::ostream* sink) : sc_(sc) {
    sc_.validate();
    trace_.configure(sc_.keep_events, sink);
  }

  RunResult run();

 private:
  friend class SimPort;

  int n() const { return sc_.participants; }
  bool luck_mode() const { return sc_.consensus == ConsensusMode::luck; }

  std::uint64_t height(int i) const {
    return luck_mode() ? nodes_[i]->chain().length()
                       : sb_nodes_[i]->chain().length();
  }
  double node_luck(int i) const {
    return luck_mode() ? nodes_[i]->chain().total_luck()
                       : sb_nodes_[i]->chain().total_luck();
  }
  Digest32 node_head(int i) const {
    return luck_mode() ? nodes_[i]->chain().latest_digest()
                       : sb_nodes_[i]->chain().latest_digest();
  }
  Message chain_message(int i) const {
    return luck_mode() ? Message::make_chain(nodes_[i]->chain())
                       : Message::make_super(sb_nodes_[i]->chain());
  }

  void schedule(Pending p) {
    p.seq = next_seq_++;
    queue_.push(std::move(p));
  }

  void record(const std::string& line) { trace_.record(line); }

  void setup();
  void dispatch(const Pending& p);
  void deliver(const Pending& p);
  void do_broadcast(int from, Message msg);
  void do_send_self(int id, Message msg);
  std::int64_t sample_latency(int from, int to);
  bool partition_blocks(int from, int to) const;
  void begin_partition(int spec_index);
  void end_partition();
  void do_reveal(const Pending& p);
  void do_inject(const Pending& p);
  void post_adoption_checks();
  bool heads_equal() const;
  std::optional<Digest32> converged_digest_at(std::uint64_t index) const;
  std::uint64_t min_height() const;
  void note_best_height(std::uint64_t length, double total_luck);
  void finalize(RunResult& out);

  Scenario sc_;
  EventTrace trace_;

  std::shared_ptr<tee::SimClock> clock_;
  std::unique_ptr<tee::TeePlatform> platform_;
  tee::VendorRegistry registry_;
  std::vector<tee::CpuIdentity> cpus_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<std::unique_ptr<SbNode>> sb_nodes_;
  std::vector<std::unique_ptr<SimPort>> ports_;
  std::vector<AdversaryController> advs_;
  std::vector<bool> is_forger_;
  std::vector<bool> is_honest_;

  std::priority_queue<Pending, std::vector<Pending>, PendingOrder> queue_;
  std::uint64_t next_seq_ = 0;
  std::int64_t now_ = 0;
  std::int64_t cap_ms_ = 0;
  bool stop_ = false;

  CounterRng net_rng_{0};
  std::map<std::pair<int, int>, std::int64_t> edge_base_;

  std::optional<ActivePartition> partition_;
  std::size_t next_partition_ = 0;  // first spec not yet begun
  int settling_partition_ = -1;     // outcome row awaiting convergence

  std::map<Digest32, int> released_by_;
  std::map<Digest32, std::int64_t> first_seen_;
  std::vector<HeightMark> marks_;
  double best_luck_seen_ = 0.0;
  std::vector<std::vector<std::int64_t>> binds_;

  bool in_self_chain_ = false;  // current delivery is a self-sent chain
  bool chain_changed_ = false;  // an adoption happened in the current event
};

std::int64_t SimPort::now_ms() const { return sim_->now_; }

void SimPort::broadcast(const Message& msg) { sim_->do_broadcast(id_, msg); }

void SimPort::send_to_self(const Message& msg) { sim_->do_send_self(id_, msg); }

void SimPort::schedule_callback(std::int64_t delay_ms, std::uint64_t gen) {
  sim_->schedule({sim_->now_ + delay_ms, 0, Ev::callback, id_, -1, gen, {}});
}

void SimPort::schedule_release(std::int64_t delay_ms, std::uint64_t gen) {
  sim_->schedule({sim_->now_ + delay_ms, 0, Ev::release, id_, -1, gen, {}});
}

void SimPort::schedule_merge(std::int64_t delay_ms, std::uint64_t gen) {
  sim_->schedule({sim_->now_ + delay_ms, 0, Ev::merge, id_, -1, gen, {}});
}

void SimPort::trace_bind(std::int64_t callback_due_ms) {
  sim_->binds_[id_].push_back(callback_due_ms);
  std::ostringstream line;
  line << "{\"t\":" << sim_->now_ << ",\"ev\":\"bind\",\"node\":" << id_
       << ",\"due\":" << callback_due_ms << "}";
  sim_->record(line.str());
}

void SimPort::trace_mine(double luck_value, std::int64_t release_at_ms) {
  ++sim_->trace_.counters.mine_begins;
  std::ostringstream line;
  line << "{\"t\":" << sim_->now_ << ",\"ev\":\"mine\",\"node\":" << id_
       << ",\"l\":" << fmt_double(luck_value) << ",\"at\":" << release_at_ms
       << "}";
  sim_->record(line.str());
}

void SimPort::trace_release(const Digest32& digest, double luck_value) {
  ++sim_->trace_.counters.releases;
  if (sim_->is_forger_[id_]) ++sim_->trace_.counters.forged_proofs;
  sim_->released_by_.emplace(digest, id_);
  sim_->first_seen_.emplace(digest, sim_->now_);
  std::ostringstream line;
  line << "{\"t\":" << sim_->now_ << ",\"ev\":\"release\",\"node\":" << id_
       << ",\"digest\":\"" << short_hex(digest)
       << "\",\"l\":" << fmt_double(luck_value) << "}";
  sim_->record(line.str());
}

void SimPort::trace_adopt(std::uint64_t length, double total_luck,
                          const Digest32& head, bool restarted) {
  ++sim_->trace_.counters.adoptions;
  sim_->first_seen_.emplace(head, sim_->now_);
  sim_->note_best_height(length, total_luck);
  sim_->chain_changed_ = true;
  std::ostringstream line;
  line << "{\"t\":" << sim_->now_ << ",\"ev\":\"adopt\",\"node\":" << id_
       << ",\"len\":" << length << ",\"luck\":" << fmt_double(total_luck)
       << ",\"head\":\"" << short_hex(head)
       << "\",\"restart\":" << (restarted ? "true" : "false") << "}";
  sim_->record(line.str());
}

void SimPort::trace_reject(const char* why) {
  ++sim_->trace_.counters.rejections;
  if (sim_->in_self_chain_) ++sim_->trace_.counters.suppressed_releases;
  std::ostringstream line;
  line << "{\"t\":" << sim_->now_ << ",\"ev\":\"reject\",\"node\":" << id_
       << ",\"why\":\"" << json_escape(why) << "\"}";
  sim_->record(line.str());
}

void SimPort::trace_skip(const char* err) {
  ++sim_->trace_.counters.skipped_rounds;
  std::ostringstream line;
  line << "{\"t\":" << sim_->now_ << ",\"ev\":\"skip\",\"node\":" << id_
       << ",\"err\":\"" << json_escape(err) << "\"}";
  sim_->record(line.str());
}

void SimPort::trace_merge(std::size_t members, std::uint64_t duplicates_dropped,
                          bool formed) {
  if (formed) {
    ++sim_->trace_.counters.merges;
  } else {
    ++sim_->trace_.counters.void_merges;
  }
  sim_->trace_.counters.duplicate_pseudonym_dropped += duplicates_dropped;
  std::ostringstream line;
  line << "{\"t\":" << sim_->now_ << ",\"ev\":\"merge\",\"node\":" << id_
       << ",\"members\":" << members << ",\"dup\":" << duplicates_dropped
       << ",\"formed\":" << (formed ? "true" : "false") << "}";
  sim_->record(line.str());
}

void SimPort::trace_candidate(double luck_value, bool extends_head) {
  if (!extends_head) ++sim_->trace_.counters.stale_candidates;
  std::ostringstream line;
  line << "{\"t\":" << sim_->now_ << ",\"ev\":\"candidate\",\"node\":" << id_
       << ",\"l\":" << fmt_double(luck_value)
       << ",\"current\":" << (extends_head ? "true" : "false") << "}";
  sim_->record(line.str());
}

void Simulation::setup() {
  clock_ = std::make_shared<tee::SimClock>();
  platform_ = std::make_unique<tee::TeePlatform>(
      derive_seed(sc_.seed, "tee-platform"), clock_);
  net_rng_ = CounterRng(derive_seed(sc_.seed, "simnet"));

  for (const EdgeLatency& e : sc_.latency.edges) {
    edge_base_[{e.from, e.to}] = e.base_ms;
  }

  is_forger_.assign(n(), false);
  is_honest_.assign(n(), true);
  for (const AdversarySpec& spec : sc_.adversaries) {
    advs_.emplace_back(spec);
    for (int id : spec.controlled) {
      is_honest_[id] = false;
      if (spec.kind == AdversarySpec::Kind::compromised_tee) {
        is_forger_[id] = true;
      }
    }
  }

  binds_.resize(n());
  const Digest32& measurement = consensus_measurement();
  for (int i = 0; i < n(); ++i) {
    std::int64_t skew =
        sc_.clock_offsets_ms.empty() ? 0 : sc_.clock_offsets_ms[i];
    cpus_.push_back(platform_->create_cpu(static_cast<std::uint32_t>(i),
                                          registry_, skew));
    if (is_forger_[i]) platform_->mark_compromised(cpus_[i].cpu_id);
    ports_.push_back(std::make_unique<SimPort>(this, i));
  }
  for (int i = 0; i < n(); ++i) {
    std::optional<ForgeSpec> forge;
    if (is_forger_[i]) {
      for (const AdversarySpec& spec : sc_.adversaries) {
        if (spec.kind == AdversarySpec::Kind::compromised_tee &&
            std::count(spec.controlled.begin(), spec.controlled.end(), i)) {
          forge = ForgeSpec{spec.forge_l, spec.duplicates};
        }
      }
    }
    if (luck_mode()) {
      Node::Params p;
      p.id = i;
      p.cfg = sc_.primitive_config();
      p.registry = &registry_;
      p.measurement = measurement;
      p.forge = forge;
      nodes_.push_back(std::make_unique<Node>(p, *platform_, cpus_[i]));
    } else {
      SbNode::Params p;
      p.id = i;
      p.cfg = sc_.primitive_config();
      p.merge_m = static_cast<std::size_t>(sc_.superblock_m);
      p.merge_slack_ms = sc_.merge_slack_ms;
      p.registry = &registry_;
      p.measurement = measurement;
      p.forge = forge;
      sb_nodes_.push_back(std::make_unique<SbNode>(p, *platform_, cpus_[i]));
    }
  }

  std::int64_t max_offset = 0;
  for (int i = 0; i < n(); ++i) {
    std::int64_t at = sc_.start_offsets_ms.empty() ? 0 : sc_.start_offsets_ms[i];
    max_offset = std::max(max_offset, at);
    schedule({at, 0, Ev::start, i, -1, 0, {}});
  }

  for (std::size_t pi = 0; pi < sc_.partitions.size(); ++pi) {
    const PartitionSpec& p = sc_.partitions[pi];
    schedule({p.start_ms, 0, Ev::split, static_cast<int>(pi), -1, 0, {}});
    if (p.end_when_height == 0) {
      schedule({p.end_ms, 0, Ev::heal, static_cast<int>(pi), -1, 0, {}});
    }
  }

  if (sc_.tx_per_round > 0) {
    for (int r = 0; r < sc_.horizon_rounds; ++r) {
      std::int64_t at = r * sc_.round_time_ms + sc_.round_time_ms / 2;
      schedule({at, 0, Ev::inject, -1, r, 0, {}});
    }
  }

  cap_ms_ = max_offset +
            (sc_.horizon_rounds + 6) *
                (sc_.round_time_ms + sc_.max_mine_delay_ms +
                 sc_.merge_slack_ms + 5000);
}

std::int64_t Simulation::sample_latency(int from, int to) {
  auto it = edge_base_.find({from, to});
  std::int64_t base = it != edge_base_.end() ? it->second : sc_.latency.base_ms;
  std::int64_t jitter = 0;
  if (sc_.latency.jitter_mean_ms > 0) {
    jitter = std::llround(net_rng_.next_exponential(
        static_cast<double>(sc_.latency.jitter_mean_ms)));
  }
  return base + jitter;
}

bool Simulation::partition_blocks(int from, int to) const {
  return partition_ && partition_->group_of[from] != partition_->group_of[to];
}

void Simulation::do_broadcast(int from, Message msg) {
  ++trace_.counters.broadcasts;
  msg.claimed_sender = from;
  for (const AdversaryController& adv : advs_) {
    if (auto as = adv.relabel(from)) msg.claimed_sender = *as;
  }
  std::ostringstream line;
  line << "{\"t\":" << now_ << ",\"ev\":\"broadcast\",\"node\":" << from
       << ",\"kind\":\"" << kind_name(msg.kind) << "\"}";
  record(line.str());

  for (int to = 0; to < n(); ++to) {
    if (to == from) continue;
    ++trace_.counters.scheduled;
    if (partition_blocks(from, to)) {
      ++trace_.counters.dropped_partition;
      continue;
    }
    bool blocked = false;
    for (AdversaryController& adv : advs_) {
      if (adv.blocks(from, to, msg)) {
        blocked = true;
        break;
      }
    }
    if (blocked) {
      ++trace_.counters.dropped_adversary;
      continue;
    }
    schedule({now_ + sample_latency(from, to), 0, Ev::deliver, to, from, 0, msg});
  }
}

void Simulation::do_send_self(int id, Message msg) {
  schedule({now_, 0, Ev::deliver, id, id, 0, std::move(msg)});
}

void Simulation::deliver(const Pending& p) {
  const bool self = p.from == p.node;
  if (!self) {
    // Drop rules re-checked on arrival: splits and reveals between send and
    // delivery take effect.
    if (partition_blocks(p.from, p.node)) {
      ++trace_.counters.dropped_partition;
      std::ostringstream line;
      line << "{\"t\":" << now_ << ",\"ev\":\"drop\",\"node\":" << p.node
           << ",\"from\":" << p.from << ",\"rule\":\"partition\"}";
      record(line.str());
      return;
    }
    for (AdversaryController& adv : advs_) {
      if (adv.blocks(p.from, p.node, p.msg)) {
        ++trace_.counters.dropped_adversary;
        std::ostringstream line;
        line << "{\"t\":" << now_ << ",\"ev\":\"drop\",\"node\":" << p.node
             << ",\"from\":" << p.from << ",\"rule\":\"adversary\"}";
        record(line.str());
        return;
      }
    }
    ++trace_.counters.delivered;
    std::uint64_t wire = p.msg.wire_bytes();
    trace_.counters.bytes_full += wire;
    if (p.msg.is_chain_kind()) {
      double incoming = p.msg.kind == Message::Kind::chain
                            ? p.msg.chain.total_luck()
                            : p.msg.super_chain.total_luck();
      trace_.counters.bytes_header_first += kChainHeaderBytes;
      if (incoming > node_luck(p.node)) {
        trace_.counters.bytes_header_first += kHeaderHandshakeBytes + wire;
      }
    } else {
      trace_.counters.bytes_header_first += wire;
    }
  } else {
    ++trace_.counters.self_deliveries;
  }

  std::ostringstream line;
  line << "{\"t\":" << now_ << ",\"ev\":\"" << (self ? "self" : "deliver")
       << "\",\"node\":" << p.node << ",\"from\":" << p.from << ",\"kind\":\""
       << kind_name(p.msg.kind) << "\"}";
  record(line.str());

  in_self_chain_ = self && p.msg.kind != Message::Kind::transaction;
  if (luck_mode()) {
    Node& node = *nodes_[p.node];
    switch (p.msg.kind) {
      case Message::Kind::transaction:
        node.on_transaction(p.msg.tx, *ports_[p.node]);
        break;
      case Message::Kind::chain:
        node.on_chain(p.msg.chain, *ports_[p.node]);
        break;
      default:
        break;  // super-block payloads are not part of this mode
    }
  } else {
    SbNode& node = *sb_nodes_[p.node];
    switch (p.msg.kind) {
      case Message::Kind::transaction:
        node.on_transaction(p.msg.tx, *ports_[p.node]);
        break;
      case Message::Kind::super_chain:
        node.on_super_chain(p.msg.super_chain, *ports_[p.node]);
        break;
      case Message::Kind::candidate:
        node.on_candidate(p.msg.candidate, *ports_[p.node]);
        break;
      default:
        break;
    }
  }
  in_self_chain_ = false;
}

void Simulation::begin_partition(int spec_index) {
  const PartitionSpec& spec = sc_.partitions[spec_index];
  ActivePartition ap;
  ap.spec_index = spec_index;
  ap.start_ms = now_;
  ap.group_of.assign(n(), -1);
  ap.base_height.assign(spec.groups.size(), 0);
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    for (int id : spec.groups[g]) {
      ap.group_of[id] = static_cast<int>(g);
      ap.base_height[g] = std::max(ap.base_height[g], height(id));
    }
  }
  partition_ = std::move(ap);
  std::ostringstream line;
  line << "{\"t\":" << now_ << ",\"ev\":\"split\",\"groups\":"
       << spec.groups.size() << "}";
  record(line.str());
}

void Simulation::end_partition() {
  if (!partition_) return;
  const PartitionSpec& spec = sc_.partitions[partition_->spec_index];

  PartitionOutcome outcome;
  outcome.start_ms = partition_->start_ms;
  outcome.heal_ms = now_;
  std::vector<int> kickers;
  for (const auto& group : spec.groups) {
    int best = -1;
    for (int id : group) {
      if (best < 0 || node_luck(id) > node_luck(best)) best = id;
    }
    kickers.push_back(best);
    outcome.group_luck.push_back(best < 0 ? 0.0 : node_luck(best));
    outcome.group_length.push_back(best < 0 ? 0 : height(best));
    outcome.group_head.push_back(best < 0 ? kZeroDigest : node_head(best));
  }
  trace_.partitions.push_back(std::move(outcome));
  settling_partition_ = static_cast<int>(trace_.partitions.size()) - 1;
  partition_.reset();

  std::ostringstream line;
  line << "{\"t\":" << now_ << ",\"ev\":\"heal\"}";
  record(line.str());

  // Re-gossip kick: one member per group reintroduces its side's best chain.
  for (int id : kickers) {
    if (id >= 0) do_broadcast(id, chain_message(id));
  }
}

void Simulation::do_reveal(const Pending& p) {
  std::ostringstream line;
  line << "{\"t\":" << now_ << ",\"ev\":\"reveal\",\"node\":" << p.from << "}";
  record(line.str());
  do_broadcast(p.from, p.msg);
}

void Simulation::do_inject(const Pending& p) {
  for (int k = 0; k < sc_.tx_per_round; ++k) {
    int target = static_cast<int>(net_rng_.next_below(
        static_cast<std::uint64_t>(n())));
    Encoder enc;
    enc.u64(net_rng_.next_u64());
    enc.u64(static_cast<std::uint64_t>(p.from));
    enc.u64(static_cast<std::uint64_t>(k));
    Transaction tx = Transaction::make(enc.take());
    std::ostringstream line;
    line << "{\"t\":" << now_ << ",\"ev\":\"inject\",\"node\":" << target
         << ",\"tx\":\"" << short_hex(tx.tx_id) << "\"}";
    record(line.str());
    if (luck_mode()) {
      nodes_[target]->on_transaction(tx, *ports_[target]);
    } else {
      sb_nodes_[target]->on_transaction(tx, *ports_[target]);
    }
  }
}

bool Simulation::heads_equal() const {
  Digest32 first = node_head(0);
  for (int i = 1; i < n(); ++i) {
    if (node_head(i) != first) return false;
  }
  return true;
}

std::optional<Digest32> Simulation::converged_digest_at(
    std::uint64_t index) const {
  if (luck_mode()) {
    const auto* node = nodes_[0]->chain().node_at(index);
    return node ? std::optional<Digest32>(node->digest) : std::nullopt;
  }
  const auto* node = sb_nodes_[0]->chain().node_at(index);
  return node ? std::optional<Digest32>(node->digest) : std::nullopt;
}

std::uint64_t Simulation::min_height() const {
  std::uint64_t m = height(0);
  for (int i = 1; i < n(); ++i) m = std::min(m, height(i));
  return m;
}

void Simulation::note_best_height(std::uint64_t length, double total_luck) {
  best_luck_seen_ = std::max(best_luck_seen_, total_luck);
  while (marks_.size() < length) {
    marks_.push_back({now_, trace_.counters.delivered,
                      trace_.counters.bytes_full,
                      trace_.counters.bytes_header_first});
  }
}

void Simulation::post_adoption_checks() {
  // Height-triggered heal: every group has grown the configured number of
  // entries past its height at split time.
  if (partition_) {
    const PartitionSpec& spec = sc_.partitions[partition_->spec_index];
    if (spec.end_when_height > 0) {
      bool all_reached = true;
      for (std::size_t g = 0; g < spec.groups.size() && all_reached; ++g) {
        std::uint64_t best = 0;
        for (int id : spec.groups[g]) best = std::max(best, height(id));
        if (best < partition_->base_height[g] + spec.end_when_height) {
          all_reached = false;
        }
      }
      if (all_reached) end_partition();
    }
  }

  for (std::size_t a = 0; a < advs_.size(); ++a) {
    AdversaryController& adv = advs_[a];
    if (adv.revealed()) continue;
    std::uint64_t honest_best = 0;
    std::uint64_t controlled_best = 0;
    int best_member = -1;
    for (int i = 0; i < n(); ++i) {
      if (adv.controls(i)) {
        controlled_best = std::max(controlled_best, height(i));
        if (best_member < 0 || node_luck(i) > node_luck(best_member)) {
          best_member = i;
        }
      } else {
        honest_best = std::max(honest_best, height(i));
      }
    }
    if (!adv.observe(honest_best, controlled_best)) continue;

    // Snapshot at the trigger instant: the fork as built, and the honest
    // side's standing it must beat.
    adv.mark_revealed(now_);
    AdversaryOutcome outcome;
    outcome.kind = adversary_kind_name(adv.spec().kind);
    outcome.revealed = true;
    outcome.reveal_ms = now_;
    outcome.fork_luck = node_luck(best_member);
    for (int i = 0; i < n(); ++i) {
      if (!adv.controls(i)) {
        outcome.honest_luck = std::max(outcome.honest_luck, node_luck(i));
      }
    }
    outcome.success = outcome.fork_luck > outcome.honest_luck;
    trace_.adversaries.push_back(std::move(outcome));
    schedule({now_, 0, Ev::reveal, static_cast<int>(a), best_member, 0,
              chain_message(best_member)});
  }

  if (settling_partition_ >= 0 && heads_equal()) {
    PartitionOutcome& outcome = trace_.partitions[settling_partition_];
    outcome.converged_ms = now_;
    outcome.converged_height = height(0);
    // The winning group is the one whose head at heal time is an ancestor of
    // (or equal to) the converged chain.
    for (std::size_t g = 0; g < outcome.group_head.size(); ++g) {
      if (outcome.group_length[g] == 0) continue;
      auto digest = converged_digest_at(outcome.group_length[g] - 1);
      if (digest && *digest == outcome.group_head[g]) {
        outcome.winner_group = static_cast<int>(g);
        break;
      }
    }
    settling_partition_ = -1;
  }

  if (min_height() >= static_cast<std::uint64_t>(sc_.horizon_rounds) &&
      heads_equal()) {
    stop_ = true;
  }
}

void Simulation::dispatch(const Pending& p) {
  switch (p.kind) {
    case Ev::start: {
      std::ostringstream line;
      line << "{\"t\":" << now_ << ",\"ev\":\"join\",\"node\":" << p.node << "}";
      record(line.str());
      if (luck_mode()) {
        nodes_[p.node]->start(*ports_[p.node]);
      } else {
        sb_nodes_[p.node]->start(*ports_[p.node]);
      }
      break;
    }
    case Ev::deliver:
      deliver(p);
      break;
    case Ev::callback:
      if (luck_mode()) {
        nodes_[p.node]->on_mine_callback(p.gen, *ports_[p.node]);
      } else {
        sb_nodes_[p.node]->on_mine_callback(p.gen, *ports_[p.node]);
      }
      break;
    case Ev::release:
      if (luck_mode()) {
        nodes_[p.node]->on_release(p.gen, *ports_[p.node]);
      } else {
        sb_nodes_[p.node]->on_release(p.gen, *ports_[p.node]);
      }
      break;
    case Ev::merge:
      if (!luck_mode()) {
        sb_nodes_[p.node]->on_merge(p.gen, *ports_[p.node]);
      }
      break;
    case Ev::split:
      begin_partition(p.node);
      break;
    case Ev::heal:
      end_partition();
      break;
    case Ev::reveal:
      do_reveal(p);
      break;
    case Ev::inject:
      do_inject(p);
      break;
  }
}

RunResult Simulation::run() {
  setup();
  RunResult out;

  while (!queue_.empty() && !stop_) {
    Pending p = queue_.top();
    queue_.pop();
    if (p.due > cap_ms_) {
      queue_.push(std::move(p));
      break;
    }
    if (p.due > now_) {
      clock_->advance_to(p.due);
      now_ = p.due;
    }
    chain_changed_ = false;
    dispatch(p);
    if (chain_changed_) post_adoption_checks();
  }

  while (!queue_.empty()) {
    if (queue_.top().kind == Ev::deliver) ++trace_.counters.undelivered_at_end;
    queue_.pop();
  }

  finalize(out);
  return out;
}

void Simulation::finalize(RunResult& out) {
  trace_.horizon = static_cast<std::uint64_t>(sc_.horizon_rounds);
  trace_.end_ms = now_;
  trace_.converged = heads_equal();

  for (int i = 0; i < n(); ++i) {
    trace_.finals.push_back({i, height(i), node_luck(i), node_head(i)});
    if (luck_mode()) {
      out.chains.push_back(nodes_[i]->chain());
    } else {
      out.super_chains.push_back(sb_nodes_[i]->chain());
    }
  }

  // The consensus chain for reporting: the luckiest final chain.
  int best = 0;
  for (int i = 1; i < n(); ++i) {
    if (node_luck(i) > node_luck(best)) best = i;
  }

  // Per-round timer spread across honest nodes, indexed by round number.
  std::vector<std::int64_t> spreads;
  for (std::size_t r = 0;; ++r) {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    bool any = false;
    bool complete = true;
    for (int i = 0; i < n(); ++i) {
      if (!is_honest_[i]) continue;
      if (binds_[i].size() <= r) {
        complete = false;
        break;
      }
      std::int64_t due = binds_[i][r];
      if (!any) {
        lo = hi = due;
        any = true;
      } else {
        lo = std::min(lo, due);
        hi = std::max(hi, due);
      }
    }
    if (!complete || !any) break;
    spreads.push_back(hi - lo);
  }

  auto fill_rows = [&](const auto& chain) {
    double cum = 0.0;
    std::uint64_t k = 0;
    for (const auto* entry : chain.entries()) {
      ++k;
      RoundRow row;
      row.height = k;
      const auto* node = chain.node_at(k - 1);
      Digest32 d = node->digest;
      row.winner_luck = entry_luck(*entry);
      cum += row.winner_luck;
      row.chain_luck = cum;
      Digest32 winner_key = d;
      if constexpr (std::is_same_v<std::decay_t<decltype(*entry)>, SuperBlock>) {
        if (!entry->members.empty()) {
          winner_key = candidate_digest(entry->members.front());
          row.winner_luck = entry->members.front().proof.luck_value;
        }
      }
      auto who = released_by_.find(winner_key);
      row.winner = who != released_by_.end() ? who->second : -1;
      auto seen = first_seen_.find(d);
      row.decided_ms = seen != first_seen_.end() ? seen->second : -1;
      if (k - 1 < marks_.size()) {
        const HeightMark& cur = marks_[k - 1];
        const HeightMark prev =
            k >= 2 && k - 2 < marks_.size() ? marks_[k - 2] : HeightMark{};
        row.messages = cur.delivered - prev.delivered;
        row.bytes = sc_.header_first
                        ? cur.bytes_header_first - prev.bytes_header_first
                        : cur.bytes_full - prev.bytes_full;
      }
      if (k - 1 < spreads.size()) row.callback_spread_ms = spreads[k - 1];
      trace_.rounds.push_back(row);
    }
  };
  if (luck_mode()) {
    fill_rows(nodes_[best]->chain());
  } else {
    fill_rows(sb_nodes_[best]->chain());
  }

  // Compromised-TEE outcomes are judged on the final chain: how much of it
  // the forgers actually control.
  for (const AdversaryController& adv : advs_) {
    if (adv.spec().kind != AdversarySpec::Kind::compromised_tee) continue;
    AdversaryOutcome outcome;
    outcome.kind = adversary_kind_name(adv.spec().kind);
    outcome.duplicate_pseudonym_dropped =
        trace_.counters.duplicate_pseudonym_dropped;
    if (luck_mode()) {
      const Chain& chain = nodes_[best]->chain();
      for (const Block* b : chain.entries()) {
        auto who = released_by_.find(block_digest(*b));
        if (who != released_by_.end() && adv.controls(who->second)) {
          ++outcome.forged_blocks;
        }
      }
      outcome.success =
          chain.length() > 0 && outcome.forged_blocks == chain.length();
    } else {
      const SuperChain& chain = sb_nodes_[best]->chain();
      for (const SuperBlock* sb : chain.entries()) {
        auto who = released_by_.find(candidate_digest(sb->members.back()));
        if (who != released_by_.end() && adv.controls(who->second)) {
          ++outcome.forged_blocks;  // attacker controls this block's luck
        }
      }
      outcome.success = outcome.forged_blocks > 0;
    }
    trace_.adversaries.push_back(std::move(outcome));
  }

  out.trace = std::move(trace_);
  out.released_by = std::move(released_by_);
  out.registry = registry_;
  out.measurement = consensus_measurement();
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, std::ostream* event_sink) {
  Simulation sim(scenario, event_sink);
  return sim.run();
}

}  // namespace luckchain
