#include "luckchain/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "luckchain/errors.hpp"

namespace luckchain {

using nlohmann::json;

const char* adversary_kind_name(AdversarySpec::Kind kind) {
  switch (kind) {
    case AdversarySpec::Kind::minority_fork:
      return "minority_fork";
    case AdversarySpec::Kind::withhold_reveal:
      return "withhold_reveal";
    case AdversarySpec::Kind::spoofer:
      return "spoofer";
    case AdversarySpec::Kind::compromised_tee:
      return "compromised_tee";
  }
  return "unknown";
}

std::optional<AdversarySpec::Kind> adversary_kind_from(const std::string& name) {
  if (name == "minority_fork") return AdversarySpec::Kind::minority_fork;
  if (name == "withhold_reveal") return AdversarySpec::Kind::withhold_reveal;
  if (name == "spoofer") return AdversarySpec::Kind::spoofer;
  if (name == "compromised_tee") return AdversarySpec::Kind::compromised_tee;
  return std::nullopt;
}

PrimitiveConfig Scenario::primitive_config() const {
  PrimitiveConfig cfg;
  cfg.round_time_ms = round_time_ms;
  cfg.max_mine_delay_ms = max_mine_delay_ms;
  return cfg;
}

namespace {

[[noreturn]] void bad(const std::string& what) {
  raise(Err::ConfigError, what);
}

void check_ids(const std::vector<int>& ids, int participants,
               const char* where) {
  for (int id : ids) {
    if (id < 0 || id >= participants) {
      bad(std::string(where) + ": participant id out of range");
    }
  }
}

// Rejects keys outside the allowlist so typos fail loudly instead of
// silently reverting to defaults.
void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const char* where) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* name : allowed) {
      if (key == name) {
        known = true;
        break;
      }
    }
    if (!known) {
      bad(std::string("unknown config key: ") + where + key);
    }
  }
}

template <class T>
void read_field(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    bad(std::string("config key has wrong type: ") + key);
  }
}

}  // namespace

void Scenario::validate() const {
  if (schema_version != 1) bad("schema_version: only version 1 is supported");
  if (participants < 1) bad("participants: must be at least 1");
  if (horizon_rounds < 1) bad("horizon_rounds: must be at least 1");
  if (consensus == ConsensusMode::superblock) {
    if (superblock_m < 1) bad("m: must be at least 1");
    if (superblock_m > participants) {
      bad("m: cannot exceed participants (no round could ever merge)");
    }
  }
  if (merge_slack_ms < 0) bad("merge_slack_ms: must be non-negative");
  if (tx_per_round < 0) bad("tx_per_round: must be non-negative");
  primitive_config().validate();

  if (!start_offsets_ms.empty() &&
      start_offsets_ms.size() != static_cast<std::size_t>(participants)) {
    bad("start_offsets_ms: length must equal participants");
  }
  for (std::int64_t off : start_offsets_ms) {
    if (off < 0) bad("start_offsets_ms: offsets must be non-negative");
  }
  if (!clock_offsets_ms.empty() &&
      clock_offsets_ms.size() != static_cast<std::size_t>(participants)) {
    bad("clock_offsets_ms: length must equal participants");
  }

  if (latency.base_ms < 0) bad("latency.base_ms: must be non-negative");
  if (latency.jitter_mean_ms < 0) {
    bad("latency.jitter_mean_ms: must be non-negative");
  }
  for (const EdgeLatency& e : latency.edges) {
    if (e.from < 0 || e.from >= participants || e.to < 0 ||
        e.to >= participants) {
      bad("latency.edges: participant id out of range");
    }
    if (e.from == e.to) bad("latency.edges: self edges are meaningless");
    if (e.base_ms < 0) bad("latency.edges: base_ms must be non-negative");
  }

  bool height_ended = false;
  for (const PartitionSpec& p : partitions) {
    if (p.groups.size() < 2) bad("partitions: need at least two groups");
    std::set<int> seen;
    std::size_t covered = 0;
    for (const auto& g : p.groups) {
      check_ids(g, participants, "partitions");
      for (int id : g) {
        if (!seen.insert(id).second) bad("partitions: groups must be disjoint");
      }
      covered += g.size();
    }
    if (covered != static_cast<std::size_t>(participants)) {
      bad("partitions: groups must cover all participants");
    }
    if (p.start_ms < 0) bad("partitions: start_ms must be non-negative");
    if (p.end_when_height > 0) {
      if (p.end_ms != -1) {
        bad("partitions: end_ms and end_when_height are mutually exclusive");
      }
      height_ended = true;
    } else if (p.end_ms <= p.start_ms) {
      bad("partitions: end_ms must be after start_ms");
    }
  }
  if (height_ended && partitions.size() > 1) {
    bad("partitions: a height-ended split cannot overlap other splits");
  }
  for (std::size_t i = 0; i + 1 < partitions.size(); ++i) {
    for (std::size_t j = i + 1; j < partitions.size(); ++j) {
      const PartitionSpec& a = partitions[i];
      const PartitionSpec& b = partitions[j];
      if (a.start_ms < b.end_ms && b.start_ms < a.end_ms) {
        bad("partitions: specs overlap in time");
      }
    }
  }

  std::set<int> controlled_all;
  for (const AdversarySpec& a : adversaries) {
    if (a.controlled.empty()) bad("adversaries: controlled must be non-empty");
    check_ids(a.controlled, participants, "adversaries");
    for (int id : a.controlled) {
      if (!controlled_all.insert(id).second) {
        bad("adversaries: controlled sets must be disjoint");
      }
    }
    if (a.fork_height < 0) bad("adversaries: fork_height must be non-negative");
    if (a.reveal_height < 1) bad("adversaries: reveal_height must be positive");
    if (!(a.forge_l >= 0.0 && a.forge_l < 1.0)) {
      bad("adversaries: forge_l must lie in [0,1)");
    }
    if (a.duplicates < 1) bad("adversaries: duplicates must be positive");
    if (a.kind == AdversarySpec::Kind::spoofer) {
      if (!a.spoof_as) bad("adversaries: spoofer needs spoof_as");
      if (*a.spoof_as < 0 || *a.spoof_as >= participants) {
        bad("adversaries: spoof_as out of range");
      }
    }
    if (a.controlled.size() >= static_cast<std::size_t>(participants)) {
      bad("adversaries: at least one participant must stay honest");
    }
  }
}

Scenario scenario_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    bad(std::string("config parse error: ") + e.what());
  }
  if (!root.is_object()) bad("config root must be a JSON object");

  check_keys(root,
             {"schema_version", "seed", "participants", "horizon_rounds",
              "consensus", "m", "round_time_ms", "max_mine_delay_ms",
              "merge_slack_ms", "tx_per_round", "header_first", "keep_events",
              "start_offsets_ms", "clock_offsets_ms", "latency", "partitions",
              "adversaries", "outputs"},
             "");

  Scenario s;
  read_field(root, "schema_version", s.schema_version);
  read_field(root, "seed", s.seed);
  read_field(root, "participants", s.participants);
  read_field(root, "horizon_rounds", s.horizon_rounds);
  if (root.contains("consensus")) {
    std::string mode;
    read_field(root, "consensus", mode);
    if (mode == "luck") {
      s.consensus = ConsensusMode::luck;
    } else if (mode == "superblock") {
      s.consensus = ConsensusMode::superblock;
    } else {
      bad("consensus: must be \"luck\" or \"superblock\"");
    }
  }
  read_field(root, "m", s.superblock_m);
  read_field(root, "round_time_ms", s.round_time_ms);
  read_field(root, "max_mine_delay_ms", s.max_mine_delay_ms);
  read_field(root, "merge_slack_ms", s.merge_slack_ms);
  read_field(root, "tx_per_round", s.tx_per_round);
  read_field(root, "header_first", s.header_first);
  read_field(root, "keep_events", s.keep_events);
  read_field(root, "start_offsets_ms", s.start_offsets_ms);
  read_field(root, "clock_offsets_ms", s.clock_offsets_ms);

  if (root.contains("latency")) {
    const json& lat = root.at("latency");
    if (!lat.is_object()) bad("latency: must be an object");
    check_keys(lat, {"base_ms", "jitter_mean_ms", "edges"}, "latency.");
    read_field(lat, "base_ms", s.latency.base_ms);
    read_field(lat, "jitter_mean_ms", s.latency.jitter_mean_ms);
    if (lat.contains("edges")) {
      for (const json& e : lat.at("edges")) {
        if (!e.is_object()) bad("latency.edges: entries must be objects");
        check_keys(e, {"from", "to", "base_ms"}, "latency.edges.");
        EdgeLatency edge;
        read_field(e, "from", edge.from);
        read_field(e, "to", edge.to);
        read_field(e, "base_ms", edge.base_ms);
        s.latency.edges.push_back(edge);
      }
    }
  }

  if (root.contains("partitions")) {
    for (const json& p : root.at("partitions")) {
      if (!p.is_object()) bad("partitions: entries must be objects");
      check_keys(p, {"groups", "start_ms", "end_ms", "end_when_height"},
                 "partitions.");
      PartitionSpec spec;
      read_field(p, "groups", spec.groups);
      read_field(p, "start_ms", spec.start_ms);
      read_field(p, "end_ms", spec.end_ms);
      read_field(p, "end_when_height", spec.end_when_height);
      s.partitions.push_back(std::move(spec));
    }
  }

  if (root.contains("adversaries")) {
    for (const json& a : root.at("adversaries")) {
      if (!a.is_object()) bad("adversaries: entries must be objects");
      check_keys(a,
                 {"kind", "controlled", "fork_height", "reveal_height",
                  "forge_l", "duplicates", "spoof_as"},
                 "adversaries.");
      AdversarySpec spec;
      std::string kind;
      read_field(a, "kind", kind);
      auto parsed = adversary_kind_from(kind);
      if (!parsed) bad("adversaries: unknown kind \"" + kind + "\"");
      spec.kind = *parsed;
      read_field(a, "controlled", spec.controlled);
      read_field(a, "fork_height", spec.fork_height);
      read_field(a, "reveal_height", spec.reveal_height);
      read_field(a, "forge_l", spec.forge_l);
      read_field(a, "duplicates", spec.duplicates);
      if (a.contains("spoof_as")) {
        int who = 0;
        read_field(a, "spoof_as", who);
        spec.spoof_as = who;
      }
      s.adversaries.push_back(std::move(spec));
    }
  }

  if (root.contains("outputs")) {
    const json& out = root.at("outputs");
    if (!out.is_object()) bad("outputs: must be an object");
    check_keys(out, {"trace", "summary", "chain"}, "outputs.");
    read_field(out, "trace", s.outputs.trace);
    read_field(out, "summary", s.outputs.summary);
    read_field(out, "chain", s.outputs.chain);
  }

  s.validate();
  return s;
}

Scenario scenario_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str());
}

std::string scenario_to_json_text(const Scenario& s) {
  json root;
  root["schema_version"] = s.schema_version;
  root["seed"] = s.seed;
  root["participants"] = s.participants;
  root["horizon_rounds"] = s.horizon_rounds;
  root["consensus"] =
      s.consensus == ConsensusMode::superblock ? "superblock" : "luck";
  root["m"] = s.superblock_m;
  root["round_time_ms"] = s.round_time_ms;
  root["max_mine_delay_ms"] = s.max_mine_delay_ms;
  root["merge_slack_ms"] = s.merge_slack_ms;
  root["tx_per_round"] = s.tx_per_round;
  root["header_first"] = s.header_first;
  root["keep_events"] = s.keep_events;
  root["start_offsets_ms"] = s.start_offsets_ms;
  root["clock_offsets_ms"] = s.clock_offsets_ms;
  root["latency"]["base_ms"] = s.latency.base_ms;
  root["latency"]["jitter_mean_ms"] = s.latency.jitter_mean_ms;
  root["latency"]["edges"] = json::array();
  for (const EdgeLatency& e : s.latency.edges) {
    root["latency"]["edges"].push_back(
        {{"from", e.from}, {"to", e.to}, {"base_ms", e.base_ms}});
  }
  root["partitions"] = json::array();
  for (const PartitionSpec& p : s.partitions) {
    root["partitions"].push_back({{"groups", p.groups},
                                  {"start_ms", p.start_ms},
                                  {"end_ms", p.end_ms},
                                  {"end_when_height", p.end_when_height}});
  }
  root["adversaries"] = json::array();
  for (const AdversarySpec& a : s.adversaries) {
    json obj = {{"kind", adversary_kind_name(a.kind)},
                {"controlled", a.controlled},
                {"fork_height", a.fork_height},
                {"reveal_height", a.reveal_height},
                {"forge_l", a.forge_l},
                {"duplicates", a.duplicates}};
    if (a.spoof_as) obj["spoof_as"] = *a.spoof_as;
    root["adversaries"].push_back(std::move(obj));
  }
  root["outputs"] = {{"trace", s.outputs.trace},
                     {"summary", s.outputs.summary},
                     {"chain", s.outputs.chain}};
  return root.dump(2) + "\n";
}

}  // namespace luckchain
