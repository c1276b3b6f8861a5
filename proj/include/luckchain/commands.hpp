#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace luckchain {

// Command implementations behind the CLI, exposed for in-process testing.
// Exit codes: 0 success, 1 validation/invariant failure, 2 unusable input
// (bad config, unreadable file). The LUCKCHAIN_SEED environment variable
// overrides the config seed; an explicit seed option overrides both.

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> trace_path;    // overrides outputs.trace
  std::optional<std::string> summary_path;  // overrides outputs.summary
  std::optional<std::string> chain_path;    // overrides outputs.chain
  bool quiet = false;
};

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);

struct PersistenceOptions {
  int majority = 0;
  int minority = 0;
  std::vector<int> horizons;
  std::uint64_t trials = 0;
  std::uint64_t seed = 1;
  int threads = 1;
  std::optional<std::string> csv_path;  // default: stdout
};

int cmd_persistence(const PersistenceOptions& opts, std::ostream& out,
                    std::ostream& err);

int cmd_verify(const std::string& chain_path, std::ostream& out,
               std::ostream& err);

struct DumpConfigOptions {
  std::optional<std::string> config_path;  // absent: built-in defaults
  std::optional<std::uint64_t> seed;
};

int cmd_dump_config(const DumpConfigOptions& opts, std::ostream& out,
                    std::ostream& err);

}  // namespace luckchain
