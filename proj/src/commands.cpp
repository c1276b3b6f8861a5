#include "luckchain/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>

#include "luckchain/errors.hpp"
#include "luckchain/luckstats.hpp"
#include "luckchain/scenario.hpp"
#include "luckchain/simnet.hpp"
#include "luckchain/snapshot.hpp"

namespace luckchain {
namespace {

// Flag beats environment beats config file.
std::uint64_t effective_seed(std::uint64_t config_seed,
                             const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("LUCKCHAIN_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (!end || *end != '\0' || end == env) {
      raise(Err::ConfigError,
            std::string("LUCKCHAIN_SEED is not an unsigned integer: ") + env);
    }
    return static_cast<std::uint64_t>(v);
  }
  return config_seed;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) raise(Err::ConfigError, "cannot open output file: " + path);
  return f;
}

}  // namespace

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    Scenario sc = scenario_from_file(opts.config_path);
    sc.seed = effective_seed(sc.seed, opts.seed);

    std::string trace_path =
        opts.trace_path ? *opts.trace_path : sc.outputs.trace;
    std::string summary_path =
        opts.summary_path ? *opts.summary_path : sc.outputs.summary;
    std::string chain_path =
        opts.chain_path ? *opts.chain_path : sc.outputs.chain;

    std::ofstream trace_file;
    std::ostream* sink = nullptr;
    if (!trace_path.empty()) {
      trace_file = open_output(trace_path);
      sink = &trace_file;
    }

    RunResult result = run_scenario(sc, sink);

    if (!summary_path.empty()) {
      std::ofstream f = open_output(summary_path);
      write_summary_csv(f, result.trace);
    }
    if (!chain_path.empty()) {
      ChainSnapshot snap;
      snap.measurement = result.measurement;
      snap.registry = result.registry;
      if (sc.consensus == ConsensusMode::luck) {
        snap.mode = ChainSnapshot::Mode::chain;
        std::size_t best = 0;
        for (std::size_t i = 1; i < result.chains.size(); ++i) {
          if (result.chains[i].total_luck() >
              result.chains[best].total_luck()) {
            best = i;
          }
        }
        snap.chain = result.chains[best];
      } else {
        snap.mode = ChainSnapshot::Mode::super_chain;
        std::size_t best = 0;
        for (std::size_t i = 1; i < result.super_chains.size(); ++i) {
          if (result.super_chains[i].total_luck() >
              result.super_chains[best].total_luck()) {
            best = i;
          }
        }
        snap.super_chain = result.super_chains[best];
      }
      std::string werr;
      if (!write_snapshot_file(chain_path, snap, werr)) {
        raise(Err::ConfigError, werr);
      }
    }

    if (!opts.quiet) {
      out << "rounds=" << result.trace.rounds.size()
          << " converged=" << (result.trace.converged ? "true" : "false")
          << " end_ms=" << result.trace.end_ms
          << " trace_digest=" << result.trace.digest_hex() << "\n";
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == Err::Internal ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_persistence(const PersistenceOptions& opts, std::ostream& out,
                    std::ostream& err) {
  try {
    if (opts.horizons.empty()) {
      raise(Err::ConfigError, "at least one horizon is required");
    }
    std::vector<PersistenceRow> rows;
    for (int h : opts.horizons) {
      PersistenceQuery q;
      q.majority = opts.majority;
      q.minority = opts.minority;
      q.horizon = h;
      q.trials = opts.trials;
      q.seed = opts.seed;
      q.validate();
      rows.push_back({q, mc_persistence(q, opts.threads)});
    }
    if (opts.csv_path) {
      std::ofstream f = open_output(*opts.csv_path);
      write_persistence_csv(f, rows);
    } else {
      write_persistence_csv(out, rows);
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == Err::Internal ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_verify(const std::string& chain_path, std::ostream& out,
               std::ostream& err) {
  try {
    std::string read_err;
    std::optional<ChainSnapshot> snap = read_snapshot_file(chain_path, read_err);
    if (!snap) {
      err << "error: " << read_err << "\n";
      return 2;
    }
    std::uint64_t length = snap->mode == ChainSnapshot::Mode::chain
                               ? snap->chain.length()
                               : snap->super_chain.length();
    if (auto diag = diagnose_snapshot(*snap)) {
      out << "invalid: block " << diag->index << " fails check " << diag->check
          << "\n";
      return 1;
    }
    out << "valid: " << length << " blocks\n";
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == Err::Internal ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_dump_config(const DumpConfigOptions& opts, std::ostream& out,
                    std::ostream& err) {
  try {
    Scenario sc =
        opts.config_path ? scenario_from_file(*opts.config_path) : Scenario{};
    sc.seed = effective_seed(sc.seed, opts.seed);
    sc.validate();
    out << scenario_to_json_text(sc);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == Err::Internal ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace luckchain
