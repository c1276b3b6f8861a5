#include <iostream>

#include <CLI11.hpp>

#include "luckchain/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Proof-of-luck consensus simulator"};
  app.require_subcommand(1);

  luckchain::RunOptions run_opts;
  std::uint64_t run_seed = 0;
  CLI::App* run = app.add_subcommand("run", "Execute a scenario config");
  run->add_option("config", run_opts.config_path, "Scenario config (JSON)")
      ->required();
  CLI::Option* run_seed_opt =
      run->add_option("--seed", run_seed, "Override the scenario seed");
  std::string trace_path, summary_path, chain_path;
  CLI::Option* trace_opt =
      run->add_option("--trace", trace_path, "Event log output (JSON lines)");
  CLI::Option* summary_opt =
      run->add_option("--summary", summary_path, "Per-round summary CSV");
  CLI::Option* chain_opt =
      run->add_option("--chain", chain_path, "Final chain snapshot");
  run->add_flag("--quiet", run_opts.quiet, "Suppress the result line");

  luckchain::PersistenceOptions p_opts;
  CLI::App* persistence = app.add_subcommand(
      "persistence", "Monte Carlo minority-fork persistence probabilities");
  persistence->add_option("--majority,-M", p_opts.majority, "Majority size")
      ->required();
  persistence->add_option("--minority,-m", p_opts.minority, "Minority size")
      ->required();
  persistence
      ->add_option("--horizon,-H", p_opts.horizons,
                   "Horizons in blocks (repeatable)")
      ->required();
  persistence->add_option("--trials", p_opts.trials, "Trials per horizon")
      ->required();
  persistence->add_option("--seed", p_opts.seed, "Monte Carlo seed");
  persistence->add_option("--threads", p_opts.threads, "Worker threads");
  std::string csv_path;
  CLI::Option* csv_opt =
      persistence->add_option("--csv", csv_path, "CSV output path (default stdout)");

  std::string verify_path;
  CLI::App* verify =
      app.add_subcommand("verify", "Validate a chain snapshot file");
  verify->add_option("chain", verify_path, "Snapshot (.chain) path")->required();

  luckchain::DumpConfigOptions d_opts;
  std::string dump_config_path;
  std::uint64_t dump_seed = 0;
  CLI::App* dump = app.add_subcommand(
      "dump-config", "Print the effective configuration including defaults");
  CLI::Option* dump_cfg_opt =
      dump->add_option("--config", dump_config_path, "Scenario config (JSON)");
  CLI::Option* dump_seed_opt =
      dump->add_option("--seed", dump_seed, "Override the scenario seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) {
    if (*run_seed_opt) run_opts.seed = run_seed;
    if (*trace_opt) run_opts.trace_path = trace_path;
    if (*summary_opt) run_opts.summary_path = summary_path;
    if (*chain_opt) run_opts.chain_path = chain_path;
    return luckchain::cmd_run(run_opts, std::cout, std::cerr);
  }
  if (persistence->parsed()) {
    if (*csv_opt) p_opts.csv_path = csv_path;
    return luckchain::cmd_persistence(p_opts, std::cout, std::cerr);
  }
  if (verify->parsed()) {
    return luckchain::cmd_verify(verify_path, std::cout, std::cerr);
  }
  if (dump->parsed()) {
    if (*dump_cfg_opt) d_opts.config_path = dump_config_path;
    if (*dump_seed_opt) d_opts.seed = dump_seed;
    return luckchain::cmd_dump_config(d_opts, std::cout, std::cerr);
  }
  return 2;
}
