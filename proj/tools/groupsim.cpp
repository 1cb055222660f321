// groupsim: simulate, replay and inspect group-detection runs.

#include <iostream>

#include "CLI11.hpp"

#include "groupsense/commands.hpp"

int main(int argc, char** argv) {
  using namespace groupsense;

  CLI::App app{"Group detection simulator"};
  app.set_version_flag("--version", std::string("groupsim ") + GROUPSENSE_VERSION);
  app.require_subcommand(1);

  SimulateOptions sim;
  std::string sim_out;
  std::string sim_config;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write trace and metrics");
  simulate->add_option("--scenario", sim.scenario_path, "Scenario JSON file")->required();
  simulate->add_option("--seed", sim.seed, "Random seed (first seed of a batch)");
  simulate->add_option("--set", sim.overrides, "Override a setting, key=value (repeatable)");
  simulate->add_option("--config", sim_config, "JSON object of settings");
  simulate->add_option("--out", sim_out, "Output directory (default $GROUPSENSE_OUT_DIR or ./out)");
  simulate->add_option("--runs", sim.runs, "Number of consecutive seeds to run");

  ReplayOptions rep;
  std::string rep_scenario;
  std::string rep_manifest;
  std::string rep_out;
  auto* replay = app.add_subcommand("replay", "Recompute metrics from a trace file");
  replay->add_option("--trace", rep.trace_path, "trace.csv")->required();
  replay->add_option("--scenario", rep_scenario, "Scenario JSON (default: scenario.json next to the trace)");
  replay->add_option("--manifest", rep_manifest, "Manifest (default: manifest.json next to the trace)");
  replay->add_option("--out", rep_out, "Output directory (default: <trace dir>/replay)");

  BoundsOptions bnd;
  auto* bounds = app.add_subcommand("bounds", "Print convergence-time bounds");
  bounds->add_option("--n", bnd.n, "Number of nodes")->required();
  bounds->add_option("--delta", bnd.delta, "Mate-graph diameter")->required();
  bounds->add_option("--epsilon", bnd.epsilon, "Failure probability for the quantile bound");
  bounds->add_flag("--json", bnd.json, "JSON output");

  auto* scenarios = app.add_subcommand("scenarios", "List or generate scenario files");
  scenarios->require_subcommand(1);
  scenarios->add_subcommand("list", "List built-in scenarios");
  std::string gen_name;
  std::string gen_out;
  std::uint64_t gen_seed = 1;
  auto* generate = scenarios->add_subcommand("generate", "Write a built-in scenario as JSON");
  generate->add_option("name", gen_name, "Scenario name")->required();
  generate->add_option("--seed", gen_seed, "Seed for randomized layouts");
  generate->add_option("--out", gen_out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (simulate->parsed()) {
    if (!sim_out.empty()) sim.out_dir = sim_out;
    if (!sim_config.empty()) sim.config_path = sim_config;
    return cmd_simulate(sim, std::cout, std::cerr);
  }
  if (replay->parsed()) {
    if (!rep_scenario.empty()) rep.scenario_path = rep_scenario;
    if (!rep_manifest.empty()) rep.manifest_path = rep_manifest;
    if (!rep_out.empty()) rep.out_dir = rep_out;
    return cmd_replay(rep, std::cout, std::cerr);
  }
  if (bounds->parsed()) return cmd_bounds(bnd, std::cout, std::cerr);
  if (generate->parsed()) {
    std::optional<std::filesystem::path> out;
    if (!gen_out.empty()) out = gen_out;
    return cmd_scenarios_generate(gen_name, gen_seed, out, std::cout, std::cerr);
  }
  return cmd_scenarios_list(std::cout);
}
