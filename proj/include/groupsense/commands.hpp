#pragma once

// Implementation of the groupsim subcommands. Each command writes its
// artifacts to disk and reports through the given streams; main() only
// parses arguments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"

#include "groupsense/config.hpp"
#include "groupsense/metrics.hpp"
#include "groupsense/netsim.hpp"
#include "groupsense/scenario.hpp"
#include "groupsense/trace.hpp"

#ifndef GROUPSENSE_VERSION
#define GROUPSENSE_VERSION "0.0.0"
#endif

namespace groupsense {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInput = 2,
  kExitInvariant = 3,
};

inline constexpr const char* kOutDirEnv = "GROUPSENSE_OUT_DIR";

inline std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "out";
}

// ---------------------------------------------------------------------------
// Named scenarios

struct NamedScenario {
  std::string name;
  std::string description;
  Scenario (*make)(std::uint64_t seed);
};

inline const std::vector<NamedScenario>& scenario_catalog() {
  static const std::vector<NamedScenario> catalog = {
      {"static", "10 nodes on a table, 0.5 m apart, lossless channel",
       [](std::uint64_t) {
         Scenario sc = make_static(10, 0.5, 420.0);
         sc.settings = {{"channel.loss_floor", "0"}, {"channel.distance_loss", "false"}};
         return sc;
       }},
      {"static_line", "12 nodes in a line, 18 m apart (mate path graph)",
       [](std::uint64_t) { return make_static(12, 18.0, 60.0); }},
      {"stable_pack", "10 riders in one pack for 120 s", [](std::uint64_t) { return make_stable_pack(10, 120.0); }},
      {"breakaway", "node 3 rides away from the pack and rejoins", [](std::uint64_t) { return make_breakaway(10); }},
      {"pack_split", "pack splits 6/4, one sink per formation", [](std::uint64_t) { return make_pack_split(10); }},
      {"merge", "two formations merge, beacons stop at the merge",
       [](std::uint64_t) {
         Scenario sc = make_merge(10);
         sc.settings = {{"channel.loss_floor", "0"}, {"channel.distance_loss", "false"}};
         return sc;
       }},
      {"random_static", "random static layout of 12 nodes (uses --seed)",
       [](std::uint64_t seed) { return make_random_static(12, seed); }},
  };
  return catalog;
}

inline const NamedScenario* find_scenario(const std::string& name) {
  for (const auto& s : scenario_catalog()) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Helpers

inline std::optional<std::string> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out << content;
  return static_cast<bool>(out);
}

inline bool ensure_dir(const std::filesystem::path& dir, std::ostream& err) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    err << "error: cannot create output directory " << dir << ": " << ec.message() << '\n';
    return false;
  }
  return true;
}

inline std::string scenario_text(const Scenario& sc) { return to_json(sc).dump(2) + "\n"; }

struct MetricsArtifacts {
  std::string epochs_csv;
  std::string histogram_csv;
  std::string summary_json;
};

inline MetricsArtifacts render_metrics(const MetricsReport& rep, const MetricsConfig& cfg) {
  MetricsArtifacts a;
  std::ostringstream epochs;
  write_epochs_csv(epochs, rep);
  a.epochs_csv = epochs.str();
  std::ostringstream hist;
  write_histogram_csv(hist, rep);
  a.histogram_csv = hist.str();
  a.summary_json = summary_json(rep, cfg).dump(2) + "\n";
  return a;
}

inline bool write_metrics(const std::filesystem::path& dir, const MetricsArtifacts& a, std::ostream& err) {
  for (const auto& [name, body] : {std::pair<const char*, const std::string*>{"epochs.csv", &a.epochs_csv},
                                   {"histogram.csv", &a.histogram_csv},
                                   {"summary.json", &a.summary_json}}) {
    if (!write_file(dir / name, *body)) {
      err << "error: cannot write " << (dir / name) << '\n';
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::filesystem::path scenario_path;
  std::optional<std::filesystem::path> config_path;  // JSON object of settings
  std::vector<std::string> overrides;                // key=value
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> out_dir;
  unsigned runs = 1;
};

struct PreparedRun {
  Scenario scenario;
  RunConfig config;
  nlohmann::json manifest_base;
};

// Loads the scenario and resolves settings. Returns an exit code on failure.
inline std::variant<PreparedRun, int> prepare_run(const SimulateOptions& opt, std::ostream& err) {
  PreparedRun prep;
  const auto text = read_file(opt.scenario_path);
  if (!text) {
    err << "error: cannot read scenario " << opt.scenario_path << '\n';
    return kExitInput;
  }
  try {
    prep.scenario = scenario_from_json(nlohmann::json::parse(*text));
  } catch (const nlohmann::json::parse_error& e) {
    err << "error: scenario " << opt.scenario_path << " is not valid JSON: " << e.what() << '\n';
    return kExitInput;
  } catch (const ScenarioError& e) {
    err << "error: " << opt.scenario_path.string() << ": " << e.what() << '\n';
    return kExitInput;
  }

  std::map<std::string, std::string> file_settings;
  if (opt.config_path) {
    const auto cfg_text = read_file(*opt.config_path);
    if (!cfg_text) {
      err << "error: cannot read config " << *opt.config_path << '\n';
      return kExitInput;
    }
    try {
      const auto j = nlohmann::json::parse(*cfg_text);
      if (!j.is_object()) throw std::invalid_argument("config file must be a JSON object");
      for (const auto& [k, v] : j.items()) file_settings[k] = v.is_string() ? v.get<std::string>() : v.dump();
    } catch (const std::exception& e) {
      err << "error: config " << *opt.config_path << ": " << e.what() << '\n';
      return kExitInput;
    }
  }

  std::map<std::string, std::string> cli_settings;
  try {
    for (const auto& kv : opt.overrides) {
      auto [k, v] = split_assignment(kv);
      cli_settings[k] = v;
    }
  } catch (const SettingError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    apply_settings(prep.config, prep.scenario.settings);
  } catch (const SettingError& e) {
    err << "error: scenario settings: " << e.what() << '\n';
    return kExitInput;
  }
  try {
    apply_settings(prep.config, file_settings);
  } catch (const SettingError& e) {
    err << "error: config file: " << e.what() << '\n';
    return kExitInput;
  }
  try {
    apply_settings(prep.config, cli_settings);
  } catch (const SettingError& e) {
    err << "error: --set: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    prep.config.sim.validate();
  } catch (const std::invalid_argument& e) {
    err << "error: invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  }

  const auto resolved = resolved_settings(prep.config);
  const nlohmann::json resolved_json = resolved;
  auto& m = prep.manifest_base;
  m["tool"] = "groupsim";
  m["tool_version"] = GROUPSENSE_VERSION;
  m["scenario_file"] = opt.scenario_path.filename().string();
  m["scenario_hash"] = hex64(fnv1a64(to_json(prep.scenario).dump()));
  m["config_hash"] = hex64(fnv1a64(resolved_json.dump()));
  m["settings"] = resolved_json;
  m["overrides"] = {{"scenario", prep.scenario.settings}, {"config_file", file_settings}, {"command_line", cli_settings}};
  return prep;
}

struct RunOutcome {
  int code = kExitOk;
  std::uint64_t seed = 0;
  nlohmann::json summary;
};

inline RunOutcome simulate_one(const PreparedRun& prep, std::uint64_t seed, const std::filesystem::path& dir,
                               std::ostream& err) {
  RunOutcome outcome;
  outcome.seed = seed;
  if (!ensure_dir(dir, err)) {
    outcome.code = kExitInput;
    return outcome;
  }
  RunConfig cfg = prep.config;
  cfg.sim.seed = seed;
  SimResult res = run(cfg.sim, prep.scenario);
  const GroundTruthTimeline truth(prep.scenario);
  const MetricsReport rep = analyze(res.trace, truth, cfg.metrics);
  const MetricsArtifacts metrics = render_metrics(rep, cfg.metrics);

  std::ostringstream trace_csv;
  write_trace_csv(trace_csv, res.trace);

  nlohmann::json manifest = prep.manifest_base;
  manifest["seed"] = seed;
  manifest["sim_start_ms"] = format_ms(Duration{0});
  manifest["sim_end_ms"] = format_ms(res.trace.meta.duration);
  manifest["trace_hash"] = hex64(fnv1a64(trace_csv.str()));
  manifest["outputs"] = {"trace.csv", "epochs.csv", "histogram.csv", "summary.json", "scenario.json"};

  const bool ok = write_file(dir / "trace.csv", trace_csv.str()) &&
                  write_file(dir / "scenario.json", scenario_text(prep.scenario)) &&
                  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  if (!ok || !write_metrics(dir, metrics, err)) {
    if (!ok) err << "error: cannot write artifacts to " << dir << '\n';
    outcome.code = kExitInput;
    return outcome;
  }
  outcome.summary = nlohmann::json::parse(metrics.summary_json);
  if (rep.consistency_errors > 0) {
    err << "error: replay disagrees with live simulation state (" << rep.consistency_errors << " mismatches)\n";
    outcome.code = kExitInvariant;
  }
  return outcome;
}

inline int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
  if (opt.runs < 1) {
    err << "error: --runs must be >= 1\n";
    return kExitUsage;
  }
  auto prepared = prepare_run(opt, err);
  if (std::holds_alternative<int>(prepared)) return std::get<int>(prepared);
  const PreparedRun& prep = std::get<PreparedRun>(prepared);
  const std::filesystem::path root = opt.out_dir.value_or(default_out_dir());

  if (opt.runs == 1) {
    const RunOutcome r = simulate_one(prep, opt.seed, root, err);
    if (r.code == kExitOk || r.code == kExitInvariant) {
      out << "wrote " << (root / "trace.csv").string() << " (seed " << opt.seed << ")\n";
    }
    return r.code;
  }

  // Batch: independent seeds in parallel, merged after every run finished.
  std::vector<RunOutcome> outcomes(opt.runs);
  std::vector<std::ostringstream> errs(opt.runs);
  const unsigned workers = std::max(1u, std::min(opt.runs, std::thread::hardware_concurrency()));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (unsigned i = w; i < opt.runs; i += workers) {
          const std::uint64_t seed = opt.seed + i;
          outcomes[i] = simulate_one(prep, seed, root / ("seed_" + std::to_string(seed)), errs[i]);
        }
      });
    }
  }
  int code = kExitOk;
  nlohmann::json batch = nlohmann::json::array();
  for (unsigned i = 0; i < opt.runs; ++i) {
    err << errs[i].str();
    code = std::max(code, outcomes[i].code);
    batch.push_back({{"seed", outcomes[i].seed}, {"exit_code", outcomes[i].code}, {"summary", outcomes[i].summary}});
  }
  if (!ensure_dir(root, err) || !write_file(root / "batch.json", batch.dump(2) + "\n")) return kExitInput;
  out << "wrote " << opt.runs << " runs under " << root.string() << '\n';
  return code;
}

// ---------------------------------------------------------------------------
// replay

struct ReplayOptions {
  std::filesystem::path trace_path;
  std::optional<std::filesystem::path> scenario_path;  // default: sibling scenario.json
  std::optional<std::filesystem::path> manifest_path;  // default: sibling manifest.json
  std::optional<std::filesystem::path> out_dir;        // default: <trace dir>/replay
};

inline int cmd_replay(const ReplayOptions& opt, std::ostream& out, std::ostream& err) {
  const auto dir = opt.trace_path.parent_path();
  const auto scenario_path = opt.scenario_path.value_or(dir / "scenario.json");
  const auto manifest_path = opt.manifest_path.value_or(dir / "manifest.json");

  std::ifstream in(opt.trace_path, std::ios::binary);
  if (!in) {
    err << "error: cannot read trace " << opt.trace_path << '\n';
    return kExitInput;
  }
  SimTrace trace;
  try {
    trace = read_trace_csv(in);
  } catch (const TraceFormatError& e) {
    err << "error: " << opt.trace_path.string() << ": " << e.what() << '\n';
    return kExitInput;
  }
  for (const auto& p : trace.problems) err << "warning: " << opt.trace_path.string() << ": " << p << '\n';

  const auto sc_text = read_file(scenario_path);
  if (!sc_text) {
    err << "error: cannot read scenario " << scenario_path << " (needed for ground truth)\n";
    return kExitInput;
  }
  Scenario scenario;
  try {
    scenario = scenario_from_json(nlohmann::json::parse(*sc_text));
  } catch (const std::exception& e) {
    err << "error: " << scenario_path.string() << ": " << e.what() << '\n';
    return kExitInput;
  }
  if (scenario.node_count() != trace.meta.nodes) {
    err << "error: scenario has " << scenario.node_count() << " nodes, trace has " << trace.meta.nodes << '\n';
    return kExitInput;
  }

  RunConfig cfg;
  if (const auto m_text = read_file(manifest_path)) {
    try {
      const auto m = nlohmann::json::parse(*m_text);
      for (const auto& [k, v] : m.at("settings").items()) {
        if (k.starts_with("metrics.")) apply_setting(cfg, k, v.get<std::string>());
      }
    } catch (const std::exception& e) {
      err << "error: manifest " << manifest_path << ": " << e.what() << '\n';
      return kExitInput;
    }
  } else {
    apply_settings(cfg, scenario.settings);
  }

  const GroundTruthTimeline truth(scenario);
  const MetricsReport rep = analyze(trace, truth, cfg.metrics);
  const auto out_dir = opt.out_dir.value_or(dir / "replay");
  if (!ensure_dir(out_dir, err) || !write_metrics(out_dir, render_metrics(rep, cfg.metrics), err)) return kExitInput;
  if (rep.partial) err << "warning: trace is partial; metrics cover the readable rows only\n";
  out << "wrote metrics to " << out_dir.string() << (rep.partial ? " (partial)" : "") << '\n';
  if (rep.consistency_errors > 0) {
    err << "error: trace is internally inconsistent (" << rep.consistency_errors << " mismatches)\n";
    return kExitInvariant;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bounds

struct BoundsOptions {
  double n = 10;
  double delta = 1;
  double epsilon = 0.1;
  bool json = false;
};

inline int cmd_bounds(const BoundsOptions& opt, std::ostream& out, std::ostream& err) {
  const BoundParams p{opt.n, opt.delta, opt.epsilon};
  double expected = 0;
  double quantile = 0;
  double expected10 = 0;
  double quantile10 = 0;
  try {
    expected = bound_expected_tau(p);
    quantile = bound_tau_with_confidence(p);
    expected10 = bound_expected_tau(p, LogBase::base10);
    quantile10 = bound_tau_with_confidence(p, LogBase::base10);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (opt.json) {
    nlohmann::json j{{"N", opt.n},
                     {"delta", opt.delta},
                     {"epsilon", opt.epsilon},
                     {"expected_tau_ln", expected},
                     {"tau_quantile_ln", quantile},
                     {"expected_tau_log10", expected10},
                     {"tau_quantile_log10", quantile10}};
    out << j.dump(2) << '\n';
    return kExitOk;
  }
  char line[160];
  std::snprintf(line, sizeof line, "N=%g Delta=%g epsilon=%g\n", opt.n, opt.delta, opt.epsilon);
  out << line;
  out << "bound                      ln        log10\n";
  std::snprintf(line, sizeof line, "E[tau] <            %10.4f %10.4f\n", expected, expected10);
  out << line;
  std::snprintf(line, sizeof line, "tau (p >= 1-eps) <  %10.4f %10.4f\n", quantile, quantile10);
  out << line;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// scenarios

inline int cmd_scenarios_list(std::ostream& out) {
  for (const auto& s : scenario_catalog()) out << std::left << std::setw(16) << s.name << s.description << '\n';
  return kExitOk;
}

inline int cmd_scenarios_generate(const std::string& name, std::uint64_t seed,
                                  const std::optional<std::filesystem::path>& out_path, std::ostream& out,
                                  std::ostream& err) {
  const NamedScenario* s = find_scenario(name);
  if (!s) {
    err << "error: unknown scenario '" << name << "' (see 'scenarios list')\n";
    return kExitUsage;
  }
  Scenario sc = s->make(seed);
  sc.name = name;
  const std::string text = scenario_text(sc);
  if (!out_path) {
    out << text;
    return kExitOk;
  }
  if (out_path->has_parent_path() && !ensure_dir(out_path->parent_path(), err)) return kExitInput;
  if (!write_file(*out_path, text)) {
    err << "error: cannot write " << *out_path << '\n';
    return kExitInput;
  }
  out << "wrote " << out_path->string() << '\n';
  return kExitOk;
}

}  // namespace groupsense
