#pragma once

// Convergence and detection metrics computed by replaying a trace.
//
// The replay rebuilds every node's consensus state from the rows alone
// (received vectors, beacons and estimator level changes), so the same code
// serves freshly simulated traces and traces read back from disk.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "groupsense/consensus.hpp"
#include "groupsense/graph.hpp"
#include "groupsense/scenario.hpp"
#include "groupsense/trace.hpp"

namespace groupsense {

// ---------------------------------------------------------------------------
// Convergence bounds for random-broadcast max consensus.
//
// E[tau] < N * Delta * (1 + log N) and, with probability 1 - eps,
// tau < N * Delta * (log N + log(Delta / eps)). The log base is not fixed by
// the source of these bounds; natural log is the default and base 10 is
// available for comparison.

enum class LogBase { natural, base10 };

struct BoundParams {
  double n = 1.0;
  double delta = 1.0;
  double epsilon = 0.1;

  void validate() const {
    if (!(n >= 1.0)) throw std::invalid_argument("bounds: N must be >= 1");
    if (!(delta >= 1.0)) throw std::invalid_argument("bounds: Delta must be >= 1");
  }
};

inline double log_in(double x, LogBase base) { return base == LogBase::natural ? std::log(x) : std::log10(x); }

inline double bound_expected_tau(const BoundParams& p, LogBase base = LogBase::natural) {
  p.validate();
  return p.n * p.delta * (1.0 + log_in(p.n, base));
}

inline double bound_tau_with_confidence(const BoundParams& p, LogBase base = LogBase::natural) {
  p.validate();
  if (!(p.epsilon > 0.0 && p.epsilon < 1.0)) throw std::invalid_argument("bounds: epsilon must be in (0, 1)");
  return p.n * p.delta * (log_in(p.n, base) + log_in(p.delta / p.epsilon, base));
}

// ---------------------------------------------------------------------------
// Mate graph

using LevelMatrix = std::vector<std::vector<int>>;  // [observer][neighbour]

// Undirected graph with an edge wherever either endpoint rates the other as
// a mate.
inline Graph mate_graph(const LevelMatrix& levels, const ProximityScale& scale) {
  Graph g(levels.size());
  for (std::size_t a = 0; a < levels.size(); ++a) {
    for (std::size_t b = 0; b < levels[a].size(); ++b) {
      if (a != b && scale.is_mate_level(levels[a][b])) g.add_edge(a, b);
    }
  }
  return g;
}

inline int mate_graph_diameter(const LevelMatrix& levels, const ProximityScale& scale) {
  return mate_graph(levels, scale).diameter();
}

// True when every node's mate set equals its group in `truth`.
inline bool groups_match(const std::vector<NodeState>& states, const Partition& truth, const ProximityScale& scale) {
  const std::size_t n = states.size();
  const auto gidx = group_index(truth, n);
  for (std::size_t v = 0; v < n; ++v) {
    const ProximityVector& b = states[v].vector;
    for (std::size_t i = 0; i < n; ++i) {
      const bool mate = i == v || b[i] >= scale.max_level;
      if (mate != (gidx[i] == gidx[v])) return false;
    }
  }
  return true;
}

inline double agreement_fraction(const std::vector<NodeState>& states, const Partition& truth,
                                 const ProximityScale& scale) {
  const std::size_t n = states.size();
  if (n == 0) return 1.0;
  const auto gidx = group_index(truth, n);
  std::size_t ok = 0;
  for (std::size_t v = 0; v < n; ++v) {
    bool good = true;
    for (std::size_t i = 0; i < n && good; ++i) {
      const bool mate = i == v || states[v].vector[i] >= scale.max_level;
      good = mate == (gidx[i] == gidx[v]);
    }
    ok += good ? 1 : 0;
  }
  return static_cast<double>(ok) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Reports

struct MetricsConfig {
  Duration warmup = std::chrono::seconds(2);
  // A ground-truth change must persist this long to count as an event.
  Duration min_hold = std::chrono::seconds(1);
  double epsilon = 0.1;
};

struct ConvergenceRecord {
  Epoch epoch = 0;
  Duration start{0};
  Duration end{0};
  bool complete = false;   // epoch ended by the next beacon, not by trace end
  bool converged = false;
  bool counted = false;    // after warm-up and with a known outcome
  std::uint64_t tau = 0;   // data broadcasts from epoch start to convergence
  Duration time_to_converge{0};
  double agreement_at_end = 0.0;
  int delta_c = 0;
};

enum class TruthEventKind { split, merge, regroup };

inline std::string_view to_string(TruthEventKind k) {
  switch (k) {
    case TruthEventKind::split: return "split";
    case TruthEventKind::merge: return "merge";
    case TruthEventKind::regroup: return "regroup";
  }
  return "?";
}

struct DetectionEvent {
  TruthEventKind kind = TruthEventKind::regroup;
  Duration event_time{0};
  Partition groups;
  bool detected = false;
  Duration detection_time{0};

  double latency_s() const { return std::chrono::duration<double>(detection_time - event_time).count(); }
};

struct DetectionReport {
  std::vector<DetectionEvent> events;
};

struct TrafficSummary {
  std::vector<std::uint64_t> tx_per_node;
  LevelMatrix rx_per_pair;  // [receiver][source]
  std::uint64_t data_pairs = 0;
  std::uint64_t data_delivered = 0;
  std::uint64_t data_lost = 0;
  std::uint64_t data_collided = 0;

  double loss_rate() const {
    return data_pairs == 0 ? 0.0 : static_cast<double>(data_lost + data_collided) / static_cast<double>(data_pairs);
  }
};

struct MetricsReport {
  std::size_t nodes = 0;
  Duration duration{0};
  std::vector<ConvergenceRecord> epochs;
  DetectionReport detection;
  TrafficSummary traffic;
  bool partial = false;
  std::vector<std::string> problems;
  std::uint64_t consistency_errors = 0;

  std::vector<std::uint64_t> counted_taus() const {
    std::vector<std::uint64_t> out;
    for (const auto& e : epochs) {
      if (e.counted && e.converged) out.push_back(e.tau);
    }
    return out;
  }

  std::size_t counted_epochs() const {
    return static_cast<std::size_t>(std::count_if(epochs.begin(), epochs.end(), [](const auto& e) { return e.counted; }));
  }

  std::size_t converged_epochs() const {
    return static_cast<std::size_t>(
        std::count_if(epochs.begin(), epochs.end(), [](const auto& e) { return e.counted && e.converged; }));
  }
};

inline double mean_of(const std::vector<std::uint64_t>& v) {
  if (v.empty()) return 0.0;
  return static_cast<double>(std::accumulate(v.begin(), v.end(), std::uint64_t{0})) / static_cast<double>(v.size());
}

// Nearest-rank empirical quantile.
inline double quantile_of(std::vector<std::uint64_t> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return static_cast<double>(v[std::clamp<std::size_t>(rank, 1, v.size()) - 1]);
}

// ---------------------------------------------------------------------------
// Replay

inline MetricsReport analyze(const SimTrace& trace, const GroundTruthTimeline& truth, const MetricsConfig& cfg = {}) {
  const std::size_t n = trace.meta.nodes;
  const ProximityScale scale = trace.meta.scale();
  MetricsReport rep;
  rep.nodes = n;
  rep.duration = trace.meta.duration;
  rep.partial = !trace.complete;
  rep.problems = trace.problems;
  rep.traffic.tx_per_node.assign(n, 0);
  rep.traffic.rx_per_pair.assign(n, std::vector<int>(n, 0));

  std::vector<NodeState> states;
  for (std::size_t i = 0; i < n; ++i) states.push_back(make_node_state(static_cast<NodeId>(i), n, scale));
  LevelMatrix levels(n, std::vector<int>(n, 0));

  auto seconds = [](Duration d) { return std::chrono::duration<double>(d).count(); };

  // Ground-truth events that persist at least min_hold.
  const auto& changes = truth.changes();
  struct Pending {
    std::size_t truth_index;
    DetectionEvent ev;
    bool started = false;
  };
  std::vector<Pending> pending;
  // A blip that reverts to the last held partition is not an event either.
  const Partition* held = changes.empty() ? nullptr : &changes.front().groups;
  for (std::size_t c = 1; c < changes.size(); ++c) {
    const double t = changes[c].t;
    const double next = c + 1 < changes.size() ? changes[c + 1].t : seconds(trace.meta.duration);
    if (next - t < seconds(cfg.min_hold) && c + 1 < changes.size()) continue;
    if (changes[c].groups == *held) continue;
    DetectionEvent ev;
    const auto before = held->size();
    const auto after = changes[c].groups.size();
    held = &changes[c].groups;
    ev.kind = after > before ? TruthEventKind::split : after < before ? TruthEventKind::merge : TruthEventKind::regroup;
    ev.event_time = Duration(static_cast<std::int64_t>(std::llround(t * 1e6)));
    ev.groups = changes[c].groups;
    pending.push_back({c, std::move(ev), false});
  }
  std::size_t next_event = 0;

  // Pre-scan: which nodes had a frame of epoch >= K addressed to them while
  // epoch K was current. A node nothing reached cannot have reset, so it is
  // only required to agree with the ground truth.
  std::vector<std::vector<char>> reached;
  {
    std::optional<Epoch> current;
    for (const TraceRecord& r : trace.records) {
      if (r.kind == TraceKind::beacon_tx && (!current || r.epoch > *current)) {
        current = r.epoch;
        reached.emplace_back(n, 0);
        continue;
      }
      if (!current || r.node >= n || r.epoch < *current) continue;
      if (r.kind == TraceKind::rx || r.kind == TraceKind::beacon_rx || r.kind == TraceKind::loss ||
          r.kind == TraceKind::collision) {
        reached.back()[r.node] = 1;
      }
    }
  }
  std::size_t epoch_index = 0;

  std::optional<ConvergenceRecord> open;
  auto close_epoch = [&](Duration t, bool complete) {
    if (!open) return;
    open->end = t;
    open->complete = complete;
    const Partition& p = truth.at(seconds(t));
    open->agreement_at_end = agreement_fraction(states, p, scale);
    open->delta_c = mate_graph_diameter(levels, scale);
    open->counted = open->start >= cfg.warmup && (open->complete || open->converged);
    rep.epochs.push_back(*open);
    open.reset();
  };

  // Detection: events resolve in order. An event is missed when the next
  // event starts before every node agrees with it.
  auto step_events = [&](Duration t, bool state_changed) {
    while (next_event < pending.size()) {
      Pending& p = pending[next_event];
      if (p.ev.event_time > t) return;
      const bool superseded = next_event + 1 < pending.size() && pending[next_event + 1].ev.event_time <= t;
      const auto& target = changes[p.truth_index].groups;
      if (!p.started) {
        p.started = true;
        if (groups_match(states, target, scale)) {
          p.ev.detected = true;
          p.ev.detection_time = p.ev.event_time;
          ++next_event;
          continue;
        }
      } else if (!superseded && state_changed && groups_match(states, target, scale)) {
        p.ev.detected = true;
        p.ev.detection_time = t;
        ++next_event;
        continue;
      }
      if (superseded) {
        ++next_event;
        continue;
      }
      return;
    }
  };

  auto check_convergence = [&](Duration t) {
    if (!open || open->converged) return;
    const auto& must_reset = reached[epoch_index];
    // An epoch that reached nobody (the trace ends right after the beacon)
    // has no observable outcome.
    if (std::find(must_reset.begin(), must_reset.end(), 1) == must_reset.end()) return;
    for (std::size_t v = 0; v < n; ++v) {
      if (must_reset[v] && states[v].epoch < open->epoch) return;
    }
    if (groups_match(states, truth.at(seconds(t)), scale)) {
      open->converged = true;
      open->time_to_converge = t - open->start;
    }
  };

  for (const TraceRecord& r : trace.records) {
    // State is constant between rows, so events starting up to this row are
    // judged on the state left by the previous one.
    step_events(r.time, false);
    if (r.node >= n && r.kind != TraceKind::beacon_tx) {
      rep.problems.push_back("row references unknown node " + std::to_string(r.node));
      rep.partial = true;
      continue;
    }
    bool changed = false;
    switch (r.kind) {
      case TraceKind::tx:
        ++rep.traffic.tx_per_node[r.node];
        if (open && !open->converged) ++open->tau;
        break;
      case TraceKind::beacon_tx:
        if (!open || r.epoch > open->epoch) {
          if (open) ++epoch_index;
          close_epoch(r.time, true);
          ConvergenceRecord rec;
          rec.epoch = r.epoch;
          rec.start = r.time;
          open = rec;
          changed = true;
        }
        break;
      case TraceKind::rx: {
        const NodeId src = *r.peer;
        if (src >= n) break;
        ++rep.traffic.data_pairs;
        ++rep.traffic.data_delivered;
        ++rep.traffic.rx_per_pair[r.node][src];
        const int level = levels[r.node][src];
        if (r.level && *r.level != level && trace.complete) ++rep.consistency_errors;
        const DataPacket pkt{src, r.epoch, trace.payload(r)};
        handle_data_packet(states[r.node], pkt, level, scale);
        changed = true;
        break;
      }
      case TraceKind::beacon_rx:
        handle_beacon(states[r.node], BeaconPacket{r.epoch}, scale);
        changed = true;
        break;
      case TraceKind::collision:
        if (*r.peer < n) {
          ++rep.traffic.data_pairs;
          ++rep.traffic.data_collided;
        }
        break;
      case TraceKind::loss:
        if (*r.peer < n) {
          ++rep.traffic.data_pairs;
          ++rep.traffic.data_lost;
        }
        break;
      case TraceKind::epoch_change:
        if (trace.complete && states[r.node].epoch != r.epoch) ++rep.consistency_errors;
        break;
      case TraceKind::level_change:
        if (*r.peer < n) levels[r.node][*r.peer] = *r.level;
        break;
    }
    if (changed) {
      check_convergence(r.time);
      step_events(r.time, true);
    }
  }
  close_epoch(trace.meta.duration, false);
  step_events(trace.meta.duration, false);
  for (auto& p : pending) rep.detection.events.push_back(std::move(p.ev));
  return rep;
}

inline std::vector<ConvergenceRecord> measure_tau(const SimTrace& trace, const GroundTruthTimeline& truth,
                                                  const MetricsConfig& cfg = {}) {
  return analyze(trace, truth, cfg).epochs;
}

inline DetectionReport detection_latency(const SimTrace& trace, const GroundTruthTimeline& truth,
                                         const MetricsConfig& cfg = {}) {
  return analyze(trace, truth, cfg).detection;
}

// ---------------------------------------------------------------------------
// Output

inline void write_epochs_csv(std::ostream& out, const MetricsReport& rep) {
  out << "epoch,start_ms,end_ms,complete,counted,converged,tau,time_to_converge_ms,agreement_at_end,delta_c\n";
  char buf[32];
  for (const auto& e : rep.epochs) {
    std::snprintf(buf, sizeof buf, "%.4f", e.agreement_at_end);
    out << e.epoch << ',' << format_ms(e.start) << ',' << format_ms(e.end) << ',' << (e.complete ? 1 : 0) << ','
        << (e.counted ? 1 : 0) << ',' << (e.converged ? 1 : 0) << ',' << e.tau << ','
        << (e.converged ? format_ms(e.time_to_converge) : std::string()) << ',' << buf << ',' << e.delta_c << '\n';
  }
}

inline void write_histogram_csv(std::ostream& out, const MetricsReport& rep, std::uint64_t bin_width = 1) {
  out << "tau_lo,tau_hi,count\n";
  const auto taus = rep.counted_taus();
  if (taus.empty()) return;
  const std::uint64_t hi = *std::max_element(taus.begin(), taus.end());
  std::vector<std::uint64_t> bins(hi / bin_width + 1, 0);
  for (auto t : taus) ++bins[t / bin_width];
  for (std::size_t b = 0; b < bins.size(); ++b) {
    out << b * bin_width << ',' << (b + 1) * bin_width - 1 << ',' << bins[b] << '\n';
  }
}

inline nlohmann::json summary_json(const MetricsReport& rep, const MetricsConfig& cfg) {
  using nlohmann::json;
  json j;
  const auto taus = rep.counted_taus();
  const double secs = std::chrono::duration<double>(rep.duration).count();
  int delta_max = 1;
  int delta_min = 0;
  bool first = true;
  for (const auto& e : rep.epochs) {
    if (!e.counted) continue;
    delta_max = std::max(delta_max, e.delta_c);
    delta_min = first ? e.delta_c : std::min(delta_min, e.delta_c);
    first = false;
  }
  j["nodes"] = rep.nodes;
  j["duration_ms"] = format_ms(rep.duration);
  j["partial"] = rep.partial;
  j["problems"] = rep.problems;
  j["consistency_errors"] = rep.consistency_errors;
  j["epochs"] = {{"total", rep.epochs.size()},
                 {"counted", rep.counted_epochs()},
                 {"converged", rep.converged_epochs()},
                 {"warmup_ms", format_ms(cfg.warmup)}};
  j["tau"] = {{"samples", taus.size()},
              {"mean", mean_of(taus)},
              {"p50", quantile_of(taus, 0.5)},
              {"p90", quantile_of(taus, 0.9)},
              {"p99", quantile_of(taus, 0.99)},
              {"max", taus.empty() ? 0.0 : quantile_of(taus, 1.0)}};
  j["delta_c"] = {{"min", delta_min}, {"max", delta_max}};
  json bounds = json::array();
  if (rep.nodes >= 1) {
    for (int d = 1; d <= delta_max; ++d) {
      const BoundParams p{static_cast<double>(rep.nodes), static_cast<double>(d), cfg.epsilon};
      bounds.push_back({{"N", rep.nodes},
                        {"delta", d},
                        {"epsilon", cfg.epsilon},
                        {"expected_tau_ln", bound_expected_tau(p)},
                        {"tau_quantile_ln", bound_tau_with_confidence(p)},
                        {"expected_tau_log10", bound_expected_tau(p, LogBase::base10)},
                        {"tau_quantile_log10", bound_tau_with_confidence(p, LogBase::base10)}});
    }
  }
  j["bounds"] = std::move(bounds);
  const auto& tr = rep.traffic;
  std::uint64_t tx_total = std::accumulate(tr.tx_per_node.begin(), tr.tx_per_node.end(), std::uint64_t{0});
  std::uint64_t rx_total = tr.data_delivered;
  const double pairs = rep.nodes > 1 ? static_cast<double>(rep.nodes * (rep.nodes - 1)) : 1.0;
  j["traffic"] = {{"tx_per_node_per_s", secs > 0 && rep.nodes ? static_cast<double>(tx_total) / rep.nodes / secs : 0.0},
                  {"rx_per_link_per_s", secs > 0 ? static_cast<double>(rx_total) / pairs / secs : 0.0},
                  {"data_pairs", tr.data_pairs},
                  {"delivered", tr.data_delivered},
                  {"lost", tr.data_lost},
                  {"collided", tr.data_collided},
                  {"loss_rate", tr.loss_rate()}};
  json events = json::array();
  for (const auto& e : rep.detection.events) {
    json je{{"kind", to_string(e.kind)},
            {"event_ms", format_ms(e.event_time)},
            {"groups", e.groups},
            {"detected", e.detected}};
    if (e.detected) {
      je["detection_ms"] = format_ms(e.detection_time);
      je["latency_s"] = e.latency_s();
    }
    events.push_back(std::move(je));
  }
  j["detection"] = std::move(events);
  return j;
}

}  // namespace groupsense
