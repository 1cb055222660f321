#pragma once

// Mobility scenarios: piecewise-linear rider tracks on a 1-D road (x grows in
// the direction of travel, y is lateral), sink nodes that emit epoch beacons,
// and the ground-truth grouping given by the 20 m rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "groupsense/consensus.hpp"
#include "groupsense/graph.hpp"

namespace groupsense {

inline constexpr int kScenarioFormatMajor = 1;
inline constexpr double kGroupDistanceM = 20.0;

struct Position {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Position& a, const Position& b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Waypoint {
  double t = 0.0;  // s
  double x = 0.0;  // m
  double y = 0.0;  // m
};

class Track {
 public:
  Track() = default;
  explicit Track(std::vector<Waypoint> points) : points_(std::move(points)) {}

  const std::vector<Waypoint>& points() const { return points_; }

  Position at(double t) const {
    if (points_.empty()) return {};
    if (t <= points_.front().t) return {points_.front().x, points_.front().y};
    if (t >= points_.back().t) return {points_.back().x, points_.back().y};
    auto hi = std::upper_bound(points_.begin(), points_.end(), t,
                               [](double v, const Waypoint& w) { return v < w.t; });
    auto lo = hi - 1;
    const double span = hi->t - lo->t;
    const double f = span > 0.0 ? (t - lo->t) / span : 0.0;
    return {lo->x + f * (hi->x - lo->x), lo->y + f * (hi->y - lo->y)};
  }

 private:
  std::vector<Waypoint> points_;
};

struct SinkDef {
  enum class Attachment { follow, fixed };
  Attachment attachment = Attachment::follow;
  std::vector<NodeId> follow;  // riders whose centroid the sink trails
  double behind_m = 10.0;
  Position fixed;
  double phase_ms = 0.0;
  double active_from_s = 0.0;
  std::optional<double> active_until_s;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scenario {
  std::string name;
  double duration_s = 60.0;
  std::vector<Track> tracks;  // one per consensus node
  std::vector<SinkDef> sinks;
  // Run settings carried by the scenario (lowest precedence), e.g.
  // "estimator.th20" or "channel.loss_floor".
  std::map<std::string, std::string> settings;

  std::size_t node_count() const { return tracks.size(); }

  Position node_position(NodeId id, double t) const { return tracks.at(id).at(t); }

  Position sink_position(std::size_t sink, double t) const {
    const SinkDef& s = sinks.at(sink);
    if (s.attachment == SinkDef::Attachment::fixed) return s.fixed;
    Position c;
    for (NodeId id : s.follow) {
      const Position p = node_position(id, t);
      c.x += p.x;
      c.y += p.y;
    }
    const double k = static_cast<double>(s.follow.size());
    return {c.x / k - s.behind_m, c.y / k};
  }

  // Throws ScenarioError with a list of every problem found.
  void validate() const {
    std::vector<std::string> problems;
    if (!(duration_s > 0.0)) problems.push_back("duration_s must be positive");
    if (tracks.empty()) problems.push_back("scenario needs at least one node");
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      const auto& pts = tracks[i].points();
      const std::string where = "nodes[" + std::to_string(i) + "]";
      if (pts.empty()) {
        problems.push_back(where + ": track has no waypoints");
        continue;
      }
      for (std::size_t k = 1; k < pts.size(); ++k) {
        if (pts[k].t < pts[k - 1].t) {
          problems.push_back(where + ": waypoints not time-sorted at index " + std::to_string(k));
          break;
        }
      }
      if (pts.back().t > duration_s + 1e-9) {
        problems.push_back(where + ": waypoint beyond duration_s");
      }
    }
    for (std::size_t i = 0; i < sinks.size(); ++i) {
      const SinkDef& s = sinks[i];
      const std::string where = "sinks[" + std::to_string(i) + "]";
      if (s.attachment == SinkDef::Attachment::follow) {
        if (s.follow.empty()) problems.push_back(where + ": follow list is empty");
        for (NodeId id : s.follow) {
          if (id >= tracks.size()) problems.push_back(where + ": follows unknown node " + std::to_string(id));
        }
      }
      if (s.phase_ms < 0.0) problems.push_back(where + ": phase_ms must be >= 0");
      if (s.active_until_s && *s.active_until_s < s.active_from_s) {
        problems.push_back(where + ": active_until_s before active_from_s");
      }
    }
    if (!problems.empty()) {
      std::string msg = "invalid scenario";
      for (const auto& p : problems) msg += "\n  - " + p;
      throw ScenarioError(msg);
    }
  }
};

// ---------------------------------------------------------------------------
// Ground truth

// Transitive closure of the pairwise <= 20 m relation at time t.
inline Partition ground_truth(const Scenario& sc, double t, double group_distance_m = kGroupDistanceM) {
  const std::size_t n = sc.node_count();
  std::vector<Position> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = sc.node_position(static_cast<NodeId>(i), t);
  UnionFind uf(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (distance(pos[a], pos[b]) <= group_distance_m) uf.unite(a, b);
    }
  }
  return uf.groups();
}

struct TruthChange {
  double t = 0.0;  // s, first instant of the new partition
  Partition groups;
};

// Partition as a step function of time. Changes are located by sampling and
// refined by bisection to well below a millisecond.
class GroundTruthTimeline {
 public:
  GroundTruthTimeline() = default;

  explicit GroundTruthTimeline(const Scenario& sc, double step_s = 0.01) {
    changes_.push_back({0.0, ground_truth(sc, 0.0)});
    double prev_t = 0.0;
    for (double t = step_s; t <= sc.duration_s + 1e-12; t += step_s) {
      Partition p = ground_truth(sc, t);
      if (p != changes_.back().groups) {
        double lo = prev_t;
        double hi = t;
        while (hi - lo > 1e-5) {
          const double mid = 0.5 * (lo + hi);
          if (ground_truth(sc, mid) == changes_.back().groups) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        changes_.push_back({hi, std::move(p)});
      }
      prev_t = t;
    }
  }

  static GroundTruthTimeline constant(Partition p) {
    GroundTruthTimeline tl;
    tl.changes_.push_back({0.0, std::move(p)});
    return tl;
  }

  const Partition& at(double t) const {
    auto it = std::upper_bound(changes_.begin(), changes_.end(), t,
                               [](double v, const TruthChange& c) { return v < c.t; });
    if (it == changes_.begin()) return changes_.front().groups;
    return (it - 1)->groups;
  }

  std::size_t index_at(double t) const {
    auto it = std::upper_bound(changes_.begin(), changes_.end(), t,
                               [](double v, const TruthChange& c) { return v < c.t; });
    return it == changes_.begin() ? 0 : static_cast<std::size_t>(it - changes_.begin() - 1);
  }

  const std::vector<TruthChange>& changes() const { return changes_; }

 private:
  std::vector<TruthChange> changes_;
};

// ---------------------------------------------------------------------------
// Generators

namespace detail {

inline constexpr double kPackSpeed = 10.0;   // m/s
inline constexpr double kRowGap = 2.5;       // m between rows
inline constexpr double kColumnGap = 1.2;    // m between the two columns

// Two-column pack formation; slot 0 is front-left.
inline Position formation_slot(std::size_t slot) {
  const double row = static_cast<double>(slot / 2);
  const double col = static_cast<double>(slot % 2);
  return {-row * kRowGap, col * kColumnGap};
}

// Slow deterministic drift so relative positions vary without RNG.
inline Position drift(std::size_t id, double t, double amplitude) {
  const double k = static_cast<double>(id);
  return {amplitude * std::sin(2.0 * M_PI * t / (17.0 + 3.0 * k) + k),
          0.3 * amplitude * std::sin(2.0 * M_PI * t / (23.0 + 2.0 * k) + 0.5 * k)};
}

// Sample grid plus the given breakpoints, sorted and de-duplicated.
inline std::vector<double> sample_times(double duration, double step, std::vector<double> extra = {}) {
  std::vector<double> ts;
  for (double t = 0.0; t < duration; t += step) ts.push_back(t);
  ts.push_back(duration);
  for (double e : extra) {
    if (e > 0.0 && e < duration) ts.push_back(e);
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
           ts.end());
  return ts;
}

template <typename Fn>
Track track_from(const std::vector<double>& ts, Fn&& pos) {
  std::vector<Waypoint> pts;
  pts.reserve(ts.size());
  for (double t : ts) {
    const Position p = pos(t);
    pts.push_back({t, p.x, p.y});
  }
  return Track(std::move(pts));
}

inline SinkDef follow_sink(std::vector<NodeId> nodes, std::optional<double> until = std::nullopt) {
  SinkDef s;
  s.attachment = SinkDef::Attachment::follow;
  s.follow = std::move(nodes);
  s.behind_m = 10.0;
  s.active_until_s = until;
  return s;
}

// Relative offset that ramps from 0 to `peak` at `speed` from `start`,
// holds, then ramps back to 0 by `end` (symmetrical profile).
inline double out_and_back(double t, double start, double end, double speed, double peak) {
  if (speed <= 0.0 || t <= start || t >= end) return 0.0;
  const double reach = std::min(peak, speed * (end - start) / 2.0);
  const double ramp = reach / speed;
  if (t < start + ramp) return speed * (t - start);
  if (t > end - ramp) return speed * (end - t);
  return reach;
}

}  // namespace detail

// Riders on a table: a straight line with fixed spacing, one fixed sink.
inline Scenario make_static(std::size_t n, double spacing_m, double duration_s = 60.0) {
  if (n < 1) throw std::invalid_argument("make_static: need at least one node");
  if (spacing_m < 0.0) throw std::invalid_argument("make_static: spacing must be >= 0");
  Scenario sc;
  sc.name = "static";
  sc.duration_s = duration_s;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) * spacing_m;
    sc.tracks.emplace_back(std::vector<Waypoint>{{0.0, x, 0.0}, {duration_s, x, 0.0}});
  }
  SinkDef sink;
  sink.attachment = SinkDef::Attachment::fixed;
  sink.fixed = {static_cast<double>(n - 1) * spacing_m / 2.0, 2.0};
  sc.sinks.push_back(sink);
  return sc;
}

// Nodes uniformly placed in a square, rejecting layouts with any pair whose
// distance falls inside (20 - guard, 20 + guard), so the 20 m relation is
// unambiguous for a noisy link estimator. Deterministic in `seed`.
inline Scenario make_random_static(std::size_t n, std::uint64_t seed, double side_m = 45.0,
                                   double guard_m = 6.0, double duration_s = 20.0) {
  if (n < 1) throw std::invalid_argument("make_random_static: need at least one node");
  std::uint64_t state = seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL;
  auto next_unit = [&state] {
    // splitmix64
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  };
  std::vector<Position> pos;
  for (int attempt = 0; attempt < 100000 && pos.size() < n; ++attempt) {
    Position p{next_unit() * side_m, next_unit() * side_m};
    bool ok = true;
    for (const auto& q : pos) {
      const double d = distance(p, q);
      if (d < 1.0 || std::abs(d - kGroupDistanceM) < guard_m) {
        ok = false;
        break;
      }
    }
    if (ok) pos.push_back(p);
  }
  if (pos.size() < n) throw std::runtime_error("make_random_static: could not place nodes");
  Scenario sc;
  sc.name = "random_static";
  sc.duration_s = duration_s;
  for (const auto& p : pos) sc.tracks.emplace_back(std::vector<Waypoint>{{0.0, p.x, p.y}, {duration_s, p.x, p.y}});
  SinkDef sink;
  sink.attachment = SinkDef::Attachment::fixed;
  sink.fixed = {side_m / 2.0, side_m / 2.0};
  sc.sinks.push_back(sink);
  return sc;
}

// A single pack riding together with small relative motion.
inline Scenario make_stable_pack(std::size_t n, double duration_s = 120.0) {
  if (n < 1) throw std::invalid_argument("make_stable_pack: need at least one node");
  Scenario sc;
  sc.name = "stable_pack";
  sc.duration_s = duration_s;
  const auto ts = detail::sample_times(duration_s, 0.5);
  std::vector<NodeId> all;
  for (std::size_t i = 0; i < n; ++i) {
    all.push_back(static_cast<NodeId>(i));
    sc.tracks.push_back(detail::track_from(ts, [i](double t) {
      const Position s = detail::formation_slot(i);
      const Position d = detail::drift(i, t, 1.5);
      return Position{detail::kPackSpeed * t + s.x + d.x, s.y + d.y};
    }));
  }
  sc.sinks.push_back(detail::follow_sink(all));
  return sc;
}

struct BreakawayParams {
  double t_leave = 10.0;
  double t_rejoin = 45.0;
  double v_gap = 5.0;        // m/s relative to the pack
  double max_gap_m = 80.0;   // beyond radio range
  double duration_s = 60.0;
  NodeId rider = 3;
};

// One rider (node 3 by default) rides away from the front of the pack and
// comes back. The pack keeps a single sink.
inline Scenario make_breakaway(std::size_t n, const BreakawayParams& p = {}) {
  if (n < 2) throw std::invalid_argument("make_breakaway: need at least two nodes");
  if (!(p.t_leave >= 0.0 && p.t_leave < p.t_rejoin && p.t_rejoin < p.duration_s)) {
    throw std::invalid_argument("make_breakaway: need 0 <= t_leave < t_rejoin < duration");
  }
  if (p.v_gap < 0.0) throw std::invalid_argument("make_breakaway: v_gap must be >= 0");
  const NodeId rider = std::min<NodeId>(p.rider, static_cast<NodeId>(n - 1));
  Scenario sc;
  sc.name = "breakaway";
  sc.duration_s = p.duration_s;
  const double reach = std::min(p.max_gap_m, p.v_gap * (p.t_rejoin - p.t_leave) / 2.0);
  const double ramp = p.v_gap > 0.0 ? reach / p.v_gap : 0.0;
  const auto ts = detail::sample_times(p.duration_s, 0.5,
                                       {p.t_leave, p.t_leave + ramp, p.t_rejoin - ramp, p.t_rejoin});
  // The rider takes the front-left slot, everybody else fills in behind.
  std::vector<std::size_t> slot(n);
  std::size_t next = 1;
  for (std::size_t i = 0; i < n; ++i) slot[i] = (i == rider) ? 0 : next++;
  std::vector<NodeId> pack;
  for (std::size_t i = 0; i < n; ++i) {
    const bool leaves = i == rider;
    if (!leaves) pack.push_back(static_cast<NodeId>(i));
    sc.tracks.push_back(detail::track_from(ts, [&, i, leaves](double t) {
      const Position s = detail::formation_slot(slot[i]);
      double x = detail::kPackSpeed * t + s.x;
      if (leaves) x += detail::out_and_back(t, p.t_leave, p.t_rejoin, p.v_gap, p.max_gap_m);
      return Position{x, s.y};
    }));
  }
  sc.sinks.push_back(detail::follow_sink(pack));
  return sc;
}

struct PackSplitParams {
  double t_split = 15.0;
  std::size_t front = 6;
  std::size_t back = 4;
  double v_gap = 3.0;
  double max_gap_m = 150.0;
  double duration_s = 90.0;
};

// The back of the pack drops away from the front; one sink per formation.
inline Scenario make_pack_split(std::size_t n, const PackSplitParams& p = {}) {
  if (p.front < 1 || p.back < 1 || p.front + p.back != n) {
    throw std::invalid_argument("make_pack_split: sizes must be positive and sum to n");
  }
  if (p.v_gap < 0.0) throw std::invalid_argument("make_pack_split: v_gap must be >= 0");
  Scenario sc;
  sc.name = "pack_split";
  sc.duration_s = p.duration_s;
  const double ramp = p.v_gap > 0.0 ? p.max_gap_m / p.v_gap : 0.0;
  const auto ts = detail::sample_times(p.duration_s, 0.5, {p.t_split, p.t_split + ramp});
  std::vector<NodeId> a;
  std::vector<NodeId> b;
  for (std::size_t i = 0; i < n; ++i) {
    const bool back = i >= p.front;
    (back ? b : a).push_back(static_cast<NodeId>(i));
    sc.tracks.push_back(detail::track_from(ts, [&, i, back](double t) {
      const Position s = detail::formation_slot(i);
      double x = detail::kPackSpeed * t + s.x;
      if (back && t > p.t_split) x -= std::min(p.max_gap_m, p.v_gap * (t - p.t_split));
      return Position{x, s.y};
    }));
  }
  sc.sinks.push_back(detail::follow_sink(a));
  sc.sinks.push_back(detail::follow_sink(b));
  return sc;
}

struct MergeParams {
  double t_merge = 20.0;      // instant the chasing group closes back to formation
  std::size_t front = 6;
  std::size_t back = 4;
  double initial_gap_m = 100.0;
  double duration_s = 40.0;
  bool beacons_after_merge = false;
};

// Two separated formations; the back one closes the gap and rejoins. Sinks
// stop beaconing before the groups meet unless beacons_after_merge is set.
inline Scenario make_merge(std::size_t n, const MergeParams& p = {}) {
  if (p.front < 1 || p.back < 1 || p.front + p.back != n) {
    throw std::invalid_argument("make_merge: sizes must be positive and sum to n");
  }
  if (!(p.t_merge > 0.0 && p.t_merge < p.duration_s)) {
    throw std::invalid_argument("make_merge: need 0 < t_merge < duration");
  }
  Scenario sc;
  sc.name = "merge";
  sc.duration_s = p.duration_s;
  const auto ts = detail::sample_times(p.duration_s, 0.5, {p.t_merge});
  std::vector<NodeId> a;
  std::vector<NodeId> b;
  for (std::size_t i = 0; i < n; ++i) {
    const bool back = i >= p.front;
    (back ? b : a).push_back(static_cast<NodeId>(i));
    sc.tracks.push_back(detail::track_from(ts, [&, i, back](double t) {
      const Position s = detail::formation_slot(i);
      double x = detail::kPackSpeed * t + s.x;
      if (back) x -= p.initial_gap_m * std::max(0.0, 1.0 - t / p.t_merge);
      return Position{x, s.y};
    }));
  }
  std::optional<double> until;
  if (!p.beacons_after_merge) {
    // Last beacon half a second before the formations first come within
    // group distance, so any deferred beacon still precedes the merge.
    auto closest = [&](double t) {
      const double offset = p.initial_gap_m * std::max(0.0, 1.0 - t / p.t_merge);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < p.front; ++a) {
        for (std::size_t b = p.front; b < n; ++b) {
          const Position pa = detail::formation_slot(a);
          Position pb = detail::formation_slot(b);
          pb.x -= offset;
          best = std::min(best, distance(pa, pb));
        }
      }
      return best;
    };
    double lo = 0.0;
    double hi = p.t_merge;
    if (closest(lo) <= kGroupDistanceM) {
      hi = 0.0;
    } else {
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (closest(mid) <= kGroupDistanceM ? hi : lo) = mid;
      }
    }
    until = std::max(0.0, hi - 0.5);
  }
  sc.sinks.push_back(detail::follow_sink(a, until));
  sc.sinks.push_back(detail::follow_sink(b, until));
  return sc;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Scenario& sc) {
  using nlohmann::json;
  json j;
  j["format_version"] = std::to_string(kScenarioFormatMajor) + ".0";
  j["name"] = sc.name;
  j["duration_s"] = sc.duration_s;
  json nodes = json::array();
  for (std::size_t i = 0; i < sc.tracks.size(); ++i) {
    json track = json::array();
    for (const auto& w : sc.tracks[i].points()) track.push_back({w.t, w.x, w.y});
    nodes.push_back({{"id", i}, {"track", std::move(track)}});
  }
  j["nodes"] = std::move(nodes);
  json sinks = json::array();
  for (const auto& s : sc.sinks) {
    json js;
    if (s.attachment == SinkDef::Attachment::fixed) {
      js["attachment"] = {{"kind", "fixed"}, {"x", s.fixed.x}, {"y", s.fixed.y}};
    } else {
      js["attachment"] = {{"kind", "follow"}, {"nodes", s.follow}, {"behind_m", s.behind_m}};
    }
    js["phase_ms"] = s.phase_ms;
    js["active_from_s"] = s.active_from_s;
    js["active_until_s"] = s.active_until_s ? json(*s.active_until_s) : json(nullptr);
    sinks.push_back(std::move(js));
  }
  j["sinks"] = std::move(sinks);
  j["settings"] = sc.settings;
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  std::vector<std::string> problems;
  auto fail = [&problems] {
    std::string msg = "invalid scenario";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ScenarioError(msg);
  };
  if (!j.is_object()) {
    problems.push_back("top level must be an object");
    fail();
  }
  if (!j.contains("format_version") || !j["format_version"].is_string()) {
    problems.push_back("format_version: required string field");
    fail();
  }
  const std::string version = j["format_version"].get<std::string>();
  const int major = std::atoi(version.c_str());
  if (major != kScenarioFormatMajor) {
    problems.push_back("format_version: unsupported major version '" + version + "'");
    fail();
  }

  Scenario sc;
  try {
    sc.name = j.value("name", std::string("unnamed"));
    if (!j.contains("duration_s") || !j["duration_s"].is_number()) {
      problems.push_back("duration_s: required number");
    } else {
      sc.duration_s = j["duration_s"].get<double>();
    }
    if (!j.contains("nodes") || !j["nodes"].is_array()) {
      problems.push_back("nodes: required array");
    } else {
      const auto& nodes = j["nodes"];
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& jn = nodes[i];
        const std::string where = "nodes[" + std::to_string(i) + "]";
        if (jn.contains("id") && jn["id"].get<std::size_t>() != i) {
          problems.push_back(where + ".id: ids must be 0..N-1 in order");
        }
        if (!jn.contains("track") || !jn["track"].is_array()) {
          problems.push_back(where + ".track: required array of [t, x, y]");
          sc.tracks.emplace_back();
          continue;
        }
        std::vector<Waypoint> pts;
        for (const auto& w : jn["track"]) {
          if (!w.is_array() || w.size() != 3 || !w[0].is_number() || !w[1].is_number() || !w[2].is_number()) {
            problems.push_back(where + ".track: waypoint must be [t, x, y]");
            break;
          }
          pts.push_back({w[0].get<double>(), w[1].get<double>(), w[2].get<double>()});
        }
        sc.tracks.emplace_back(std::move(pts));
      }
    }
    if (j.contains("sinks")) {
      const auto& sinks = j["sinks"];
      for (std::size_t i = 0; i < sinks.size(); ++i) {
        const auto& js = sinks[i];
        const std::string where = "sinks[" + std::to_string(i) + "]";
        SinkDef s;
        const auto& att = js.value("attachment", nlohmann::json::object());
        const std::string kind = att.value("kind", std::string("follow"));
        if (kind == "fixed") {
          s.attachment = SinkDef::Attachment::fixed;
          s.fixed = {att.value("x", 0.0), att.value("y", 0.0)};
        } else if (kind == "follow") {
          s.attachment = SinkDef::Attachment::follow;
          s.follow = att.value("nodes", std::vector<NodeId>{});
          s.behind_m = att.value("behind_m", 10.0);
        } else {
          problems.push_back(where + ".attachment.kind: expected 'follow' or 'fixed'");
        }
        s.phase_ms = js.value("phase_ms", 0.0);
        s.active_from_s = js.value("active_from_s", 0.0);
        if (js.contains("active_until_s") && !js["active_until_s"].is_null()) {
          s.active_until_s = js["active_until_s"].get<double>();
        }
        sc.sinks.push_back(std::move(s));
      }
    }
    if (j.contains("settings")) {
      for (const auto& [k, v] : j["settings"].items()) {
        sc.settings[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    problems.push_back(std::string("type error: ") + e.what());
  }
  if (!problems.empty()) fail();
  sc.validate();
  return sc;
}

}  // namespace groupsense
