#pragma once

// Test-only helpers. The oracles here are written against plain vectors and
// trace rows and deliberately share no code with the library algorithms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include "groupsense/netsim.hpp"
#include "groupsense/scenario.hpp"
#include "groupsense/trace.hpp"

namespace gs_test {

using Adjacency = std::vector<std::vector<char>>;

// Sorted component of `v` by breadth-first search.
inline std::vector<std::uint32_t> bfs_component(const Adjacency& adj, std::uint32_t v) {
  std::vector<char> seen(adj.size(), 0);
  std::deque<std::uint32_t> q{v};
  seen[v] = 1;
  std::vector<std::uint32_t> out;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop_front();
    out.push_back(u);
    for (std::uint32_t w = 0; w < adj.size(); ++w) {
      if (adj[u][w] && !seen[w]) {
        seen[w] = 1;
        q.push_back(w);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Components as a set of sorted member lists.
inline std::set<std::vector<std::uint32_t>> bfs_partition(const Adjacency& adj) {
  std::set<std::vector<std::uint32_t>> out;
  for (std::uint32_t v = 0; v < adj.size(); ++v) out.insert(bfs_component(adj, v));
  return out;
}

inline Adjacency within_distance(const std::vector<groupsense::Position>& pos, double d) {
  Adjacency adj(pos.size(), std::vector<char>(pos.size(), 0));
  for (std::size_t a = 0; a < pos.size(); ++a) {
    for (std::size_t b = 0; b < pos.size(); ++b) {
      const double dx = pos[a].x - pos[b].x;
      const double dy = pos[a].y - pos[b].y;
      if (a != b && std::sqrt(dx * dx + dy * dy) <= d) adj[a][b] = 1;
    }
  }
  return adj;
}

// Second implementation of the tau counting rule: replays the trace with its
// own max-merge and counts data transmissions from each beacon until every
// node has taken the new epoch and every node's level-M set equals its
// ground-truth group. Only for runs where every node hears every epoch.
struct OracleEpoch {
  std::uint64_t epoch = 0;
  bool converged = false;
  std::uint64_t tau = 0;
};

inline std::vector<OracleEpoch> oracle_tau(const groupsense::SimTrace& trace,
                                           const std::set<std::vector<std::uint32_t>>& truth) {
  const std::size_t n = trace.meta.nodes;
  const int top = trace.meta.max_level;
  const int thr = trace.meta.mate_threshold;
  std::vector<std::vector<int>> vec(n, std::vector<int>(n, 0));
  std::vector<std::uint64_t> ep(n, 0);
  std::vector<std::vector<int>> lvl(n, std::vector<int>(n, 0));
  auto reset = [&](std::size_t v) {
    std::fill(vec[v].begin(), vec[v].end(), 0);
    vec[v][v] = top;
  };
  for (std::size_t v = 0; v < n; ++v) reset(v);

  auto matches = [&](std::uint64_t k) {
    for (std::size_t v = 0; v < n; ++v) {
      if (ep[v] < k) return false;
      std::vector<std::uint32_t> mates;
      for (std::size_t i = 0; i < n; ++i) {
        if (vec[v][i] == top) mates.push_back(static_cast<std::uint32_t>(i));
      }
      bool found = false;
      for (const auto& g : truth) {
        if (std::find(g.begin(), g.end(), static_cast<std::uint32_t>(v)) != g.end()) found = g == mates;
      }
      if (!found) return false;
    }
    return true;
  };

  std::vector<OracleEpoch> out;
  for (const auto& r : trace.records) {
    using groupsense::TraceKind;
    if (r.kind == TraceKind::beacon_tx) {
      if (out.empty() || r.epoch > out.back().epoch) out.push_back({r.epoch, false, 0});
      continue;
    }
    if (r.kind == TraceKind::tx) {
      if (!out.empty() && !out.back().converged) ++out.back().tau;
      continue;
    }
    if (r.kind == TraceKind::level_change) {
      lvl[r.node][*r.peer] = *r.level;
      continue;
    }
    if (r.kind != TraceKind::rx && r.kind != TraceKind::beacon_rx) continue;
    const std::size_t v = r.node;
    if (r.epoch < ep[v]) continue;
    if (r.epoch > ep[v]) {
      ep[v] = r.epoch;
      reset(v);
    }
    if (r.kind == TraceKind::rx) {
      const std::size_t src = *r.peer;
      const int level = lvl[v][src];
      const auto& pv = trace.payloads.at(static_cast<std::size_t>(r.payload));
      if (level > thr) {
        for (std::size_t i = 0; i < n; ++i) vec[v][i] = std::max<int>(vec[v][i], pv[i]);
      } else {
        vec[v][src] = std::max(vec[v][src], level);
      }
    }
    if (!out.empty() && !out.back().converged && matches(out.back().epoch)) out.back().converged = true;
  }
  return out;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("groupsense_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline groupsense::SimConfig lossless_config(std::uint64_t seed = 1) {
  groupsense::SimConfig cfg;
  cfg.seed = seed;
  cfg.channel = groupsense::ChannelModel::lossless();
  return cfg;
}

}  // namespace gs_test
