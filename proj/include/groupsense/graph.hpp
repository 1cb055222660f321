#pragma once

// Small undirected-graph helpers shared by ground truth and metrics.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <queue>
#include <vector>

namespace groupsense {

using Partition = std::vector<std::vector<std::uint32_t>>;

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

  // Groups sorted by smallest member, members ascending.
  Partition groups() {
    const std::size_t n = parent_.size();
    std::vector<std::size_t> slot(n, n);
    Partition out;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = find(i);
      if (slot[r] == n) {
        slot[r] = out.size();
        out.emplace_back();
      }
      out[slot[r]].push_back(static_cast<std::uint32_t>(i));
    }
    return out;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
};

// Adjacency-matrix graph; small N (tens of nodes) is the only use case.
class Graph {
 public:
  explicit Graph(std::size_t n) : n_(n), adj_(n * n, false) {}

  std::size_t size() const { return n_; }

  void add_edge(std::size_t a, std::size_t b) {
    if (a == b) return;
    adj_[a * n_ + b] = true;
    adj_[b * n_ + a] = true;
  }

  bool has_edge(std::size_t a, std::size_t b) const { return adj_[a * n_ + b]; }

  // Hop distances from `src`; -1 for unreachable.
  std::vector<int> bfs(std::size_t src) const {
    std::vector<int> dist(n_, -1);
    std::queue<std::size_t> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v = 0; v < n_; ++v) {
        if (has_edge(u, v) && dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
      }
    }
    return dist;
  }

  std::vector<std::uint32_t> component_of(std::size_t src) const {
    std::vector<std::uint32_t> out;
    const auto dist = bfs(src);
    for (std::size_t v = 0; v < n_; ++v) {
      if (dist[v] >= 0) out.push_back(static_cast<std::uint32_t>(v));
    }
    return out;
  }

  Partition components() const {
    UnionFind uf(n_);
    for (std::size_t a = 0; a < n_; ++a) {
      for (std::size_t b = a + 1; b < n_; ++b) {
        if (has_edge(a, b)) uf.unite(a, b);
      }
    }
    return uf.groups();
  }

  // Largest eccentricity over all components (0 for edgeless graphs).
  int diameter() const {
    int best = 0;
    for (std::size_t s = 0; s < n_; ++s) {
      for (int d : bfs(s)) best = std::max(best, d);
    }
    return best;
  }

 private:
  std::size_t n_;
  std::vector<bool> adj_;
};

// Group index of every node in `p`.
inline std::vector<std::size_t> group_index(const Partition& p, std::size_t n) {
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t g = 0; g < p.size(); ++g) {
    for (auto v : p[g]) idx[v] = g;
  }
  return idx;
}

}  // namespace groupsense
