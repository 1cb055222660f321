#pragma once

// Max-consensus state machines for live group detection.
//
// A node keeps one proximity level per node of the network. Levels only grow
// between resets (component-wise max), so each node eventually learns every
// node it is transitively "mate" with. Epoch stamps carried by data packets
// and sink beacons trigger periodic resets, which lets split groups forget
// members that left.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace groupsense {

using NodeId = std::uint32_t;
using Epoch = std::uint64_t;
using Level = std::uint8_t;

// Proximity levels run from 0 (unknown) to max_level. A received vector is
// merged only when the link level to its sender is strictly above
// mate_threshold.
struct ProximityScale {
  int max_level = 3;
  int mate_threshold = 2;

  void validate() const {
    if (max_level < 1 || max_level > 255) {
      throw std::invalid_argument("max_level must be in [1, 255]");
    }
    // M = 1 (pure boolean SGC) has no room for a threshold strictly inside
    // (0, M); threshold 0 then means "every neighbour is a mate".
    if (max_level == 1 ? mate_threshold != 0
                       : (mate_threshold < 1 || mate_threshold >= max_level)) {
      throw std::invalid_argument("mate_threshold must satisfy 0 < threshold < max_level");
    }
  }

  bool is_mate_level(int level) const { return level > mate_threshold; }

  friend bool operator==(const ProximityScale&, const ProximityScale&) = default;
};

inline ProximityScale boolean_scale() { return ProximityScale{1, 0}; }

class ProximityVector {
 public:
  ProximityVector() = default;
  explicit ProximityVector(std::size_t n) : levels_(n, 0) {}
  explicit ProximityVector(std::vector<Level> levels) : levels_(std::move(levels)) {}

  std::size_t size() const { return levels_.size(); }
  Level operator[](std::size_t i) const { return levels_[i]; }
  Level& operator[](std::size_t i) { return levels_[i]; }
  std::span<const Level> levels() const { return levels_; }

  auto begin() const { return levels_.begin(); }
  auto end() const { return levels_.end(); }

  friend bool operator==(const ProximityVector&, const ProximityVector&) = default;

 private:
  std::vector<Level> levels_;
};

// Initial vector of node `self`: the top level at its own index, 0 elsewhere.
inline ProximityVector sgc_init(NodeId self, std::size_t n, const ProximityScale& scale = {}) {
  if (self >= n) {
    throw std::invalid_argument("node id " + std::to_string(self) + " out of range for " +
                                std::to_string(n) + " nodes");
  }
  ProximityVector v(n);
  v[self] = static_cast<Level>(scale.max_level);
  return v;
}

inline ProximityVector merge_max(const ProximityVector& a, const ProximityVector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("merge_max: vector length mismatch");
  }
  ProximityVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = std::max(a[i], b[i]);
  }
  return out;
}

struct DataPacket {
  NodeId sender = 0;
  Epoch epoch = 0;
  ProximityVector vector;
};

struct BeaconPacket {
  Epoch epoch = 0;
};

struct NodeState {
  NodeId self = 0;
  Epoch epoch = 0;
  ProximityVector vector;

  friend bool operator==(const NodeState&, const NodeState&) = default;
};

inline NodeState make_node_state(NodeId self, std::size_t n, const ProximityScale& scale = {}) {
  return NodeState{self, 0, sgc_init(self, n, scale)};
}

// What a data packet did to the receiving node.
enum class DataOutcome {
  merged,          // sender is a mate, vector merged
  proximity_only,  // non-mate, only the sender's own entry raised
  stale,           // packet epoch older than ours, ignored
  malformed,       // wrong vector length, dropped
};

struct HandleResult {
  DataOutcome outcome = DataOutcome::merged;
  bool epoch_advanced = false;
};

// Shared by data packets and beacons: strictly newer epoch resets the vector.
inline bool advance_epoch(NodeState& state, Epoch epoch, const ProximityScale& scale) {
  if (epoch <= state.epoch) {
    return false;
  }
  state.epoch = epoch;
  state.vector = sgc_init(state.self, state.vector.size(), scale);
  return true;
}

inline HandleResult handle_data_packet(NodeState& state, const DataPacket& pkt, int proxim,
                                       const ProximityScale& scale = {}) {
  HandleResult result;
  const std::size_t n = state.vector.size();
  if (pkt.vector.size() != n || pkt.sender >= n) {
    result.outcome = DataOutcome::malformed;
    return result;
  }
  if (pkt.epoch < state.epoch) {
    result.outcome = DataOutcome::stale;
    return result;
  }
  // Reset happens before the update, so a same-call proximity entry survives.
  result.epoch_advanced = advance_epoch(state, pkt.epoch, scale);

  const int level = std::clamp(proxim, 0, scale.max_level);
  if (scale.is_mate_level(level)) {
    for (std::size_t i = 0; i < n; ++i) {
      state.vector[i] = std::max(state.vector[i], std::min<Level>(pkt.vector[i], scale.max_level));
    }
    result.outcome = DataOutcome::merged;
  } else {
    Level& entry = state.vector[pkt.sender];
    entry = std::max(entry, static_cast<Level>(level));
    result.outcome = DataOutcome::proximity_only;
  }
  return result;
}

inline bool handle_beacon(NodeState& state, const BeaconPacket& beacon,
                          const ProximityScale& scale = {}) {
  return advance_epoch(state, beacon.epoch, scale);
}

struct GroupView {
  std::vector<NodeId> mates;           // sorted, always contains self
  std::map<NodeId, int> observed;      // 0 < level < max_level
};

inline GroupView extract_groups(const ProximityVector& vector, NodeId self,
                                const ProximityScale& scale = {}) {
  GroupView view;
  for (std::size_t i = 0; i < vector.size(); ++i) {
    const int level = vector[i];
    const auto id = static_cast<NodeId>(i);
    if (level >= scale.max_level || id == self) {
      view.mates.push_back(id);
    } else if (level > 0) {
      view.observed.emplace(id, level);
    }
  }
  return view;
}

}  // namespace groupsense
