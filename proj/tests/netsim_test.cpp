#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "groupsense/netsim.hpp"
#include "groupsense/trace.hpp"

#include "support.hpp"

using namespace groupsense;
using namespace std::chrono_literals;

namespace {

std::string csv(const SimTrace& t) {
  std::ostringstream out;
  write_trace_csv(out, t);
  return out.str();
}

Scenario line_with_fixed_sink(std::size_t n, double spacing, Position sink, double duration) {
  Scenario sc = make_static(n, spacing, duration);
  sc.sinks[0].fixed = sink;
  return sc;
}

double secs(Duration d) { return std::chrono::duration<double>(d).count(); }

}  // namespace

TEST(Channel, ExpectedEdAnchors) {
  const ChannelModel ch;
  EXPECT_NEAR(ch.expected_ed(20.0), 8.0, 1e-12);
  EXPECT_NEAR(ch.expected_ed(30.0), 5.0, 1e-3);
  for (double d = 1; d < 80; d += 0.5) EXPECT_GE(ch.expected_ed(d), ch.expected_ed(d + 0.5));
}

TEST(Channel, LossRampAndRange) {
  const ChannelModel ch;
  EXPECT_NEAR(ch.loss_probability(1.0), 0.22, 1e-6);
  EXPECT_GT(ch.loss_probability(50.0), 0.5);
  EXPECT_DOUBLE_EQ(ch.loss_probability(1.0, 1.0), 1.0);
  EXPECT_FALSE(ch.in_range(ch.comm_range_m + 0.01));
  EXPECT_DOUBLE_EQ(ChannelModel::lossless().loss_probability(54.0), 0.0);
}

TEST(Channel, SampledEdIsClampedInteger) {
  ChannelModel ch;
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const int ed = ch.sample_ed(0.2, rng);
    EXPECT_GE(ed, 0);
    EXPECT_LE(ed, ch.ed_max);
    EXPECT_GE(ch.sample_ed(200.0, rng), 0);
  }
}

TEST(Rng, UniformIntCoversRange) {
  Rng rng(9);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = rng.uniform_int_1(5);
    EXPECT_GE(v, 1);
    EXPECT_LE(v, 5);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(SimConfig, Validation) {
  SimConfig cfg;
  cfg.epoch_period = 50ms;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.backoff_T = 0ms;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(BeaconEpoch, Arithmetic) {
  EXPECT_EQ(beacon_epoch_at(1200ms, 0ms, 400ms), 3u);
  EXPECT_EQ(beacon_epoch_at(1199ms, 0ms, 400ms), 2u);
  EXPECT_EQ(beacon_epoch_at(1300ms, 100ms, 400ms), 3u);
  EXPECT_EQ(beacon_epoch_at(50ms, 100ms, 400ms), 0u);
}

TEST(Netsim, BeaconsCarryTheirSlotEpoch) {
  Scenario sc = make_stable_pack(10, 20.0);
  sc.sinks[0].phase_ms = 130;
  const SimResult res = run(SimConfig{}, sc);
  std::set<Epoch> seen;
  for (const auto& r : res.trace.records) {
    if (r.kind != TraceKind::beacon_tx) continue;
    EXPECT_EQ(beacon_epoch_at(r.time, 130ms, 400ms), r.epoch) << secs(r.time);
    EXPECT_TRUE(seen.insert(r.epoch).second);
  }
  // Slots at 530 ms .. 19730 ms.
  EXPECT_EQ(seen.size(), 49u);
}

TEST(Netsim, DeterministicForSeed) {
  const Scenario sc = make_breakaway(10);
  SimConfig a;
  a.seed = 42;
  const std::string first = csv(run(a, sc).trace);
  EXPECT_EQ(first, csv(run(a, sc).trace));
  SimConfig b = a;
  b.seed = 43;
  EXPECT_NE(first, csv(run(b, sc).trace));
}

TEST(Netsim, TimeNeverGoesBackwards) {
  const SimResult res = run(SimConfig{}, make_pack_split(10));
  for (std::size_t i = 1; i < res.trace.records.size(); ++i) {
    ASSERT_LE(res.trace.records[i - 1].time, res.trace.records[i].time);
  }
  EXPECT_LE(res.trace.records.back().time, res.trace.meta.duration);
}

TEST(Netsim, SoloNodeRateFollowsBackoff) {
  const SimResult res = run(gs_test::lossless_config(), make_static(1, 0.0, 60.0));
  const double rate = static_cast<double>(res.stats.data_tx[0]) / 60.0;
  // Mean cycle is T/2 + airtime with nothing to freeze on.
  EXPECT_NEAR(rate, 1.0 / (0.035 + 0.004), 0.5);
}

TEST(Netsim, StaticTenNodeRateWithinBackoffLimits) {
  const SimResult res = run(gs_test::lossless_config(), make_static(10, 0.5, 60.0));
  for (auto c : res.stats.data_tx) {
    const double rate = static_cast<double>(c) / 60.0;
    EXPECT_GE(rate, 1000.0 / 70.0 * 0.5);
    EXPECT_LE(rate, 1000.0 / 70.0);
  }
}

TEST(Netsim, LossAccountingAddsUp) {
  const SimResult res = run(SimConfig{}, make_stable_pack(10, 30.0));
  const auto& d = res.stats.data;
  EXPECT_EQ(d.delivered + d.lost + d.collided, d.pairs);
  std::map<TraceKind, std::uint64_t> rows;
  std::uint64_t tx = 0;
  for (const auto& r : res.trace.records) {
    if (r.kind == TraceKind::tx) ++tx;
    if (r.peer && *r.peer < 10) ++rows[r.kind];
  }
  EXPECT_EQ(rows[TraceKind::rx], d.delivered);
  EXPECT_EQ(rows[TraceKind::loss], d.lost);
  EXPECT_EQ(rows[TraceKind::collision], d.collided);
  // Everybody is in range of everybody in a pack.
  EXPECT_EQ(d.pairs, tx * 9);
  EXPECT_NEAR(d.loss_rate(), 0.22, 0.05);
}

TEST(Netsim, NoTwoDeliveriesOverlapAtAReceiver) {
  const SimResult res = run(SimConfig{}, make_pack_split(10));
  std::map<NodeId, Duration> last_rx;
  for (const auto& r : res.trace.records) {
    if (r.kind != TraceKind::rx && r.kind != TraceKind::beacon_rx) continue;
    auto it = last_rx.find(r.node);
    if (it != last_rx.end()) EXPECT_GE(r.time - it->second, 4ms) << "node " << r.node;
    last_rx[r.node] = r.time;
  }
}

TEST(Netsim, AtMostOneTransmissionInFlightPerNode) {
  const SimResult res = run(SimConfig{}, make_stable_pack(10, 30.0));
  std::map<NodeId, Duration> last_tx;
  for (const auto& r : res.trace.records) {
    if (r.kind != TraceKind::tx) continue;
    auto it = last_tx.find(r.node);
    if (it != last_tx.end()) EXPECT_GE(r.time - it->second, 4ms);
    last_tx[r.node] = r.time;
  }
}

TEST(Netsim, NoCollisionsWhenEveryoneHearsEveryone) {
  const SimResult res = run(gs_test::lossless_config(), make_static(10, 0.5, 30.0));
  EXPECT_EQ(res.stats.data.collided, 0u);
  EXPECT_EQ(res.stats.data.lost, 0u);
}

TEST(Netsim, HiddenTerminalsCollide) {
  // 0 and 2 cannot hear each other; 1 hears both.
  Scenario sc = line_with_fixed_sink(3, 50.0, {50.0, 2.0}, 30.0);
  const SimResult res = run(gs_test::lossless_config(), sc);
  EXPECT_GT(res.stats.data.collided, 0u);
  for (const auto& r : res.trace.records) {
    if (r.kind == TraceKind::collision) EXPECT_EQ(r.node, 1u);
  }
}

TEST(Netsim, NothingIsDeliveredBeyondRange) {
  Scenario sc = line_with_fixed_sink(2, 60.0, {0.0, 0.0}, 10.0);
  const SimResult res = run(gs_test::lossless_config(), sc);
  for (const auto& r : res.trace.records) {
    if (r.kind == TraceKind::rx) ADD_FAILURE() << "delivery across 60 m";
  }
}

TEST(Netsim, TwoSinksResetEachNodeOncePerEpoch) {
  Scenario sc = make_stable_pack(10, 20.0);
  sc.sinks.push_back(sc.sinks[0]);
  sc.sinks[1].behind_m = 5.0;
  const SimResult res = run(gs_test::lossless_config(), sc);
  std::set<std::pair<NodeId, Epoch>> seen;
  std::map<Epoch, int> beacons;
  for (const auto& r : res.trace.records) {
    if (r.kind == TraceKind::beacon_tx) ++beacons[r.epoch];
    if (r.kind == TraceKind::epoch_change) EXPECT_TRUE(seen.insert({r.node, r.epoch}).second);
  }
  // Both sinks announce every epoch; the final slot may be deferred past the end.
  for (Epoch k = 1; k < 50; ++k) EXPECT_EQ(beacons[k], 2) << "K=" << k;
  EXPECT_GE(seen.size(), 10u * 45u);
}

TEST(Netsim, EpochsReachOutOfRangeNodesThroughDataPackets) {
  // Sink next to node 0; nodes 4 and 5 are beyond its radio range.
  Scenario sc = line_with_fixed_sink(6, 15.0, {-5.0, 0.0}, 20.0);
  const SimResult res = run(gs_test::lossless_config(), sc);
  std::map<NodeId, int> beacon_rx;
  std::map<NodeId, int> changes;
  Epoch max_beacon = 0;
  for (const auto& r : res.trace.records) {
    if (r.kind == TraceKind::beacon_tx) max_beacon = std::max(max_beacon, r.epoch);
    if (r.kind == TraceKind::beacon_rx) ++beacon_rx[r.node];
    if (r.kind == TraceKind::epoch_change) {
      ++changes[r.node];
      EXPECT_LE(r.epoch, max_beacon);
    }
  }
  EXPECT_EQ(beacon_rx[5], 0);
  EXPECT_EQ(beacon_rx[4], 0);
  EXPECT_GT(changes[5], 40);
}

TEST(Netsim, ObserverSeesMonotoneEpochs) {
  Simulator sim(SimConfig{}, make_breakaway(10));
  std::vector<Epoch> last(10, 0);
  sim.set_observer([&](const Simulator& s, Duration) {
    for (NodeId v = 0; v < 10; ++v) {
      EXPECT_GE(s.node_state(v).epoch, last[v]);
      last[v] = s.node_state(v).epoch;
    }
  });
  sim.run();
  EXPECT_GT(last[0], 100u);
}
