#include <gtest/gtest.h>

#include "groupsense/channel.hpp"
#include "groupsense/link_estimator.hpp"
#include "groupsense/metrics.hpp"
#include "groupsense/scenario.hpp"

#include "support.hpp"

using namespace groupsense;

namespace {

Scenario fixed_points(std::vector<Position> pts, double duration = 10.0) {
  Scenario sc;
  sc.duration_s = duration;
  for (const auto& p : pts) sc.tracks.emplace_back(std::vector<Waypoint>{{0, p.x, p.y}, {duration, p.x, p.y}});
  return sc;
}

std::set<std::vector<std::uint32_t>> as_set(const Partition& p) { return {p.begin(), p.end()}; }

std::vector<Position> positions(const Scenario& sc, double t) {
  std::vector<Position> out;
  for (NodeId i = 0; i < sc.node_count(); ++i) out.push_back(sc.node_position(i, t));
  return out;
}

// Mean-ED level matrix of a layout, as a noise-free estimator would settle.
LevelMatrix expected_levels(const std::vector<Position>& pos) {
  const ChannelModel ch;
  const EstimatorConfig est;
  LevelMatrix m(pos.size(), std::vector<int>(pos.size(), 0));
  for (std::size_t a = 0; a < pos.size(); ++a) {
    for (std::size_t b = 0; b < pos.size(); ++b) {
      const double d = distance(pos[a], pos[b]);
      if (a != b && ch.in_range(d)) m[a][b] = quantize_level(ch.expected_ed(d), true, est);
    }
  }
  return m;
}

}  // namespace

TEST(Track, PiecewiseLinearInterpolation) {
  const Track tr({{0, 0, 0}, {10, 100, 0}, {20, 100, 50}});
  EXPECT_DOUBLE_EQ(tr.at(5).x, 50);
  EXPECT_DOUBLE_EQ(tr.at(15).y, 25);
  EXPECT_DOUBLE_EQ(tr.at(-1).x, 0);
  EXPECT_DOUBLE_EQ(tr.at(99).y, 50);
}

TEST(GroundTruth, ChainIsTransitive) {
  const auto sc = fixed_points({{0, 0}, {15, 0}, {30, 0}});
  EXPECT_EQ(ground_truth(sc, 0).size(), 1u);
}

TEST(GroundTruth, DistantClustersAreSeparate) {
  const auto sc = fixed_points({{0, 0}, {5, 0}, {100, 0}, {105, 0}});
  EXPECT_EQ(as_set(ground_truth(sc, 0)), (std::set<std::vector<std::uint32_t>>{{0, 1}, {2, 3}}));
}

TEST(GroundTruth, MatchesBfsOverDistanceGraph) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto sc = make_random_static(2 + seed % 11, seed);
    EXPECT_EQ(as_set(ground_truth(sc, 0)), gs_test::bfs_partition(gs_test::within_distance(positions(sc, 0), 20.0)));
  }
}

TEST(GroundTruth, AlwaysAPartition) {
  for (const auto& sc : {make_breakaway(10), make_pack_split(10), make_merge(10)}) {
    for (double t = 0; t <= sc.duration_s; t += 0.25) {
      std::vector<int> seen(sc.node_count(), 0);
      for (const auto& g : ground_truth(sc, t)) {
        for (auto v : g) ++seen[v];
      }
      for (int c : seen) EXPECT_EQ(c, 1) << sc.name << " t=" << t;
    }
  }
}

TEST(GroundTruthTimeline, ChangesOnlyAtTwentyMetreCrossings) {
  const auto sc = make_breakaway(10);
  const GroundTruthTimeline tl(sc);
  ASSERT_GE(tl.changes().size(), 3u);
  for (std::size_t c = 1; c < tl.changes().size(); ++c) {
    const double t = tl.changes()[c].t;
    // Some pair sits on the 20 m boundary at the change instant.
    double closest_to_boundary = 1e9;
    const auto pos = positions(sc, t);
    for (std::size_t a = 0; a < pos.size(); ++a) {
      for (std::size_t b = a + 1; b < pos.size(); ++b) {
        closest_to_boundary = std::min(closest_to_boundary, std::abs(distance(pos[a], pos[b]) - 20.0));
      }
    }
    EXPECT_LT(closest_to_boundary, 1e-3);
    EXPECT_EQ(tl.at(t + 1e-3), tl.changes()[c].groups);
  }
}

TEST(Generators, StaticTableIsOneGroupWithDiameterOne) {
  const auto sc = make_static(10, 0.5);
  EXPECT_EQ(ground_truth(sc, 0).size(), 1u);
  EXPECT_EQ(mate_graph_diameter(expected_levels(positions(sc, 0)), {}), 1);
}

TEST(Generators, StaticLineOfTwelveHasDiameterEleven) {
  const auto sc = make_static(12, 18.0);
  EXPECT_EQ(ground_truth(sc, 0).size(), 1u);
  EXPECT_EQ(mate_graph_diameter(expected_levels(positions(sc, 0)), {}), 11);
}

TEST(Generators, StablePackStaysTogether) {
  const auto sc = make_stable_pack(10);
  const GroundTruthTimeline tl(sc);
  EXPECT_EQ(tl.changes().size(), 1u);
  EXPECT_EQ(tl.at(0).size(), 1u);
  for (double t = 0; t <= sc.duration_s; t += 5) {
    const int d = mate_graph_diameter(expected_levels(positions(sc, t)), {});
    EXPECT_GE(d, 1);
    EXPECT_LE(d, 2);
  }
}

TEST(Generators, BreakawaySplitsAndRejoins) {
  const auto sc = make_breakaway(10);
  const GroundTruthTimeline tl(sc);
  ASSERT_EQ(tl.changes().size(), 3u);
  EXPECT_EQ(as_set(tl.changes()[1].groups),
            (std::set<std::vector<std::uint32_t>>{{3}, {0, 1, 2, 4, 5, 6, 7, 8, 9}}));
  EXPECT_EQ(tl.changes()[2].groups.size(), 1u);
}

TEST(Generators, BreakawayWithoutSpeedNeverSplits) {
  BreakawayParams p;
  p.v_gap = 0.0;
  const GroundTruthTimeline tl(make_breakaway(10, p));
  EXPECT_EQ(tl.changes().size(), 1u);
}

TEST(Generators, PackSplitSizes) {
  const auto sc = make_pack_split(10);
  EXPECT_EQ(sc.sinks.size(), 2u);
  const auto end = ground_truth(sc, sc.duration_s);
  ASSERT_EQ(end.size(), 2u);
  EXPECT_EQ(as_set(end), (std::set<std::vector<std::uint32_t>>{{0, 1, 2, 3, 4, 5}, {6, 7, 8, 9}}));
  EXPECT_THROW(make_pack_split(10, {15, 6, 5}), std::invalid_argument);
}

TEST(Generators, MergeStartsSplitAndSinksStopBeforeContact) {
  const auto sc = make_merge(10);
  EXPECT_EQ(ground_truth(sc, 0).size(), 2u);
  EXPECT_EQ(ground_truth(sc, sc.duration_s).size(), 1u);
  const GroundTruthTimeline tl(sc);
  const double merged = tl.changes().back().t;
  for (const auto& s : sc.sinks) {
    ASSERT_TRUE(s.active_until_s.has_value());
    EXPECT_LT(*s.active_until_s, merged);
  }
}

TEST(Generators, ConnectedAtStartUnlessSplitByDesign) {
  for (const auto& sc : {make_static(10, 0.5), make_stable_pack(10), make_breakaway(10), make_pack_split(10)}) {
    EXPECT_EQ(ground_truth(sc, 0).size(), 1u) << sc.name;
  }
}

TEST(Generators, Deterministic) {
  EXPECT_EQ(to_json(make_breakaway(10)), to_json(make_breakaway(10)));
  EXPECT_EQ(to_json(make_random_static(12, 9)), to_json(make_random_static(12, 9)));
  EXPECT_NE(to_json(make_random_static(12, 9)), to_json(make_random_static(12, 10)));
}

TEST(RandomStatic, KeepsPairsAwayFromTheBoundary) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto pos = positions(make_random_static(12, seed), 0);
    for (std::size_t a = 0; a < pos.size(); ++a) {
      for (std::size_t b = a + 1; b < pos.size(); ++b) {
        EXPECT_GE(std::abs(distance(pos[a], pos[b]) - 20.0), 6.0);
      }
    }
  }
}

TEST(ScenarioJson, RoundTrip) {
  for (auto sc : {make_static(4, 3.0), make_breakaway(10), make_merge(10), make_pack_split(10)}) {
    sc.settings["channel.loss_floor"] = "0.1";
    const auto j = to_json(sc);
    const auto back = scenario_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(back.node_count(), sc.node_count());
    EXPECT_DOUBLE_EQ(back.node_position(0, 7.3).x, sc.node_position(0, 7.3).x);
  }
}

TEST(ScenarioJson, RejectsBadDocuments) {
  const auto good = to_json(make_static(3, 1.0));
  auto expect_error = [](const nlohmann::json& j, const std::string& needle) {
    try {
      scenario_from_json(j);
      ADD_FAILURE() << "accepted: " << needle;
    } catch (const ScenarioError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  auto j = good;
  j.erase("format_version");
  expect_error(j, "format_version");
  j = good;
  j["format_version"] = "2.0";
  expect_error(j, "unsupported major");
  j = good;
  j["duration_s"] = -1;
  expect_error(j, "duration_s");
  j = good;
  j["nodes"][1]["track"] = {{5, 0, 0}, {1, 0, 0}};
  expect_error(j, "time-sorted");
  j = good;
  j["sinks"][0]["attachment"] = {{"kind", "follow"}, {"nodes", {7}}};
  expect_error(j, "unknown node");
  j = good;
  j["nodes"][0]["track"] = {{0, "x", 0}};
  expect_error(j, "[t, x, y]");
  j = good;
  j["nodes"] = nlohmann::json::array();
  expect_error(j, "at least one node");
}

TEST(ScenarioJson, MinorVersionIsAccepted) {
  auto j = to_json(make_static(2, 1.0));
  j["format_version"] = "1.7";
  EXPECT_NO_THROW(scenario_from_json(j));
}
