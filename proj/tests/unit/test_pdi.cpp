#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "platoon/pdi.hpp"

using namespace platoon;

namespace {

RoadNode node(int lane, double x, NodeStatus s = NodeStatus::kFree, NodeRole r = NodeRole::kInterior) {
  RoadNode n;
  n.lane = lane;
  n.x = x;
  n.status = s;
  n.role = r;
  return n;
}

VehicleState vehicle(int id, int lane, double x) {
  VehicleState v;
  v.id = id;
  v.lane = lane;
  v.target_lane = lane;
  v.x = x;
  v.y = 4.0 * lane;
  return v;
}

RoadNodeGraph random_graph(std::mt19937_64& rng, const PdiParams& p) {
  std::uniform_int_distribution<int> lanes_d(2, 4), count_d(5, 40);
  std::uniform_real_distribution<double> blocked_share(0.0, 0.3), unit(0.0, 1.0);
  const int lanes = lanes_d(rng);
  const int count = count_d(rng);
  const double share = blocked_share(rng);
  // Integer-metre positions keep the same-lane weights exact.
  std::uniform_int_distribution<int> x_d(0, 8 * count);
  std::uniform_int_distribution<int> lane_d(0, lanes - 1);
  std::vector<RoadNode> nodes;
  for (int k = 0; k < count; ++k) {
    const bool blocked = k >= 2 && unit(rng) < share;
    nodes.push_back(node(lane_d(rng), x_d(rng), blocked ? NodeStatus::kBlocked : NodeStatus::kFree));
  }
  nodes[0].role = NodeRole::kStart;
  nodes[1].role = NodeRole::kEnd;
  return make_graph(std::move(nodes), p);
}

}  // namespace

TEST(EquivalenceDistance, Examples) {
  PdiParams p;
  EXPECT_NEAR(equivalence_distance(node(1, 0), node(1, 15), p), 0.75, 1e-15);
  EXPECT_NEAR(equivalence_distance(node(1, 0), node(2, 15), p), std::hypot(15.0, 4.0) / 20.0 + 10.0, 1e-12);
  EXPECT_NEAR(equivalence_distance(node(1, 0), node(2, 15), p), 10.776, 5e-4);
  EXPECT_EQ(equivalence_distance(node(1, 7), node(1, 7), p), 0.0);
  EXPECT_THROW(equivalence_distance(node(0, 0), node(2, 0), p), std::invalid_argument);
  EXPECT_THROW(equivalence_distance(node(0, 0), node(0, 25), p), std::invalid_argument);
}

TEST(Adjacency, SameLaneSplitByInterleavedNode) {
  PdiParams p;
  const auto a = node(0, 0), b = node(0, 25), mid = node(0, 12.5);
  EXPECT_FALSE(nodes_adjacent(a, b, p));
  EXPECT_TRUE(nodes_adjacent(a, mid, p));
  EXPECT_TRUE(nodes_adjacent(mid, b, p));
}

TEST(Pdi, StartEqualsEndIsZero) {
  RoadNodeGraph g = make_graph({node(0, 0, NodeStatus::kPlatoon, NodeRole::kStart)}, PdiParams{});
  g.end = g.start;
  const auto r = compute_pdi(g);
  EXPECT_TRUE(r.feasible);
  EXPECT_EQ(r.value, 0.0);
}

TEST(Pdi, CollinearNodes) {
  PdiParams p;
  std::vector<RoadNode> nodes;
  for (int k = 0; k < 5; ++k) nodes.push_back(node(0, 60.0 - 15.0 * k));
  nodes.front().role = NodeRole::kStart;
  nodes.back().role = NodeRole::kEnd;
  const auto g = make_graph(nodes, p);
  EXPECT_NEAR(compute_pdi(g).value, 3.0, 1e-12);
  EXPECT_NEAR(dijkstra_oracle(g).value, 3.0, 1e-12);
}

TEST(Pdi, DetourAroundBlockedMiddle) {
  PdiParams p;
  std::vector<RoadNode> nodes;
  for (int k = 0; k < 5; ++k) nodes.push_back(node(0, 60.0 - 15.0 * k));
  for (int k = 0; k < 5; ++k) nodes.push_back(node(1, 60.0 - 15.0 * k));
  nodes[0].role = NodeRole::kStart;
  nodes[4].role = NodeRole::kEnd;
  nodes[2].status = NodeStatus::kBlocked;
  const auto g = make_graph(nodes, p);
  const auto r = compute_pdi(g);
  const auto o = dijkstra_oracle(g);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.value, o.value, 1e-9);
  EXPECT_NEAR(r.value, 2 * (std::hypot(15.0, 4.0) / 20.0 + 10.0) + 2 * 0.75, 1e-9);
  for (int id : r.path) EXPECT_NE(id, 2);
}

TEST(Pdi, SingleEdge) {
  PdiParams p;
  const auto g = make_graph({node(0, 12, NodeStatus::kFree, NodeRole::kStart), node(1, 0, NodeStatus::kFree, NodeRole::kEnd)}, p);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_NEAR(compute_pdi(g).value, g.edges[0].weight, 1e-15);
  EXPECT_NEAR(dijkstra_oracle(g).value, g.edges[0].weight, 1e-15);
}

TEST(Pdi, BlockedCorridorIsInfeasible) {
  PdiParams p;
  const auto g = make_graph({node(0, 30, NodeStatus::kFree, NodeRole::kStart), node(0, 15, NodeStatus::kBlocked),
                             node(0, 0, NodeStatus::kFree, NodeRole::kEnd)},
                            p);
  const auto r = compute_pdi(g);
  EXPECT_FALSE(r.feasible);
  EXPECT_FALSE(dijkstra_oracle(g).feasible);
  EXPECT_GE(r.value, 10.0 * g.total_weight());
}

TEST(Pdi, CompactSingleLanePlatoon) {
  PdiParams p;
  RoadMap road;
  const auto g = build_node_graph(road, {vehicle(0, 1, 500), vehicle(1, 1, 490), vehicle(2, 1, 480)}, {}, p);
  EXPECT_EQ(g.nodes[static_cast<size_t>(g.start)].x, 500 - 2.5 + 1.0);
  EXPECT_EQ(g.nodes[static_cast<size_t>(g.end)].x, 480 - 2.5 + 1.0);
  for (const auto& n : g.nodes) EXPECT_NE(n.status, NodeStatus::kBlocked);
  EXPECT_NEAR(compute_pdi(g).value, 2 * 10.0 / 20.0, 1e-12);
}

TEST(Pdi, InterleavedBackgroundIsBlocked) {
  PdiParams p;
  RoadMap road;
  const auto g = build_node_graph(road, {vehicle(0, 1, 500), vehicle(1, 1, 470)}, {vehicle(7, 1, 485)}, p);
  int blocked = 0;
  for (const auto& n : g.nodes) blocked += n.status == NodeStatus::kBlocked;
  EXPECT_EQ(blocked, 1);
  const auto r = compute_pdi(g);
  ASSERT_TRUE(r.feasible);
  EXPECT_GT(r.value, 20.0);  // two lane changes
  EXPECT_NEAR(r.value, dijkstra_oracle(g).value, 1e-9);
}

TEST(Pdi, TiledNodesRespectSpacing) {
  PdiParams p;
  RoadMap road;
  const auto g = build_node_graph(road, {vehicle(0, 0, 600), vehicle(1, 2, 480)}, {}, p);
  for (int lane = 0; lane < road.lane_count; ++lane) {
    std::vector<double> xs;
    for (const auto& n : g.nodes) {
      if (n.lane == lane) xs.push_back(n.x);
    }
    std::sort(xs.begin(), xs.end());
    for (size_t k = 0; k + 1 < xs.size(); ++k) EXPECT_LT(xs[k + 1] - xs[k], p.node_spacing_max);
  }
  for (const auto& e : g.edges) EXPECT_GT(e.weight, 0.0);
}

TEST(Pdi, RejectsPlatoonOffRoad) {
  EXPECT_THROW(build_node_graph(RoadMap{}, {vehicle(0, 5, 100)}, {}, PdiParams{}), std::invalid_argument);
  EXPECT_THROW(build_node_graph(RoadMap{}, {}, {}, PdiParams{}), std::invalid_argument);
}

TEST(Pdi, BranchAndBoundMatchesDijkstraOnRandomGraphs) {
  PdiParams p;
  std::mt19937_64 rng(2024);
  const auto t0 = std::chrono::steady_clock::now();
  int feasible = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto g = random_graph(rng, p);
    const auto r = compute_pdi(g);
    const auto o = dijkstra_oracle(g);
    ASSERT_EQ(r.feasible, o.feasible) << "graph " << k;
    if (!r.feasible) continue;
    ++feasible;
    ASSERT_NEAR(r.value, o.value, 1e-9) << "graph " << k;
    ASSERT_EQ(r.path.front(), g.start);
    ASSERT_EQ(r.path.back(), g.end);
    double sum = 0.0;
    for (size_t i = 0; i + 1 < r.path.size(); ++i) {
      const auto& a = g.nodes[static_cast<size_t>(r.path[i])];
      const auto& b = g.nodes[static_cast<size_t>(r.path[i + 1])];
      ASSERT_NE(a.status, NodeStatus::kBlocked);
      sum += equivalence_distance(a, b, p);
    }
    ASSERT_NEAR(sum, r.value, 1e-9);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_GT(feasible, 100);
  EXPECT_LT(secs, 60.0);
}

TEST(Pdi, OptimalAssignmentSatisfiesTheProgram) {
  PdiParams p;
  std::mt19937_64 rng(99);
  for (int k = 0; k < 200; ++k) {
    const auto g = random_graph(rng, p);
    const PathProgram prog(g);
    const auto sol = prog.solve();
    if (!sol) continue;
    EXPECT_TRUE(prog.satisfies_constraints(*sol));
    EXPECT_NEAR(prog.objective(*sol), dijkstra_oracle(g).value, 1e-9);
  }
}

TEST(Pdi, BlockingANodeNeverLowersThePdi) {
  PdiParams p;
  std::mt19937_64 rng(5);
  auto cost = [](const PdiResult& r) { return r.feasible ? r.value : kInf; };
  for (int k = 0; k < 300; ++k) {
    auto g = random_graph(rng, p);
    const double before = cost(dijkstra_oracle(g));
    std::uniform_int_distribution<size_t> pick(2, g.nodes.size() - 1);
    g.nodes[pick(rng)].status = NodeStatus::kBlocked;
    EXPECT_GE(cost(compute_pdi(g)), before - 1e-12);
  }
}

TEST(Pdi, PrefersStayingInLane) {
  PdiParams p;
  std::vector<RoadNode> nodes;
  // 200 m of same-lane travel beats any lane change pair.
  for (int k = 0; k <= 20; ++k) nodes.push_back(node(0, 200.0 - 10.0 * k));
  for (int k = 0; k <= 20; ++k) nodes.push_back(node(1, 200.0 - 10.0 * k));
  nodes[0].role = NodeRole::kStart;
  nodes[20].role = NodeRole::kEnd;
  const auto r = compute_pdi(make_graph(nodes, p));
  EXPECT_NEAR(r.value, 20 * 0.5, 1e-9);
  for (int id : r.path) EXPECT_LE(id, 20);
}
