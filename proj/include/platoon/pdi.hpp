#pragma once

#include <optional>
#include <vector>

#include "platoon/world.hpp"

namespace platoon {

enum class NodeStatus { kFree, kPlatoon, kBlocked };
enum class NodeRole { kInterior, kStart, kEnd };

struct RoadNode {
  int id = 0;
  int lane = 0;
  double x = 0.0;
  NodeStatus status = NodeStatus::kFree;
  NodeRole role = NodeRole::kInterior;
};

struct GraphEdge {
  int a = 0;
  int b = 0;
  double weight = 0.0;  // equivalence distance
};

struct PdiParams {
  double lane_change_penalty = 10.0;  // k_l
  double distance_normalizer = 20.0;  // D
  double node_spacing_min = 10.0;
  double node_spacing_max = 20.0;
  double preferred_spacing = 15.0;
  double lane_width = 4.0;
  // Vehicle nodes sit on the rear axle, this far ahead of the rear bumper.
  double rear_overhang = 1.0;

  void validate() const;
};

struct RoadNodeGraph {
  std::vector<RoadNode> nodes;
  std::vector<GraphEdge> edges;
  double lane_width = 4.0;
  int start = -1;
  int end = -1;

  // Sum of all edge weights; basis of the infeasibility sentinel.
  double total_weight() const;
};

// Node-distance adjacency: same lane with |dx| < d_max, or neighbouring lanes
// with |dx| < d_max.
bool nodes_adjacent(const RoadNode& a, const RoadNode& b, const PdiParams& p);

// ED = euclidean / D + k_l * |dL|. Throws for non-adjacent nodes.
double equivalence_distance(const RoadNode& a, const RoadNode& b, const PdiParams& p);

// Builds the node map spanned by the platoon. Background vehicles on the main
// lanes near the platoon become blocked nodes; ramp vehicles are ignored.
RoadNodeGraph build_node_graph(const RoadMap& road, const std::vector<VehicleState>& platoon,
                               const std::vector<VehicleState>& background, const PdiParams& p);

// Assembles a graph from explicit nodes, connecting every adjacent pair.
RoadNodeGraph make_graph(std::vector<RoadNode> nodes, const PdiParams& p);

struct PdiResult {
  bool feasible = false;
  double value = 0.0;        // path length, or the sentinel when infeasible
  std::vector<int> path;     // node ids from start to end
  int branch_nodes = 0;      // search nodes explored (branch and bound only)
};

// 0-1 program over directed arcs: minimize sum ED * u subject to one unit
// leaving the start, none entering it, one unit entering the end, none leaving
// it, conservation elsewhere, and no arc touching a blocked node.
class PathProgram {
 public:
  struct Arc {
    int tail;
    int head;
    double cost;
  };

  explicit PathProgram(const RoadNodeGraph& graph);

  const std::vector<Arc>& arcs() const { return arcs_; }
  int node_count() const { return node_count_; }

  // Checks every constraint row literally.
  bool satisfies_constraints(const std::vector<int>& assignment) const;
  double objective(const std::vector<int>& assignment) const;

  // Branch and bound with the network relaxation as bound. Returns nullopt when
  // no feasible assignment exists.
  std::optional<std::vector<int>> solve(int* explored = nullptr) const;

 private:
  struct Relaxation {
    bool feasible = false;
    double cost = 0.0;
    std::vector<int> flow;
  };
  Relaxation relax(const std::vector<int>& fixing) const;

  std::vector<Arc> arcs_;
  int node_count_;
  int start_;
  int end_;
};

PdiResult compute_pdi(const RoadNodeGraph& graph);

// Label-setting shortest path on the same graph, used to cross-check.
PdiResult dijkstra_oracle(const RoadNodeGraph& graph);

}  // namespace platoon
