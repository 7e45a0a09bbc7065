#include "platoon/pdi.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <stdexcept>

namespace platoon {

void PdiParams::validate() const {
  if (!(lane_change_penalty > 0.0 && distance_normalizer > 0.0)) {
    throw std::invalid_argument("PDI needs positive k_l and D");
  }
  if (!(node_spacing_min > 0.0 && node_spacing_max > node_spacing_min)) {
    throw std::invalid_argument("PDI node spacing bounds are inconsistent");
  }
  if (preferred_spacing < node_spacing_min || preferred_spacing >= node_spacing_max) {
    throw std::invalid_argument("preferred node spacing must lie in [d_min, d_max)");
  }
}

double RoadNodeGraph::total_weight() const {
  double sum = 0.0;
  for (const auto& e : edges) sum += e.weight;
  return sum;
}

bool nodes_adjacent(const RoadNode& a, const RoadNode& b, const PdiParams& p) {
  const int dl = std::abs(a.lane - b.lane);
  if (dl > 1) return false;
  return std::abs(a.x - b.x) < p.node_spacing_max;
}

double equivalence_distance(const RoadNode& a, const RoadNode& b, const PdiParams& p) {
  if (!nodes_adjacent(a, b, p)) throw std::invalid_argument("equivalence_distance: nodes are not adjacent");
  const int dl = std::abs(a.lane - b.lane);
  const double euclid = std::hypot(a.x - b.x, dl * p.lane_width);
  return euclid / p.distance_normalizer + p.lane_change_penalty * dl;
}

RoadNodeGraph make_graph(std::vector<RoadNode> nodes, const PdiParams& p) {
  RoadNodeGraph g;
  g.lane_width = p.lane_width;
  for (size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].id = static_cast<int>(i);
    if (nodes[i].role == NodeRole::kStart) {
      if (g.start >= 0) throw std::invalid_argument("graph has more than one start node");
      g.start = static_cast<int>(i);
    }
    if (nodes[i].role == NodeRole::kEnd) {
      if (g.end >= 0) throw std::invalid_argument("graph has more than one end node");
      g.end = static_cast<int>(i);
    }
  }
  for (size_t i = 0; i < nodes.size(); ++i) {
    for (size_t j = i + 1; j < nodes.size(); ++j) {
      if (nodes_adjacent(nodes[i], nodes[j], p)) {
        g.edges.push_back({static_cast<int>(i), static_cast<int>(j), equivalence_distance(nodes[i], nodes[j], p)});
      }
    }
  }
  g.nodes = std::move(nodes);
  return g;
}

namespace {

int segment_count(double gap, const PdiParams& p) {
  int m = std::max(1, static_cast<int>(std::lround(gap / p.preferred_spacing)));
  while (gap / m >= p.node_spacing_max) ++m;
  while (m > 1 && gap / m < p.node_spacing_min) --m;
  return m;
}

}  // namespace

RoadNodeGraph build_node_graph(const RoadMap& road, const std::vector<VehicleState>& platoon,
                               const std::vector<VehicleState>& background, const PdiParams& p) {
  p.validate();
  if (platoon.empty()) throw std::invalid_argument("build_node_graph: empty platoon");

  auto axle = [&](const VehicleState& v) { return v.rear() + p.rear_overhang; };

  std::vector<const VehicleState*> order;
  for (const auto& v : platoon) {
    if (!road.is_main_lane(v.lane) || v.x < 0.0 || v.x > road.length) {
      throw std::invalid_argument("build_node_graph: platoon vehicle outside the road");
    }
    order.push_back(&v);
  }
  std::stable_sort(order.begin(), order.end(), [](const VehicleState* a, const VehicleState* b) { return a->x > b->x; });

  std::vector<RoadNode> nodes;
  for (size_t i = 0; i < order.size(); ++i) {
    RoadNode n;
    n.lane = order[i]->lane;
    n.x = axle(*order[i]);
    n.status = NodeStatus::kPlatoon;
    if (i == 0) n.role = NodeRole::kStart;
    if (i + 1 == order.size() && order.size() > 1) n.role = NodeRole::kEnd;
    nodes.push_back(n);
  }
  const double x_hi = nodes.front().x + p.node_spacing_max;
  const double x_lo = nodes.back().x - p.node_spacing_max;

  for (const auto& v : background) {
    if (!road.is_main_lane(v.lane)) continue;
    const double x = axle(v);
    if (x < x_lo || x > x_hi) continue;
    RoadNode n;
    n.lane = v.lane;
    n.x = x;
    n.status = NodeStatus::kBlocked;
    nodes.push_back(n);
  }

  // Tile free nodes so that consecutive nodes in every lane are closer than d_max.
  const size_t fixed_count = nodes.size();
  for (int lane = 0; lane < road.lane_count; ++lane) {
    std::vector<double> anchors;
    for (size_t i = 0; i < fixed_count; ++i) {
      if (nodes[i].lane == lane) anchors.push_back(nodes[i].x);
    }
    std::sort(anchors.begin(), anchors.end());
    auto add_free = [&](double x) {
      RoadNode n;
      n.lane = lane;
      n.x = x;
      nodes.push_back(n);
    };
    if (anchors.empty()) {
      add_free(x_lo);
      anchors.push_back(x_lo);
      if (x_hi - x_lo > 0.0) {
        add_free(x_hi);
        anchors.push_back(x_hi);
      }
    } else {
      if (anchors.front() - x_lo >= p.node_spacing_min) {
        add_free(x_lo);
        anchors.insert(anchors.begin(), x_lo);
      }
      if (x_hi - anchors.back() >= p.node_spacing_min) {
        add_free(x_hi);
        anchors.push_back(x_hi);
      }
    }
    for (size_t k = 0; k + 1 < anchors.size(); ++k) {
      const double gap = anchors[k + 1] - anchors[k];
      if (gap < p.node_spacing_max) continue;
      const int m = segment_count(gap, p);
      for (int s = 1; s < m; ++s) add_free(anchors[k] + gap * s / m);
    }
  }
  auto g = make_graph(std::move(nodes), p);
  if (platoon.size() == 1) g.end = g.start;
  return g;
}

PathProgram::PathProgram(const RoadNodeGraph& graph)
    : node_count_(static_cast<int>(graph.nodes.size())), start_(graph.start), end_(graph.end) {
  if (start_ < 0 || end_ < 0) throw std::invalid_argument("PathProgram: graph lacks start or end");
  for (const auto& e : graph.edges) {
    if (graph.nodes[static_cast<size_t>(e.a)].status == NodeStatus::kBlocked ||
        graph.nodes[static_cast<size_t>(e.b)].status == NodeStatus::kBlocked) {
      continue;
    }
    arcs_.push_back({e.a, e.b, e.weight});
    arcs_.push_back({e.b, e.a, e.weight});
  }
}

bool PathProgram::satisfies_constraints(const std::vector<int>& u) const {
  if (u.size() != arcs_.size()) return false;
  std::vector<int> out(static_cast<size_t>(node_count_), 0);
  std::vector<int> in(static_cast<size_t>(node_count_), 0);
  for (size_t a = 0; a < arcs_.size(); ++a) {
    if (u[a] != 0 && u[a] != 1) return false;
    out[static_cast<size_t>(arcs_[a].tail)] += u[a];
    in[static_cast<size_t>(arcs_[a].head)] += u[a];
  }
  const auto s = static_cast<size_t>(start_);
  const auto e = static_cast<size_t>(end_);
  if (out[s] != 1 || in[s] != 0 || in[e] != 1 || out[e] != 0) return false;
  for (int v = 0; v < node_count_; ++v) {
    if (v == start_ || v == end_) continue;
    if (in[static_cast<size_t>(v)] != out[static_cast<size_t>(v)]) return false;
  }
  return true;
}

double PathProgram::objective(const std::vector<int>& u) const {
  double sum = 0.0;
  for (size_t a = 0; a < arcs_.size(); ++a) sum += arcs_[a].cost * u[a];
  return sum;
}

// Network relaxation: min-cost flow with the fixed arcs removed and their unit
// folded into the node balances. Solved by successive shortest paths with
// Bellman-Ford, so the optimum is integral.
PathProgram::Relaxation PathProgram::relax(const std::vector<int>& fixing) const {
  Relaxation r;
  const int n = node_count_;
  std::vector<int> balance(static_cast<size_t>(n), 0);
  balance[static_cast<size_t>(start_)] += 1;
  balance[static_cast<size_t>(end_)] -= 1;
  r.flow.assign(arcs_.size(), 0);
  for (size_t a = 0; a < arcs_.size(); ++a) {
    if (fixing[a] == 1) {
      r.flow[a] = 1;
      r.cost += arcs_[a].cost;
      balance[static_cast<size_t>(arcs_[a].tail)] -= 1;
      balance[static_cast<size_t>(arcs_[a].head)] += 1;
    }
  }

  // Residual graph over nodes plus super source S and super sink T.
  struct Edge {
    int to;
    int rev;
    int cap;
    double cost;
    int arc;  // program arc index or -1
  };
  const int source = n;
  const int sink = n + 1;
  std::vector<std::vector<Edge>> adj(static_cast<size_t>(n + 2));
  auto add_edge = [&](int from, int to, int cap, double cost, int arc) {
    adj[static_cast<size_t>(from)].push_back({to, static_cast<int>(adj[static_cast<size_t>(to)].size()), cap, cost, arc});
    adj[static_cast<size_t>(to)].push_back({from, static_cast<int>(adj[static_cast<size_t>(from)].size()) - 1, 0, -cost, -1});
  };
  for (size_t a = 0; a < arcs_.size(); ++a) {
    if (fixing[a] == -1) add_edge(arcs_[a].tail, arcs_[a].head, 1, arcs_[a].cost, static_cast<int>(a));
  }
  int required = 0;
  for (int v = 0; v < n; ++v) {
    const int b = balance[static_cast<size_t>(v)];
    if (b > 0) {
      add_edge(source, v, b, 0.0, -1);
      required += b;
    } else if (b < 0) {
      add_edge(v, sink, -b, 0.0, -1);
    }
  }

  const int total = n + 2;
  for (int unit = 0; unit < required; ++unit) {
    std::vector<double> dist(static_cast<size_t>(total), kInf);
    std::vector<int> prev_node(static_cast<size_t>(total), -1);
    std::vector<int> prev_edge(static_cast<size_t>(total), -1);
    std::vector<char> queued(static_cast<size_t>(total), 0);
    std::queue<int> q;
    dist[static_cast<size_t>(source)] = 0.0;
    q.push(source);
    queued[static_cast<size_t>(source)] = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      queued[static_cast<size_t>(u)] = 0;
      const auto& edges = adj[static_cast<size_t>(u)];
      for (int k = 0; k < static_cast<int>(edges.size()); ++k) {
        const Edge& e = edges[static_cast<size_t>(k)];
        if (e.cap <= 0) continue;
        const double nd = dist[static_cast<size_t>(u)] + e.cost;
        if (nd < dist[static_cast<size_t>(e.to)] - 1e-12) {
          dist[static_cast<size_t>(e.to)] = nd;
          prev_node[static_cast<size_t>(e.to)] = u;
          prev_edge[static_cast<size_t>(e.to)] = k;
          if (!queued[static_cast<size_t>(e.to)]) {
            q.push(e.to);
            queued[static_cast<size_t>(e.to)] = 1;
          }
        }
      }
    }
    if (!std::isfinite(dist[static_cast<size_t>(sink)])) return r;  // infeasible
    for (int v = sink; v != source; v = prev_node[static_cast<size_t>(v)]) {
      const int u = prev_node[static_cast<size_t>(v)];
      Edge& e = adj[static_cast<size_t>(u)][static_cast<size_t>(prev_edge[static_cast<size_t>(v)])];
      e.cap -= 1;
      adj[static_cast<size_t>(v)][static_cast<size_t>(e.rev)].cap += 1;
    }
    r.cost += dist[static_cast<size_t>(sink)];
  }
  for (int u = 0; u < n; ++u) {
    for (const auto& e : adj[static_cast<size_t>(u)]) {
      if (e.arc >= 0 && e.cap == 0) r.flow[static_cast<size_t>(e.arc)] = 1;
    }
  }
  r.feasible = true;
  return r;
}

namespace {

// Follows unit arcs from start. Returns the visited arcs; the assignment is a
// simple path iff this covers every selected arc and ends at `end`.
std::vector<size_t> walk_path(const std::vector<PathProgram::Arc>& arcs, const std::vector<int>& u, int start,
                              int end, int node_count, bool* simple) {
  std::vector<std::vector<size_t>> out(static_cast<size_t>(node_count));
  size_t selected = 0;
  for (size_t a = 0; a < arcs.size(); ++a) {
    if (u[a] == 1) {
      out[static_cast<size_t>(arcs[a].tail)].push_back(a);
      ++selected;
    }
  }
  std::vector<size_t> walked;
  std::vector<char> seen(static_cast<size_t>(node_count), 0);
  int v = start;
  bool ok = true;
  while (v != end) {
    if (seen[static_cast<size_t>(v)] || out[static_cast<size_t>(v)].size() != 1) {
      ok = false;
      break;
    }
    seen[static_cast<size_t>(v)] = 1;
    const size_t a = out[static_cast<size_t>(v)].front();
    walked.push_back(a);
    v = arcs[a].head;
  }
  *simple = ok && walked.size() == selected;
  return walked;
}

}  // namespace

std::optional<std::vector<int>> PathProgram::solve(int* explored) const {
  std::vector<int> root(arcs_.size(), -1);
  for (size_t a = 0; a < arcs_.size(); ++a) {
    if (arcs_[a].head == start_ || arcs_[a].tail == end_) root[a] = 0;
  }
  std::optional<std::vector<int>> best;
  double best_cost = kInf;
  int count = 0;

  std::vector<std::vector<int>> stack{root};
  while (!stack.empty()) {
    std::vector<int> fixing = std::move(stack.back());
    stack.pop_back();
    ++count;
    const Relaxation r = relax(fixing);
    if (!r.feasible || r.cost >= best_cost - 1e-12) continue;
    bool simple = false;
    const auto walked = walk_path(arcs_, r.flow, start_, end_, node_count_, &simple);
    if (simple) {
      best = r.flow;
      best_cost = r.cost;
      continue;
    }
    // Branch on a selected free arc off the start walk (part of a subtour).
    std::vector<char> on_walk(arcs_.size(), 0);
    for (size_t a : walked) on_walk[a] = 1;
    int branch = -1;
    for (size_t a = 0; a < arcs_.size() && branch < 0; ++a) {
      if (r.flow[a] == 1 && fixing[a] == -1 && !on_walk[a]) branch = static_cast<int>(a);
    }
    for (size_t a = 0; a < arcs_.size() && branch < 0; ++a) {
      if (r.flow[a] == 1 && fixing[a] == -1) branch = static_cast<int>(a);
    }
    if (branch < 0) continue;  // every selected arc fixed yet not a path
    std::vector<int> one = fixing;
    one[static_cast<size_t>(branch)] = 1;
    fixing[static_cast<size_t>(branch)] = 0;
    stack.push_back(std::move(one));
    stack.push_back(std::move(fixing));
  }
  if (explored) *explored = count;
  return best;
}

namespace {

PdiResult infeasible_result(const RoadNodeGraph& graph) {
  PdiResult r;
  r.feasible = false;
  r.value = 10.0 * std::max(graph.total_weight(), 1.0);
  return r;
}

}  // namespace

PdiResult compute_pdi(const RoadNodeGraph& graph) {
  if (graph.start < 0 || graph.end < 0) throw std::invalid_argument("compute_pdi: graph lacks start or end");
  if (graph.start == graph.end) return PdiResult{true, 0.0, {graph.start}, 0};
  PathProgram program(graph);
  PdiResult result;
  const auto solution = program.solve(&result.branch_nodes);
  if (!solution) {
    auto r = infeasible_result(graph);
    r.branch_nodes = result.branch_nodes;
    return r;
  }
  bool simple = false;
  const auto walked = walk_path(program.arcs(), *solution, graph.start, graph.end, program.node_count(), &simple);
  result.feasible = true;
  result.value = program.objective(*solution);
  result.path.push_back(graph.start);
  for (size_t a : walked) result.path.push_back(program.arcs()[a].head);
  return result;
}

PdiResult dijkstra_oracle(const RoadNodeGraph& graph) {
  if (graph.start < 0 || graph.end < 0) throw std::invalid_argument("dijkstra_oracle: graph lacks start or end");
  if (graph.start == graph.end) return PdiResult{true, 0.0, {graph.start}, 0};
  const size_t n = graph.nodes.size();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const auto& e : graph.edges) {
    if (graph.nodes[static_cast<size_t>(e.a)].status == NodeStatus::kBlocked ||
        graph.nodes[static_cast<size_t>(e.b)].status == NodeStatus::kBlocked) {
      continue;
    }
    adj[static_cast<size_t>(e.a)].push_back({e.b, e.weight});
    adj[static_cast<size_t>(e.b)].push_back({e.a, e.weight});
  }
  std::vector<double> dist(n, kInf);
  std::vector<int> prev(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[static_cast<size_t>(graph.start)] = 0.0;
  heap.push({0.0, graph.start});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[static_cast<size_t>(u)]) continue;
    if (u == graph.end) break;
    for (const auto& [v, w] : adj[static_cast<size_t>(u)]) {
      if (d + w < dist[static_cast<size_t>(v)]) {
        dist[static_cast<size_t>(v)] = d + w;
        prev[static_cast<size_t>(v)] = u;
        heap.push({d + w, v});
      }
    }
  }
  if (!std::isfinite(dist[static_cast<size_t>(graph.end)])) return infeasible_result(graph);
  PdiResult r;
  r.feasible = true;
  r.value = dist[static_cast<size_t>(graph.end)];
  for (int v = graph.end; v != -1; v = prev[static_cast<size_t>(v)]) r.path.push_back(v);
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

}  // namespace platoon
