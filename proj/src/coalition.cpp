#include "platoon/coalition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace platoon {

const char* action_name(LateralAction a) {
  switch (a) {
    case LateralAction::kKeep: return "keep";
    case LateralAction::kLeft: return "left";
    case LateralAction::kRight: return "right";
  }
  return "?";
}

const char* phase_name(GamePhase p) {
  switch (p) {
    case GamePhase::kSteady: return "steady";
    case GamePhase::kSplitting: return "splitting";
    case GamePhase::kMerging: return "merging";
  }
  return "?";
}

int CoalitionPartition::coalition_of(int member) const {
  for (size_t c = 0; c < coalitions.size(); ++c) {
    const auto& m = coalitions[c].members;
    if (std::find(m.begin(), m.end(), member) != m.end()) return static_cast<int>(c);
  }
  return -1;
}

std::vector<int> front_to_back(const std::vector<VehicleState>& platoon) {
  std::vector<int> order(platoon.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return platoon[static_cast<size_t>(a)].x > platoon[static_cast<size_t>(b)].x;
  });
  return order;
}

CoalitionPartition form_coalitions(const std::vector<VehicleState>& platoon,
                                   const std::vector<VehicleState>& background, const CoalitionParams& p) {
  CoalitionPartition out;
  if (platoon.empty()) return out;
  const auto order = front_to_back(platoon);
  out.coalitions.push_back({{order.front()}});
  for (size_t k = 1; k < order.size(); ++k) {
    const auto& a = platoon[static_cast<size_t>(order[k - 1])];
    const auto& b = platoon[static_cast<size_t>(order[k])];
    bool together = std::abs(a.x - b.x) < p.x_lim && std::abs(a.y - b.y) < p.y_lim;
    for (size_t j = 0; j < background.size() && together; ++j) {
      const auto& o = background[j];
      const bool between = o.x < a.x && o.x > b.x;
      const bool in_lane = std::abs(o.y - a.y) < p.y_lim || std::abs(o.y - b.y) < p.y_lim;
      if (between && in_lane) together = false;
    }
    if (together) {
      out.coalitions.back().members.push_back(order[k]);
    } else {
      out.coalitions.push_back({{order[k]}});
    }
  }
  return out;
}

GamePhase resolve_phase(const ConfigAction& target, const CoalitionPartition& partition) {
  if (!target.single()) return GamePhase::kSplitting;
  if (partition.coalitions.size() > 1) return GamePhase::kMerging;
  return GamePhase::kSteady;
}

void GameWeights::validate() const {
  const double all[] = {w_s, w_e, w_it, w_er, k_tau, k_d, k_y, k_v, w_pdi, collision_penalty, slot_penalty};
  for (double v : all) {
    if (!std::isfinite(v)) throw std::invalid_argument("game weights must be finite");
  }
  if (!(tau_cap > 0.0 && d_cap > 0.0 && v_max > 0.0 && entropy_window > 0.0)) {
    throw std::invalid_argument("game caps must be positive");
  }
}

GameWeights GameWeights::scaled(double c) const {
  GameWeights g = *this;
  g.w_s *= c;
  g.w_e *= c;
  g.w_it *= c;
  g.w_er *= c;
  g.w_pdi *= c;
  return g;
}

void PredictParams::validate() const {
  if (!(horizon > 0.0 && dt > 0.0 && lane_change_duration > 0.0)) {
    throw std::invalid_argument("prediction horizon, step and lane change duration must be positive");
  }
  if (stagger < 0.0 || slot_time < 0.0 || slot_time > horizon || closing_time < 0.0) {
    throw std::invalid_argument("prediction stagger/slot time out of range");
  }
}

std::vector<std::vector<int>> make_players(const CoalitionPartition& partition, const ConfigAction& target) {
  std::vector<std::vector<int>> players;
  for (const auto& c : partition.coalitions) {
    for (const auto& g : target.groups) {
      std::vector<int> p;
      for (int m : c.members) {
        if (std::find(g.begin(), g.end(), m) != g.end()) p.push_back(m);
      }
      if (!p.empty()) {
        std::sort(p.begin(), p.end());
        players.push_back(std::move(p));
      }
    }
  }
  std::sort(players.begin(), players.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return players;
}

GameContext make_context(const RoadMap& road, const std::vector<VehicleState>& platoon,
                         const std::vector<VehicleState>& background, const ConfigAction& target, bool use_pdi,
                         const CoalitionParams& cp) {
  if (platoon.empty()) throw std::invalid_argument("make_context: empty platoon");
  if (target.size() != static_cast<int>(platoon.size())) {
    throw std::invalid_argument("make_context: configuration does not match platoon size");
  }
  GameContext ctx;
  ctx.road = road;
  for (int i : front_to_back(platoon)) ctx.platoon.push_back(platoon[static_cast<size_t>(i)]);
  ctx.background = background;
  ctx.use_pdi = use_pdi;
  const auto partition = form_coalitions(ctx.platoon, background, cp);
  ctx.phase = resolve_phase(target, partition);
  const auto players = make_players(partition, target);
  ctx.players = static_cast<int>(players.size());
  ctx.player_of.assign(ctx.platoon.size(), -1);
  for (size_t p = 0; p < players.size(); ++p) {
    for (int m : players[p]) ctx.player_of[static_cast<size_t>(m)] = static_cast<int>(p);
  }
  return ctx;
}

namespace {

int base_lane(const GameContext& ctx, const VehicleState& v) {
  const int lane = ctx.road.is_main_lane(v.target_lane) ? v.target_lane : ctx.road.nearest_lane(v.y);
  return std::clamp(lane, 0, ctx.road.lane_count - 1);
}

bool in_band(const VehicleState& a, const VehicleState& b) { return std::abs(a.y - b.y) < 2.5; }

// Nearest vehicle ahead of `self` in its lane band among the given sets.
const VehicleState* leader_of(const VehicleState& self, const std::vector<VehicleState>& a,
                              const std::vector<VehicleState>& b, int self_index_in_a, bool* is_platoon) {
  const VehicleState* best = nullptr;
  auto scan = [&](const std::vector<VehicleState>& set, bool platoon_set) {
    for (size_t k = 0; k < set.size(); ++k) {
      if (platoon_set && static_cast<int>(k) == self_index_in_a) continue;
      const auto& o = set[k];
      if (o.x <= self.x || !in_band(self, o)) continue;
      if (!best || o.x < best->x) {
        best = &o;
        if (is_platoon) *is_platoon = platoon_set;
      }
    }
  };
  scan(a, true);
  scan(b, false);
  return best;
}

}  // namespace

std::vector<LateralAction> expand_actions(const GameContext& ctx, const std::vector<LateralAction>& player_actions) {
  if (static_cast<int>(player_actions.size()) != ctx.players) {
    throw std::invalid_argument("expand_actions: one action per player required");
  }
  std::vector<LateralAction> out(ctx.platoon.size());
  for (size_t i = 0; i < ctx.platoon.size(); ++i) {
    out[i] = player_actions[static_cast<size_t>(ctx.player_of[i])];
  }
  return out;
}

bool action_on_road(const GameContext& ctx, const std::vector<LateralAction>& member_actions) {
  for (size_t i = 0; i < ctx.platoon.size(); ++i) {
    const int dest = base_lane(ctx, ctx.platoon[i]) + lane_delta(member_actions[i]);
    if (!ctx.road.is_main_lane(dest)) return false;
  }
  return true;
}

Prediction predict_outcome(const GameContext& ctx, const std::vector<LateralAction>& member_actions,
                           const PredictParams& pp) {
  pp.validate();
  const size_t n = ctx.platoon.size();
  if (member_actions.size() != n) throw std::invalid_argument("predict_outcome: one action per member required");
  const int steps = static_cast<int>(std::lround(pp.horizon / pp.dt));
  const auto& road = ctx.road;

  // Lateral profiles.
  std::vector<Quintic> lateral(n);
  std::vector<double> start(n, 0.0);
  std::vector<int> acting_rank(static_cast<size_t>(ctx.players), 0);
  for (size_t i = 0; i < n; ++i) {
    const auto& v = ctx.platoon[i];
    const int base = base_lane(ctx, v);
    const int dest = std::clamp(base + lane_delta(member_actions[i]), 0, road.lane_count - 1);
    if (member_actions[i] == LateralAction::kKeep) {
      lateral[i] = Quintic::fit(v.y, v.vy(), 0.0, road.lane_center(base), 0.0, 0.0, pp.lane_change_duration);
    } else {
      const int p = ctx.player_of[i];
      start[i] = pp.stagger * acting_rank[static_cast<size_t>(p)]++;
      lateral[i] = Quintic::fit(v.y, 0.0, 0.0, road.lane_center(dest), 0.0, 0.0, pp.lane_change_duration);
    }
  }
  auto lat_y = [&](size_t i, double t) {
    if (t < start[i]) return ctx.platoon[i].y;
    return lateral[i].p(t - start[i]);
  };
  auto lat_vy = [&](size_t i, double t) {
    if (t < start[i]) return 0.0;
    return lateral[i].v(t - start[i]);
  };

  Prediction pr;
  pr.times.reserve(static_cast<size_t>(steps + 1));
  for (int k = 0; k <= steps; ++k) pr.times.push_back(k * pp.dt);

  // Background: constant velocity, lateral drift stops at the adjacent lane.
  pr.background.assign(static_cast<size_t>(steps + 1), ctx.background);
  for (size_t j = 0; j < ctx.background.size(); ++j) {
    const auto& b = ctx.background[j];
    const double vx = b.vx(), vy = b.vy();
    const int lane0 = road.nearest_lane(b.y);
    double y_stop = b.y;
    if (vy > 1e-6) y_stop = std::max(b.y, road.lane_center(std::min(lane0 + 1, road.lane_count - 1)));
    if (vy < -1e-6) y_stop = std::min(b.y, road.lane_center(std::max(lane0 - 1, road.ramp ? kRampLane : 0)));
    for (int k = 1; k <= steps; ++k) {
      auto& s = pr.background[static_cast<size_t>(k)][j];
      const double t = pr.times[static_cast<size_t>(k)];
      s.x = b.x + vx * t;
      double y = b.y + vy * t;
      if (vy > 0.0) y = std::min(y, y_stop);
      if (vy < 0.0) y = std::max(y, y_stop);
      s.y = y;
      s.lane = road.nearest_lane(y);
    }
  }

  // Platoon: members front to back, each tracking the predicted leader.
  IdmParams idm;
  idm.desired_speed = pp.cruise_speed;
  idm.max_accel = 2.0;
  idm.comfortable_decel = 3.0;
  pr.platoon.assign(static_cast<size_t>(steps + 1), ctx.platoon);
  for (int k = 0; k < steps; ++k) {
    const auto& cur = pr.platoon[static_cast<size_t>(k)];
    const auto& bg = pr.background[static_cast<size_t>(k)];
    auto& next = pr.platoon[static_cast<size_t>(k + 1)];
    const double t1 = pr.times[static_cast<size_t>(k + 1)];
    for (size_t i = 0; i < n; ++i) {
      const auto& v = cur[i];
      bool platoon_leader = false;
      const VehicleState* lead = leader_of(v, cur, bg, static_cast<int>(i), &platoon_leader);
      double a = 0.0;
      if (!lead) {
        a = idm_acceleration(v.speed, kInf, 0.0, idm).accel;
      } else {
        IdmParams p = idm;
        p.time_headway = platoon_leader ? pp.platoon_headway : pp.free_headway;
        const double gap = lead->x - v.x - 0.5 * (lead->length + v.length);
        a = idm_acceleration(v.speed, gap, v.speed - lead->vx(), p).accel;
      }
      a = std::clamp(a, -4.0, 2.0);
      auto& s = next[i];
      s.speed = std::max(0.0, v.speed + a * pp.dt);
      s.accel = a;
      s.x = v.x + s.speed * pp.dt;
      s.y = lat_y(i, t1);
      const double vy = lat_vy(i, t1);
      s.heading = std::atan2(vy, std::max(s.speed, 0.1));
      s.lane = road.nearest_lane(s.y);
    }
  }
  return pr;
}

double safety_profit(const SafetyTerms& s, const GameWeights& w) {
  const double ttc = std::min(s.ttc, w.tau_cap);
  const double d2 = std::min(s.dist2, w.d_cap * w.d_cap);
  double j = -s.max_risk + w.k_tau * ttc + w.k_d * d2 - w.collision_penalty * s.overlaps;
  if (s.slot_conflict) j -= w.slot_penalty;
  return j;
}

double efficiency_profit(const std::vector<double>& speeds, double v_max) {
  if (speeds.empty()) return 0.0;
  double sum = 0.0;
  for (double v : speeds) sum += std::max(v, 0.0);
  return sum / static_cast<double>(speeds.size()) / v_max;
}

double integration_entropy(const std::vector<int>& lane_counts, int n_s) {
  double total = 0.0;
  for (int c : lane_counts) total += std::max(c, 0);
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (int c : lane_counts) {
    if (c <= 0) continue;
    const double q = c / total;
    h -= q * std::log(q);
  }
  return n_s * h;
}

double tracking_profit(const std::vector<VehicleState>& seq, const GameWeights& w) {
  double err = 0.0;
  for (size_t j = 0; j + 1 < seq.size(); ++j) {
    const auto& a = seq[j];
    const auto& b = seq[j + 1];
    err += std::abs(a.x - b.x - w.d_target) + w.k_y * std::abs(a.y - b.y) + w.k_v * std::abs(a.speed - b.speed);
  }
  return -err;
}

bool slot_conflict(const GameContext& ctx, const std::vector<LateralAction>& member_actions, const PredictParams& pp) {
  const Prediction pr = predict_outcome(ctx, member_actions, pp);
  const auto k = static_cast<size_t>(std::lround(pp.slot_time / pp.dt));
  const auto& plat = pr.platoon[k];
  const auto& bg = pr.background[k];
  for (size_t i = 0; i < ctx.platoon.size(); ++i) {
    if (member_actions[i] == LateralAction::kKeep) continue;
    VehicleState slot = plat[i];
    slot.y = ctx.road.lane_center(base_lane(ctx, ctx.platoon[i]) + lane_delta(member_actions[i]));
    slot.heading = 0.0;
    if (!gap_acceptable(ctx.road, slot, ctx.road.nearest_lane(slot.y), bg, pp.slot_margin, pp.closing_time)) {
      return true;
    }
    slot.length += 2.0 * pp.slot_margin;
    for (const auto& o : bg) {
      if (check_collision(slot, o)) return true;
    }
    for (size_t j = 0; j < plat.size(); ++j) {
      if (j != i && check_collision(slot, plat[j])) return true;
    }
  }
  return false;
}

namespace {

JointEvaluation evaluate_prediction(const GameContext& ctx, const std::vector<LateralAction>& player_actions,
                                    const std::vector<LateralAction>& member_actions, const Prediction& pr,
                                    bool conflict, const GameWeights& w, const RiskFieldParams& risk,
                                    const PdiParams& pdi) {
  const size_t n = ctx.platoon.size();
  const size_t last = pr.times.size() - 1;
  JointEvaluation ev;
  ev.players.assign(static_cast<size_t>(ctx.players), {});

  // Per-member safety and efficiency.
  std::vector<VehicleState> others;
  for (size_t i = 0; i < n; ++i) {
    const int p = ctx.player_of[i];
    SafetyTerms st;
    st.slot_conflict = conflict && member_actions[i] != LateralAction::kKeep;
    std::vector<double> speeds;
    for (size_t k = 0; k <= last; ++k) {
      const auto& me = pr.platoon[k][i];
      speeds.push_back(me.vx());
      others.clear();
      for (const auto& b : pr.background[k]) others.push_back(b);
      for (size_t j = 0; j < n; ++j) {
        if (ctx.player_of[j] != p) others.push_back(pr.platoon[k][j]);
      }
      st.max_risk = std::max(st.max_risk, risk_reward(me, others, risk));
      if (k == 0) continue;
      bool hit = false;
      for (const auto& b : pr.background[k]) hit = hit || check_collision(me, b);
      for (size_t j = 0; j < n && !hit; ++j) hit = j != i && check_collision(me, pr.platoon[k][j]);
      if (hit) ++st.overlaps;
    }
    const auto& me = pr.platoon[last][i];
    const VehicleState* lv = leader_of(me, pr.platoon[last], pr.background[last], static_cast<int>(i), nullptr);
    if (lv) {
      st.ttc = compute_ttc(me, *lv);
      st.dist2 = (lv->x - me.x) * (lv->x - me.x) + (lv->y - me.y) * (lv->y - me.y);
    }
    auto& pv = ev.players[static_cast<size_t>(p)];
    pv.safety += w.w_s * safety_profit(st, w);
    pv.efficiency += w.w_e * efficiency_profit(speeds, w.v_max);
  }

  // Per-player integration and tracking.
  for (int p = 0; p < ctx.players; ++p) {
    std::vector<int> members;
    for (size_t i = 0; i < n; ++i) {
      if (ctx.player_of[i] == p) members.push_back(static_cast<int>(i));
    }
    double cx = 0.0;
    for (int m : members) cx += pr.platoon[last][static_cast<size_t>(m)].x;
    cx /= static_cast<double>(members.size());
    std::vector<int> counts(static_cast<size_t>(ctx.road.lane_count), 0);
    auto count = [&](const VehicleState& v) {
      const int lane = ctx.road.nearest_lane(v.y);
      if (ctx.road.is_main_lane(lane) && std::abs(v.x - cx) <= w.entropy_window) ++counts[static_cast<size_t>(lane)];
    };
    for (const auto& v : pr.platoon[last]) count(v);
    if (w.entropy_counts_background) {
      for (const auto& v : pr.background[last]) count(v);
    }
    auto& pv = ev.players[static_cast<size_t>(p)];
    pv.integration = -w.w_it * integration_entropy(counts, static_cast<int>(members.size()));

    if (ctx.phase == GamePhase::kMerging) {
      std::vector<VehicleState> seq;
      if (members.front() > 0) seq.push_back(pr.platoon[last][static_cast<size_t>(members.front() - 1)]);
      for (int m : members) seq.push_back(pr.platoon[last][static_cast<size_t>(m)]);
      pv.tracking = w.w_er * tracking_profit(seq, w);
    }
  }

  if (ctx.use_pdi && ctx.phase == GamePhase::kMerging) {
    std::vector<VehicleState> plat = pr.platoon[last];
    std::vector<VehicleState> bg = pr.background[last];
    for (auto& v : plat) v.lane = std::clamp(ctx.road.nearest_lane(v.y), 0, ctx.road.lane_count - 1);
    for (auto& v : bg) v.lane = ctx.road.nearest_lane(v.y);
    PdiResult r;
    try {
      r = compute_pdi(build_node_graph(ctx.road, plat, bg, pdi));
    } catch (const std::invalid_argument&) {
      r.feasible = false;
    }
    ev.pdi_feasible = r.feasible;
    ev.pdi = r.feasible ? r.value : w.pdi_infeasible;
    for (auto& pv : ev.players) pv.pdi_term = -w.w_pdi * ev.pdi;
  }

  for (auto& pv : ev.players) {
    pv.value = pv.safety + pv.efficiency + pv.integration + pv.tracking + pv.pdi_term;
    ev.total += pv.value;
  }
  (void)player_actions;
  return ev;
}

}  // namespace

JointEvaluation evaluate_joint(const GameContext& ctx, const std::vector<LateralAction>& player_actions,
                               const GameWeights& w, const PredictParams& pp, const RiskFieldParams& risk,
                               const PdiParams& pdi) {
  const auto members = expand_actions(ctx, player_actions);
  const Prediction pr = predict_outcome(ctx, members, pp);
  const bool conflict = slot_conflict(ctx, members, pp);
  return evaluate_prediction(ctx, player_actions, members, pr, conflict, w, risk, pdi);
}

double coalition_value(const GameContext& ctx, int player, const std::vector<LateralAction>& player_actions,
                       const GameWeights& w, const PredictParams& pp, const RiskFieldParams& risk,
                       const PdiParams& pdi) {
  if (player < 0 || player >= ctx.players) throw std::invalid_argument("coalition_value: bad player index");
  return evaluate_joint(ctx, player_actions, w, pp, risk, pdi).players[static_cast<size_t>(player)].value;
}

namespace {

int lane_changes(const std::vector<LateralAction>& members) {
  int c = 0;
  for (auto a : members) c += a != LateralAction::kKeep;
  return c;
}

// Strictly better under value, then fewer lane changes, then lexicographic.
bool preferred(double value, const std::vector<LateralAction>& members, const std::vector<LateralAction>& actions,
               const GameDecision& best) {
  if (best.player_actions.empty()) return true;
  if (value != best.evaluation.total) return value > best.evaluation.total;
  const int lc = lane_changes(members), best_lc = lane_changes(best.member_actions);
  if (lc != best_lc) return lc < best_lc;
  return actions < best.player_actions;
}

std::vector<std::vector<LateralAction>> all_player_actions(int players) {
  std::vector<std::vector<LateralAction>> out;
  std::vector<LateralAction> cur(static_cast<size_t>(players), LateralAction::kKeep);
  int total = 1;
  for (int p = 0; p < players; ++p) total *= 3;
  for (int code = 0; code < total; ++code) {
    int c = code;
    for (int p = players - 1; p >= 0; --p) {
      cur[static_cast<size_t>(p)] = static_cast<LateralAction>(c % 3);
      c /= 3;
    }
    out.push_back(cur);
  }
  return out;
}

}  // namespace

std::vector<std::vector<LateralAction>> prune_joint_actions(const GameContext& ctx, const PredictParams& pp,
                                                            int* total) {
  auto all = all_player_actions(ctx.players);
  if (total) *total = static_cast<int>(all.size());
  std::vector<std::vector<LateralAction>> kept;
  for (auto& a : all) {
    const auto members = expand_actions(ctx, a);
    const bool keep_all = lane_changes(members) == 0;
    if (!keep_all && (!action_on_road(ctx, members) || slot_conflict(ctx, members, pp))) continue;
    kept.push_back(std::move(a));
  }
  return kept;
}

GameDecision solve_tu_game(const GameContext& ctx, const GameWeights& w, const PredictParams& pp,
                           const RiskFieldParams& risk, const PdiParams& pdi) {
  w.validate();
  int total = 0;
  const auto kept = prune_joint_actions(ctx, pp, &total);
  GameDecision best;
  best.candidates = total;
  best.pruned = total - static_cast<int>(kept.size());
  for (const auto& a : kept) {
    const auto members = expand_actions(ctx, a);
    const Prediction pr = predict_outcome(ctx, members, pp);
    // Kept lane changes have a free slot by construction.
    const JointEvaluation ev = evaluate_prediction(ctx, a, members, pr, false, w, risk, pdi);
    if (preferred(ev.total, members, a, best)) {
      best.player_actions = a;
      best.member_actions = members;
      best.evaluation = ev;
    }
  }
  return best;
}

GameDecision brute_force_game(const GameContext& ctx, const GameWeights& w, const PredictParams& pp,
                              const RiskFieldParams& risk, const PdiParams& pdi) {
  const size_t n = ctx.platoon.size();
  size_t total = 1;
  for (size_t i = 0; i < n; ++i) total *= 3;
  GameDecision best;
  std::vector<LateralAction> members(n);
  for (size_t code = 0; code < total; ++code) {
    size_t c = code;
    for (size_t i = n; i-- > 0;) {
      members[i] = static_cast<LateralAction>(c % 3);
      c /= 3;
    }
    std::vector<LateralAction> per_player(static_cast<size_t>(ctx.players), LateralAction::kKeep);
    std::vector<bool> seen(static_cast<size_t>(ctx.players), false);
    bool common_fate = true;
    for (size_t i = 0; i < n && common_fate; ++i) {
      const auto p = static_cast<size_t>(ctx.player_of[i]);
      if (!seen[p]) {
        seen[p] = true;
        per_player[p] = members[i];
      } else if (per_player[p] != members[i]) {
        common_fate = false;
      }
    }
    if (!common_fate || !action_on_road(ctx, members)) continue;
    ++best.candidates;
    const JointEvaluation ev = evaluate_joint(ctx, per_player, w, pp, risk, pdi);
    if (preferred(ev.total, members, per_player, best)) {
      best.player_actions = per_player;
      best.member_actions = members;
      best.evaluation = ev;
    }
  }
  return best;
}

}  // namespace platoon
