#include "platoon/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace platoon {

namespace {

int lane_of(const RoadMap& road, const VehicleState& v) { return road.nearest_lane(v.y); }

bool settled(const RoadMap& road, const VehicleState& v, int lane, double tol) {
  return std::abs(v.y - road.lane_center(lane)) <= tol;
}

// Nearest vehicle ahead in the same lane band, any kind.
double member_ttc(const VehicleState& ego, const std::vector<VehicleState>& platoon,
                  const std::vector<VehicleState>& background) {
  const VehicleState* lead = nullptr;
  auto scan = [&](const std::vector<VehicleState>& set) {
    for (const auto& o : set) {
      if (o.id == ego.id || o.x <= ego.x || std::abs(o.y - ego.y) >= 2.5) continue;
      if (!lead || o.x < lead->x) lead = &o;
    }
  };
  scan(platoon);
  scan(background);
  return lead ? compute_ttc(ego, *lead) : kInf;
}

int side_target(const RoadMap& road, int lane, int away_from) {
  if (away_from != 0) {
    const int t = lane - away_from;
    return road.is_main_lane(t) ? -away_from : 0;
  }
  if (road.is_main_lane(lane + 1)) return 1;
  if (road.is_main_lane(lane - 1)) return -1;
  return 0;
}

}  // namespace

Threat assess_threat(const std::vector<VehicleState>& platoon, const std::vector<VehicleState>& background,
                     const RoadMap& road, const RiskFieldParams& risk, const BaselineParams& p) {
  Threat t;
  if (platoon.empty()) return t;
  int drift_side = 0;
  for (size_t i = 0; i < platoon.size() && !t.triggered; ++i) {
    const auto& m = platoon[i];
    const int lane = lane_of(road, m);
    if (member_ttc(m, platoon, background) < p.trigger_ttc || risk_reward(m, background, risk) > p.trigger_risk) {
      t.triggered = true;
      t.at_risk = static_cast<int>(i);
      break;
    }
    for (const auto& o : background) {
      if (std::abs(o.x - m.x) > p.threat_window) continue;
      const int ol = lane_of(road, o);
      if (std::abs(ol - lane) != 1) continue;
      const int side = ol > lane ? 1 : -1;
      const double toward = -side * o.vy();
      if (toward > p.threat_lateral_speed || (o.target_lane == lane && ol != lane)) {
        t.triggered = true;
        t.at_risk = static_cast<int>(i);
        drift_side = side;
        break;
      }
    }
  }
  if (t.triggered) t.target_delta = side_target(road, lane_of(road, platoon[static_cast<size_t>(t.at_risk)]), drift_side);
  return t;
}

double siplc_window(int n, double vehicle_length, const BaselineParams& p) {
  return (n - 1) * p.spacing + n * vehicle_length + p.siplc_fore + p.siplc_aft;
}

double suplc_window(double vehicle_length, const BaselineParams& p) {
  return vehicle_length + p.suplc_fore + p.suplc_aft;
}

bool window_clear(const RoadMap& road, int lane, double x_lo, double x_hi, const std::vector<VehicleState>& vehicles,
                  const std::vector<int>& ignore_ids) {
  if (!road.is_main_lane(lane)) return false;
  for (const auto& v : vehicles) {
    if (std::find(ignore_ids.begin(), ignore_ids.end(), v.id) != ignore_ids.end()) continue;
    if (!occupies_lane(road, v, lane)) continue;
    if (v.front() >= x_lo && v.rear() <= x_hi) return false;
  }
  return true;
}

std::vector<LateralAction> siplc_step(const std::vector<VehicleState>& platoon,
                                      const std::vector<VehicleState>& background, const RoadMap& road,
                                      const Threat& threat, const BaselineParams& p) {
  std::vector<LateralAction> out(platoon.size(), LateralAction::kKeep);
  if (!threat.triggered || threat.target_delta == 0 || platoon.empty()) return out;
  const int lane = lane_of(road, platoon.front());
  for (const auto& m : platoon) {
    if (lane_of(road, m) != lane || !settled(road, m, lane, p.settle_tolerance)) return out;
  }
  const int target = lane + threat.target_delta;
  double front = platoon.front().x, rear = platoon.front().x;
  for (const auto& m : platoon) {
    front = std::max(front, m.x);
    rear = std::min(rear, m.x);
  }
  const double mid = 0.5 * (front + rear);
  const double half = 0.5 * siplc_window(static_cast<int>(platoon.size()), platoon.front().length, p);
  if (!window_clear(road, target, mid - half, mid + half, background)) return out;
  const auto a = threat.target_delta > 0 ? LateralAction::kLeft : LateralAction::kRight;
  std::fill(out.begin(), out.end(), a);
  return out;
}

std::vector<LateralAction> SuplcController::step(const std::vector<VehicleState>& platoon,
                                                 const std::vector<VehicleState>& background, const RoadMap& road,
                                                 const Threat& threat) {
  std::vector<LateralAction> out(platoon.size(), LateralAction::kKeep);
  if (platoon.empty()) return out;
  if (target_lane_ < 0) {
    if (!threat.triggered || threat.target_delta == 0) return out;
    target_lane_ = lane_of(road, platoon.front()) + threat.target_delta;
  }
  bool predecessor_done = true;
  bool all_done = true;
  for (size_t i = 0; i < platoon.size(); ++i) {
    const auto& m = platoon[i];
    const bool moving = m.target_lane == target_lane_;
    const bool done = moving && settled(road, m, target_lane_, p_.settle_tolerance);
    if (!done) all_done = false;
    if (moving) {
      predecessor_done = done;
      continue;
    }
    if (!predecessor_done) break;
    const int cur = lane_of(road, m);
    const int delta = target_lane_ - cur;
    if (std::abs(delta) != 1) break;
    const double half = 0.5 * m.length;
    if (window_clear(road, target_lane_, m.x - half - p_.suplc_aft, m.x + half + p_.suplc_fore, background)) {
      out[i] = delta > 0 ? LateralAction::kLeft : LateralAction::kRight;
    }
    break;
  }
  if (all_done) target_lane_ = -1;
  return out;
}

std::vector<LateralAction> rrl_step(const std::vector<VehicleState>& platoon,
                                    const std::vector<VehicleState>& background, const RoadMap& road,
                                    const ConfigAction& config, const Threat& threat, const BaselineParams& p) {
  std::vector<LateralAction> out(platoon.size(), LateralAction::kKeep);
  if (platoon.empty() || config.size() != static_cast<int>(platoon.size())) return out;
  // Members still moving are left alone.
  for (const auto& m : platoon) {
    if (!settled(road, m, m.target_lane, p.settle_tolerance)) return out;
  }
  auto group_window_clear = [&](const std::vector<int>& members, int target) {
    double front = -kInf, rear = kInf;
    for (int i : members) {
      front = std::max(front, platoon[static_cast<size_t>(i)].front());
      rear = std::min(rear, platoon[static_cast<size_t>(i)].rear());
    }
    const bool clear_bg = window_clear(road, target, rear - p.siplc_aft, front + p.siplc_fore, background);
    // Platoon members in the target lane still need room, without the margins.
    std::vector<VehicleState> others;
    for (size_t k = 0; k < platoon.size(); ++k) {
      if (std::find(members.begin(), members.end(), static_cast<int>(k)) == members.end()) {
        others.push_back(platoon[k]);
      }
    }
    return clear_bg && window_clear(road, target, rear - 2.0, front + 2.0, others);
  };
  auto set_group = [&](const std::vector<int>& members, int delta) {
    const auto a = delta > 0 ? LateralAction::kLeft : LateralAction::kRight;
    for (int i : members) out[static_cast<size_t>(i)] = a;
  };

  if (!config.single()) {
    // Split: once, while the whole platoon still shares a lane. The group holding
    // the at-risk member moves away; without a threat the rear group does.
    const int lane = lane_of(road, platoon.front());
    for (const auto& m : platoon) {
      if (lane_of(road, m) != lane) return out;
    }
    const int g = threat.triggered ? config.group_of(threat.at_risk) : static_cast<int>(config.groups.size()) - 1;
    const int delta = threat.triggered && threat.target_delta != 0 ? threat.target_delta : side_target(road, lane, 0);
    if (delta == 0) return out;
    const auto& members = config.groups[static_cast<size_t>(g)];
    if (group_window_clear(members, lane + delta)) set_group(members, delta);
    return out;
  }

  // Single group: members outside the leader's lane rejoin behind the leader's group.
  const int lead_lane = lane_of(road, platoon.front());
  for (size_t i = 1; i < platoon.size(); ++i) {
    const int lane = lane_of(road, platoon[i]);
    if (lane == lead_lane) continue;
    const int delta = lead_lane > lane ? 1 : -1;
    // Rejoin only behind a platoon member already in the leader lane.
    bool behind = false;
    for (size_t k = 0; k < i; ++k) {
      if (lane_of(road, platoon[k]) == lead_lane && platoon[k].x > platoon[i].x) behind = true;
    }
    if (!behind) continue;
    std::vector<int> self{static_cast<int>(i)};
    const double half = 0.5 * platoon[i].length;
    const bool clear = window_clear(road, lane + delta, platoon[i].x - half - p.suplc_aft,
                                    platoon[i].x + half + p.suplc_fore, background) &&
                       window_clear(road, lane + delta, platoon[i].x - half - 2.0, platoon[i].x + half + 2.0,
                                    platoon, {platoon[i].id});
    if (clear) set_group(self, delta);
  }
  return out;
}

}  // namespace platoon
