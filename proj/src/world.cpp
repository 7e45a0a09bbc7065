#include "platoon/world.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace platoon {

void RoadMap::validate() const {
  if (lane_count < 2) throw std::invalid_argument("road needs at least two lanes");
  if (!(lane_width > 0.0)) throw std::invalid_argument("lane width must be positive");
  if (!(length > 0.0)) throw std::invalid_argument("road length must be positive");
  if (!(speed_limit > 0.0)) throw std::invalid_argument("speed limit must be positive");
  if (ramp) {
    if (ramp->start < 0.0 || ramp->end > length || ramp->start >= ramp->end) {
      throw std::invalid_argument("ramp segment must lie within the road");
    }
  }
}

int RoadMap::nearest_lane(double y) const {
  int lane = static_cast<int>(std::lround(y / lane_width));
  int lowest = ramp ? kRampLane : 0;
  return std::clamp(lane, lowest, lane_count - 1);
}

bool RoadMap::ramp_active_at(double x) const {
  return ramp && x >= ramp->start && x <= ramp->end;
}

double RoadMap::y_min() const {
  int lowest = ramp ? kRampLane : 0;
  return lane_center(lowest) - 0.5 * lane_width;
}

double RoadMap::y_max() const { return lane_center(lane_count - 1) + 0.5 * lane_width; }

double VehicleState::vx() const { return speed * std::cos(heading); }
double VehicleState::vy() const { return speed * std::sin(heading); }

VehicleState step_kinematics(const VehicleState& state, double speed, double heading, double dt) {
  if (!std::isfinite(speed) || !std::isfinite(heading) || !std::isfinite(dt) ||
      !std::isfinite(state.x) || !std::isfinite(state.y)) {
    throw std::invalid_argument("step_kinematics: non-finite input");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("step_kinematics: dt must be positive");
  if (speed < 0.0) throw std::invalid_argument("step_kinematics: speed must be non-negative");

  VehicleState next = state;
  next.x = state.x + speed * std::cos(heading) * dt;
  next.y = state.y + speed * std::sin(heading) * dt;
  next.speed = speed;
  next.heading = heading;
  next.accel = (speed - state.speed) / dt;
  next.jerk = (next.accel - state.accel) / dt;
  return next;
}

double compute_ttc(const VehicleState& follower, const VehicleState& leader) {
  const double dx = leader.x - follower.x;
  const double half = 0.5 * (leader.length + follower.length);
  if (dx < -half) return kInf;
  const double gap = dx - half;
  if (gap <= 0.0) return 0.0;
  const double closing = follower.vx() - leader.vx();
  if (closing <= 0.0) return kInf;
  return gap / closing;
}

namespace {

struct Box {
  std::array<double, 2> center;
  std::array<double, 2> axis_u;  // along heading
  std::array<double, 2> axis_v;  // normal
  double half_l;
  double half_w;
};

Box make_box(const VehicleState& s) {
  const double c = std::cos(s.heading);
  const double sn = std::sin(s.heading);
  return Box{{s.x, s.y}, {c, sn}, {-sn, c}, 0.5 * s.length, 0.5 * s.width};
}

double project_radius(const Box& b, const std::array<double, 2>& axis) {
  const double du = std::abs(b.axis_u[0] * axis[0] + b.axis_u[1] * axis[1]);
  const double dv = std::abs(b.axis_v[0] * axis[0] + b.axis_v[1] * axis[1]);
  return b.half_l * du + b.half_w * dv;
}

}  // namespace

bool check_collision(const VehicleState& a, const VehicleState& b) {
  const Box ba = make_box(a);
  const Box bb = make_box(b);
  const std::array<double, 2> d{bb.center[0] - ba.center[0], bb.center[1] - ba.center[1]};
  for (const auto& axis : {ba.axis_u, ba.axis_v, bb.axis_u, bb.axis_v}) {
    const double dist = std::abs(d[0] * axis[0] + d[1] * axis[1]);
    // Small tolerance so that exactly touching boxes are reported as overlapping
    // despite rounding in the axis projections.
    if (dist > project_radius(ba, axis) + project_radius(bb, axis) + 1e-12) return false;
  }
  return true;
}

CommTopology::CommTopology(int n) : n_(n), adjacency_(static_cast<size_t>(n * n), 0) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && (i == 0 || i < j)) adjacency_[static_cast<size_t>(i * n + j)] = 1;
    }
  }
}

CommTopology build_llpf_topology(int n) {
  if (n < 2) throw std::invalid_argument("platoon topology needs at least two vehicles");
  return CommTopology(n);
}

SimClock::SimClock(double dt, double vehicle_period, double platoon_period) : dt_(dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("clock dt must be positive");
  auto steps_of = [dt](double period) {
    const double ratio = period / dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
      throw std::invalid_argument("decision periods must be integer multiples of dt");
    }
    return static_cast<int>(rounded);
  };
  vehicle_steps_ = steps_of(vehicle_period);
  platoon_steps_ = steps_of(platoon_period);
}

bool occupies_lane(const RoadMap& road, const VehicleState& v, int lane) {
  // A body centered on an adjacent lane is 4 m away and does not qualify; one
  // that has moved ~1.3 m toward the lane does.
  const double reach = 0.5 * road.lane_width + 0.5 * v.width - 0.3;
  return std::abs(v.y - road.lane_center(lane)) < reach;
}

bool gap_acceptable(const RoadMap& road, const VehicleState& ego, int lane, const std::vector<VehicleState>& others,
                    double margin, double closing_time) {
  for (const auto& o : others) {
    if (o.id == ego.id) continue;
    if (road.nearest_lane(o.y) != lane && o.target_lane != lane && !occupies_lane(road, o, lane)) continue;
    const double gap = std::abs(o.x - ego.x) - 0.5 * (o.length + ego.length);
    const double closing = o.x >= ego.x ? ego.speed - o.speed : o.speed - ego.speed;
    if (gap < margin + std::max(0.0, closing) * closing_time) return false;
  }
  return true;
}

LaneIndex::LaneIndex(const RoadMap& road, const std::vector<VehicleState>& vehicles)
    : vehicles_(&vehicles), lane_offset_(road.ramp ? 1 : 0) {
  const int lowest = road.ramp ? kRampLane : 0;
  lanes_.resize(static_cast<size_t>(road.lane_count + lane_offset_));
  for (int i = 0; i < static_cast<int>(vehicles.size()); ++i) {
    const auto& v = vehicles[static_cast<size_t>(i)];
    const int center_lane = road.nearest_lane(v.y);
    for (int lane = std::max(lowest, center_lane - 1); lane <= std::min(road.lane_count - 1, center_lane + 1);
         ++lane) {
      if (lane == center_lane || occupies_lane(road, v, lane)) {
        lanes_[static_cast<size_t>(lane + lane_offset_)].push_back(i);
      }
    }
  }
  for (auto& members : lanes_) {
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      const auto& va = vehicles[static_cast<size_t>(a)];
      const auto& vb = vehicles[static_cast<size_t>(b)];
      if (va.x != vb.x) return va.x < vb.x;
      return va.id < vb.id;
    });
  }
}

const std::vector<int>& LaneIndex::lane_members(int lane) const {
  static const std::vector<int> kEmpty;
  const int slot = lane + lane_offset_;
  if (slot < 0 || slot >= static_cast<int>(lanes_.size())) return kEmpty;
  return lanes_[static_cast<size_t>(slot)];
}

std::optional<int> LaneIndex::leader(int lane, double x, int self) const {
  const auto& members = lane_members(lane);
  auto it = std::upper_bound(members.begin(), members.end(), x,
                             [&](double pos, int idx) { return pos < (*vehicles_)[static_cast<size_t>(idx)].x; });
  for (; it != members.end(); ++it) {
    if (*it != self) return *it;
  }
  return std::nullopt;
}

std::optional<int> LaneIndex::follower(int lane, double x, int self) const {
  const auto& members = lane_members(lane);
  auto it = std::lower_bound(members.begin(), members.end(), x,
                             [&](int idx, double pos) { return (*vehicles_)[static_cast<size_t>(idx)].x < pos; });
  while (it != members.begin()) {
    --it;
    if (*it != self) return *it;
  }
  return std::nullopt;
}

}  // namespace platoon
