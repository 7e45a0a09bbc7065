#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace platoon {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Lane index used for vehicles on the on-ramp acceleration lane. Main lanes are
// numbered 0 (rightmost) upward; a left lane change increases the index.
inline constexpr int kRampLane = -1;

enum class VehicleKind { kCav, kHdv };

struct RampSegment {
  double start = 0.0;
  double end = 0.0;
};

struct RoadMap {
  int lane_count = 3;
  double lane_width = 4.0;
  double length = 3000.0;
  double speed_limit = 40.0;
  std::optional<RampSegment> ramp;

  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  double lane_center(int lane) const { return lane * lane_width; }

  // Lane whose center is closest to y. Returns kRampLane only when a ramp exists
  // and y is closer to the ramp center than to lane 0.
  int nearest_lane(double y) const;

  bool is_main_lane(int lane) const { return lane >= 0 && lane < lane_count; }
  bool ramp_active_at(double x) const;

  // Lateral extent of the drivable surface, including the ramp when present.
  double y_min() const;
  double y_max() const;
};

struct VehicleState {
  int id = 0;
  VehicleKind kind = VehicleKind::kHdv;
  double x = 0.0;  // longitudinal position of the body center
  double y = 0.0;  // lateral position of the body center
  double heading = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  double jerk = 0.0;
  double length = 5.0;
  double width = 2.0;
  int lane = 0;
  int target_lane = 0;

  double vx() const;
  double vy() const;
  double front() const { return x + 0.5 * length; }
  double rear() const { return x - 0.5 * length; }
};

// Advances a vehicle by one explicit-Euler step of the kinematic model with x
// along the road. Acceleration and jerk are backward differences of speed.
VehicleState step_kinematics(const VehicleState& state, double speed, double heading, double dt);

// Time to collision of follower onto leader along the lane. Returns kInf when
// the gap is opening or the "leader" is behind the follower, 0 on overlap.
double compute_ttc(const VehicleState& follower, const VehicleState& leader);

// Oriented-rectangle overlap test (separating axes). Touching counts as overlap.
bool check_collision(const VehicleState& a, const VehicleState& b);

class CommTopology {
 public:
  explicit CommTopology(int n);

  int size() const { return n_; }
  bool link(int from, int to) const { return adjacency_[static_cast<size_t>(from * n_ + to)] != 0; }

 private:
  int n_;
  std::vector<std::uint8_t> adjacency_;
};

// Leader-leader-predecessor-follower topology: E[i][j] = 1 iff i = 0 or i < j,
// with a zero diagonal.
CommTopology build_llpf_topology(int n);

class SimClock {
 public:
  SimClock(double dt = 0.1, double vehicle_period = 1.0, double platoon_period = 5.0);

  double dt() const { return dt_; }
  double time() const { return static_cast<double>(step_) * dt_; }
  std::int64_t step() const { return step_; }
  void tick() { ++step_; }
  void reset() { step_ = 0; }

  int vehicle_period_steps() const { return vehicle_steps_; }
  int platoon_period_steps() const { return platoon_steps_; }
  bool vehicle_decision_due() const { return step_ % vehicle_steps_ == 0; }
  bool platoon_decision_due() const { return step_ % platoon_steps_ == 0; }

 private:
  double dt_;
  int vehicle_steps_;
  int platoon_steps_;
  std::int64_t step_ = 0;
};

// Lane-sorted view over a vehicle set. A vehicle is listed in every lane whose
// band its body overlaps, so vehicles mid lane change appear in both lanes.
class LaneIndex {
 public:
  LaneIndex(const RoadMap& road, const std::vector<VehicleState>& vehicles);

  // Nearest vehicle strictly ahead of position x in the lane, skipping `self`.
  std::optional<int> leader(int lane, double x, int self = -1) const;
  std::optional<int> follower(int lane, double x, int self = -1) const;
  const std::vector<int>& lane_members(int lane) const;

 private:
  const std::vector<VehicleState>* vehicles_;
  int lane_offset_;
  std::vector<std::vector<int>> lanes_;
};

// True when a vehicle's body overlaps the lane band enough to interact with
// traffic in that lane.
bool occupies_lane(const RoadMap& road, const VehicleState& v, int lane);

// Gap acceptance for entering `lane`: every vehicle in or heading for the lane
// must leave a bumper gap of at least margin + closing_speed * closing_time.
bool gap_acceptable(const RoadMap& road, const VehicleState& ego, int lane, const std::vector<VehicleState>& others,
                    double margin, double closing_time);

}  // namespace platoon
