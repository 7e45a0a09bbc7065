#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "platoon/world.hpp"

namespace platoon {

inline constexpr double kEmergencyDecel = 9.0;

struct IdmParams {
  double desired_speed = 30.0;  // v0
  double time_headway = 1.5;    // T
  double min_gap = 2.0;         // s0
  double max_accel = 1.5;
  double comfortable_decel = 2.0;
  double exponent = 4.0;

  void validate() const;
};

struct MobilParams {
  double politeness = 0.25;
  double accel_threshold = 0.2;
  double safe_decel_limit = 4.0;

  void validate() const;
};

struct IdmResult {
  double accel = 0.0;
  bool gap_error = false;  // set when the gap was not positive
};

// Intelligent Driver Model acceleration for speed v, bumper gap s and approach
// rate dv = v - v_leader. An infinite gap means a free road.
IdmResult idm_acceleration(double v, double gap, double dv, const IdmParams& p);

struct Neighbor {
  double gap = kInf;  // bumper-to-bumper, always measured from the ego body
  double speed = 0.0;
};

struct LaneContext {
  std::optional<Neighbor> leader;
  std::optional<Neighbor> follower;
};

struct EgoContext {
  double speed = 0.0;
  double length = 5.0;
};

enum class LaneDecision { kKeep, kChange };

// MOBIL lane-change rule. `bias` is added to the target lane's incentive; it
// carries forced-merge pressure for ramp vehicles.
LaneDecision mobil_decide(const EgoContext& ego, const LaneContext& current, const LaneContext& target,
                          const IdmParams& idm, const MobilParams& mobil, double bias = 0.0);

enum class DrivingStyle { kTimid, kNormal, kAggressive };

struct Driver {
  DrivingStyle style = DrivingStyle::kNormal;
  IdmParams idm;
  MobilParams mobil;
  double lane_change_duration = 2.5;
};

// Parameter presets keyed on the nominal traffic speed.
Driver style_preset(DrivingStyle style, double nominal_speed);

struct TrafficSpec {
  double density = 15.0;  // vehicles per km per lane
  std::array<double, 3> style_mix{0.3, 0.5, 0.2};  // timid, normal, aggressive
  double nominal_speed = 25.0;
  std::uint64_t seed = 0;
  double x_begin = 0.0;   // spawn window along the road
  double x_end = -1.0;    // negative: road end

  void validate() const;
};

struct KeepClear {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
};

struct SpawnResult {
  std::vector<VehicleState> vehicles;
  std::vector<Driver> drivers;
  int requested = 0;
  int shortfall = 0;
};

// Random main-lane placement at the requested density. The count is
// round(density * lanes * window_km); vehicles that cannot be placed with the
// minimum gap s0 + v*T after bounded retries are counted as shortfall.
SpawnResult spawn_traffic(const TrafficSpec& spec, const RoadMap& road, const std::vector<KeepClear>& keep_clear,
                          std::mt19937_64& rng, int first_id);

DrivingStyle sample_style(const std::array<double, 3>& mix, std::mt19937_64& rng);

}  // namespace platoon
