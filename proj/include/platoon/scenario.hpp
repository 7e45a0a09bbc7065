#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "platoon/traffic.hpp"
#include "platoon/world.hpp"

namespace platoon {

// Hard stop of the vehicle directly ahead of the platoon.
struct BrakeEvent {
  double time_min = 8.0;   // trigger time is drawn uniformly per seed
  double time_max = 20.0;
  double decel = 6.0;
  double duration = 3.0;
  double floor_speed = 10.0;  // braking ends here; the vehicle then cruises at it
};

struct ScenarioSpec {
  int case_id = 1;
  RoadMap road;
  int platoon_size = 3;
  double headway = 10.0;       // center-to-center spacing
  double platoon_speed = 25.0;
  double platoon_x = 300.0;    // leader position
  int platoon_lane = 1;
  TrafficSpec traffic;
  double spawn_behind = 500.0; // traffic window relative to the leader
  double spawn_ahead = 1000.0;
  double episode_length = 120.0;
  double ramp_rate = 0.0;      // vehicles per second entering at the ramp start
  double ramp_speed = 20.0;
  double lead_gap_min = 15.0;  // bumper gap to the braking vehicle
  double lead_gap_max = 50.0;
  std::optional<BrakeEvent> brake;
  double success_fraction = 0.15;  // success window as a share of the episode
  double debounce = 3.0;           // formation must hold this long to count

  void validate() const;
  nlohmann::json to_json() const;
  static ScenarioSpec from_json(const nlohmann::json& j);
};

// Defaults for the two case studies.
ScenarioSpec default_scenario(int case_id);

struct ScriptedLead {
  int id = -1;
  double brake_time = 0.0;
  BrakeEvent event;
};

struct InitialWorld {
  RoadMap road;
  std::vector<VehicleState> vehicles;  // platoon first, front to back
  std::vector<Driver> drivers;         // parallel to vehicles; unused for CAVs
  std::vector<int> platoon_ids;
  std::optional<ScriptedLead> lead;
  int next_id = 0;
  int shortfall = 0;

  nlohmann::json to_json() const;
};

// Throws std::invalid_argument for an invalid spec and std::runtime_error when
// the platoon cannot be placed on the road.
InitialWorld build_scenario(const ScenarioSpec& spec, std::uint64_t seed);

nlohmann::json road_to_json(const RoadMap& road);
RoadMap road_from_json(const nlohmann::json& j);

}  // namespace platoon
