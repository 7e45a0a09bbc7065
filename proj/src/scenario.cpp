#include "platoon/scenario.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace platoon {

using nlohmann::json;

void ScenarioSpec::validate() const {
  road.validate();
  traffic.validate();
  if (case_id != 1 && case_id != 2) throw std::invalid_argument("scenario: case must be 1 or 2");
  if (platoon_size < 2 || platoon_size > 5) throw std::invalid_argument("scenario: platoon size must be in [2, 5]");
  if (!(headway > 0.0)) throw std::invalid_argument("scenario: headway must be positive");
  if (!(platoon_speed >= 0.0)) throw std::invalid_argument("scenario: platoon speed must be non-negative");
  if (!road.is_main_lane(platoon_lane)) throw std::invalid_argument("scenario: platoon lane is not a main lane");
  if (!(episode_length > 0.0)) throw std::invalid_argument("scenario: episode length must be positive");
  if (ramp_rate < 0.0) throw std::invalid_argument("scenario: ramp rate must be non-negative");
  if (ramp_rate > 0.0 && !road.ramp) throw std::invalid_argument("scenario: ramp inflow without a ramp");
  if (!(lead_gap_min > 0.0) || lead_gap_max < lead_gap_min) throw std::invalid_argument("scenario: bad lead gap range");
  if (brake) {
    if (brake->time_min < 0.0 || brake->time_max < brake->time_min) {
      throw std::invalid_argument("scenario: bad brake time range");
    }
    if (!(brake->decel > 0.0) || !(brake->duration > 0.0) || brake->floor_speed < 0.0) {
      throw std::invalid_argument("scenario: bad brake event");
    }
  }
  if (!(success_fraction > 0.0) || !(debounce >= 0.0)) throw std::invalid_argument("scenario: bad success window");
}

json road_to_json(const RoadMap& road) {
  json j = {{"lane_count", road.lane_count},
            {"lane_width", road.lane_width},
            {"length", road.length},
            {"speed_limit", road.speed_limit}};
  if (road.ramp) j["ramp"] = {{"start", road.ramp->start}, {"end", road.ramp->end}};
  return j;
}

RoadMap road_from_json(const json& j) {
  RoadMap r;
  r.lane_count = j.value("lane_count", r.lane_count);
  r.lane_width = j.value("lane_width", r.lane_width);
  r.length = j.value("length", r.length);
  r.speed_limit = j.value("speed_limit", r.speed_limit);
  if (j.contains("ramp") && !j["ramp"].is_null()) {
    r.ramp = RampSegment{j["ramp"].at("start").get<double>(), j["ramp"].at("end").get<double>()};
  }
  r.validate();
  return r;
}

json ScenarioSpec::to_json() const {
  json j = {{"case", case_id},
            {"road", road_to_json(road)},
            {"platoon_size", platoon_size},
            {"headway", headway},
            {"platoon_speed", platoon_speed},
            {"platoon_x", platoon_x},
            {"platoon_lane", platoon_lane},
            {"traffic",
             {{"density", traffic.density},
              {"style_mix", traffic.style_mix},
              {"nominal_speed", traffic.nominal_speed}}},
            {"spawn_behind", spawn_behind},
            {"spawn_ahead", spawn_ahead},
            {"episode_length", episode_length},
            {"ramp_rate", ramp_rate},
            {"ramp_speed", ramp_speed},
            {"lead_gap_min", lead_gap_min},
            {"lead_gap_max", lead_gap_max},
            {"success_fraction", success_fraction},
            {"debounce", debounce}};
  if (brake) {
    j["brake"] = {{"time_min", brake->time_min},
                  {"time_max", brake->time_max},
                  {"decel", brake->decel},
                  {"duration", brake->duration},
                  {"floor_speed", brake->floor_speed}};
  }
  return j;
}

ScenarioSpec ScenarioSpec::from_json(const json& j) {
  ScenarioSpec s = default_scenario(j.value("case", 1));
  if (j.contains("road")) s.road = road_from_json(j["road"]);
  s.platoon_size = j.value("platoon_size", s.platoon_size);
  s.headway = j.value("headway", s.headway);
  s.platoon_speed = j.value("platoon_speed", s.platoon_speed);
  s.platoon_x = j.value("platoon_x", s.platoon_x);
  s.platoon_lane = j.value("platoon_lane", s.platoon_lane);
  if (j.contains("traffic")) {
    const auto& t = j["traffic"];
    s.traffic.density = t.value("density", s.traffic.density);
    if (t.contains("style_mix")) s.traffic.style_mix = t["style_mix"].get<std::array<double, 3>>();
    s.traffic.nominal_speed = t.value("nominal_speed", s.traffic.nominal_speed);
  }
  s.spawn_behind = j.value("spawn_behind", s.spawn_behind);
  s.spawn_ahead = j.value("spawn_ahead", s.spawn_ahead);
  s.episode_length = j.value("episode_length", s.episode_length);
  s.ramp_rate = j.value("ramp_rate", s.ramp_rate);
  s.ramp_speed = j.value("ramp_speed", s.ramp_speed);
  s.lead_gap_min = j.value("lead_gap_min", s.lead_gap_min);
  s.lead_gap_max = j.value("lead_gap_max", s.lead_gap_max);
  s.success_fraction = j.value("success_fraction", s.success_fraction);
  s.debounce = j.value("debounce", s.debounce);
  if (j.contains("brake")) {
    if (j["brake"].is_null()) {
      s.brake.reset();
    } else {
      BrakeEvent b = s.brake.value_or(BrakeEvent{});
      const auto& e = j["brake"];
      b.time_min = e.value("time_min", b.time_min);
      b.time_max = e.value("time_max", b.time_max);
      b.decel = e.value("decel", b.decel);
      b.duration = e.value("duration", b.duration);
      b.floor_speed = e.value("floor_speed", b.floor_speed);
      s.brake = b;
    }
  }
  s.validate();
  return s;
}

ScenarioSpec default_scenario(int case_id) {
  ScenarioSpec s;
  s.case_id = case_id;
  s.road.lane_count = 3;
  s.road.length = 5000.0;
  if (case_id == 1) {
    s.road.ramp = RampSegment{400.0, 3500.0};
    s.traffic.density = 22.0;
    s.traffic.style_mix = {0.2, 0.4, 0.4};
    s.ramp_rate = 0.5;
  } else if (case_id == 2) {
    s.traffic.density = 15.0;
    s.traffic.style_mix = {0.3, 0.5, 0.2};
    s.brake = BrakeEvent{};
  } else {
    throw std::invalid_argument("scenario: case must be 1 or 2");
  }
  return s;
}

InitialWorld build_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  spec.validate();
  InitialWorld w;
  w.road = spec.road;
  std::mt19937_64 rng(seed);

  const double lane_y = spec.road.lane_center(spec.platoon_lane);
  const double rear_x = spec.platoon_x - (spec.platoon_size - 1) * spec.headway;
  if (rear_x - 2.5 < 0.0 || spec.platoon_x + 2.5 > spec.road.length) {
    throw std::runtime_error("scenario: platoon does not fit on the road");
  }
  for (int k = 0; k < spec.platoon_size; ++k) {
    VehicleState v;
    v.id = k;
    v.kind = VehicleKind::kCav;
    v.x = spec.platoon_x - k * spec.headway;
    v.y = lane_y;
    v.speed = spec.platoon_speed;
    v.lane = spec.platoon_lane;
    v.target_lane = spec.platoon_lane;
    w.vehicles.push_back(v);
    w.drivers.push_back(Driver{});
    w.platoon_ids.push_back(k);
  }
  int next_id = spec.platoon_size;

  std::vector<KeepClear> keep;
  const double half_w = 0.5 * spec.road.lane_width;
  double clear_ahead = spec.platoon_x + 60.0;

  if (spec.brake) {
    std::uniform_real_distribution<double> gap(spec.lead_gap_min, spec.lead_gap_max);
    std::uniform_real_distribution<double> when(spec.brake->time_min, spec.brake->time_max);
    const double g = gap(rng);
    const double t_brake = when(rng);
    VehicleState lead;
    lead.id = next_id++;
    lead.kind = VehicleKind::kHdv;
    lead.x = spec.platoon_x + 0.5 * 5.0 + g + 0.5 * lead.length;
    lead.y = lane_y;
    lead.speed = spec.platoon_speed;
    lead.lane = spec.platoon_lane;
    lead.target_lane = spec.platoon_lane;
    Driver d = style_preset(DrivingStyle::kNormal, spec.platoon_speed);
    d.idm.desired_speed = spec.platoon_speed;
    w.vehicles.push_back(lead);
    w.drivers.push_back(d);
    w.lead = ScriptedLead{lead.id, t_brake, *spec.brake};
    clear_ahead = lead.x + 150.0;
  }
  keep.push_back({rear_x - 40.0, clear_ahead, lane_y - half_w, lane_y + half_w});

  TrafficSpec t = spec.traffic;
  t.seed = seed;
  t.x_begin = std::max(0.0, spec.platoon_x - spec.spawn_behind);
  t.x_end = std::min(spec.road.length, spec.platoon_x + spec.spawn_ahead);
  auto spawned = spawn_traffic(t, spec.road, keep, rng, next_id);
  for (size_t i = 0; i < spawned.vehicles.size(); ++i) {
    w.vehicles.push_back(spawned.vehicles[i]);
    w.drivers.push_back(spawned.drivers[i]);
  }
  next_id += static_cast<int>(spawned.vehicles.size());
  w.shortfall = spawned.shortfall;
  w.next_id = next_id;
  return w;
}

json InitialWorld::to_json() const {
  json vs = json::array();
  for (const auto& v : vehicles) {
    vs.push_back({{"id", v.id},
                  {"kind", v.kind == VehicleKind::kCav ? "cav" : "hdv"},
                  {"x", v.x},
                  {"y", v.y},
                  {"speed", v.speed},
                  {"lane", v.lane}});
  }
  json j = {{"road", road_to_json(road)}, {"vehicles", vs}, {"platoon_ids", platoon_ids}, {"shortfall", shortfall}};
  if (lead) j["lead"] = {{"id", lead->id}, {"brake_time", lead->brake_time}};
  return j;
}

}  // namespace platoon
