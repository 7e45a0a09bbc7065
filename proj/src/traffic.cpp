#include "platoon/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace platoon {

void IdmParams::validate() const {
  if (!(desired_speed > 0 && time_headway > 0 && min_gap > 0 && max_accel > 0 && comfortable_decel > 0)) {
    throw std::invalid_argument("IDM parameters must be positive");
  }
  if (!(exponent >= 1.0)) throw std::invalid_argument("IDM exponent must be >= 1");
}

void MobilParams::validate() const {
  if (politeness < 0.0 || politeness > 1.0) throw std::invalid_argument("MOBIL politeness must lie in [0,1]");
  if (!(accel_threshold > 0.0 && safe_decel_limit > 0.0)) {
    throw std::invalid_argument("MOBIL thresholds must be positive");
  }
}

IdmResult idm_acceleration(double v, double gap, double dv, const IdmParams& p) {
  if (!std::isfinite(v) || !std::isfinite(dv) || std::isnan(gap)) {
    throw std::invalid_argument("idm_acceleration: non-finite input");
  }
  if (gap <= 0.0) return {-kEmergencyDecel, true};
  const double free_term = std::pow(std::max(v, 0.0) / p.desired_speed, p.exponent);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    const double s_star = p.min_gap + std::max(0.0, v * p.time_headway +
                                                        v * dv / (2.0 * std::sqrt(p.max_accel * p.comfortable_decel)));
    interaction = (s_star / gap) * (s_star / gap);
  }
  const double a = p.max_accel * (1.0 - free_term - interaction);
  return {std::clamp(a, -kEmergencyDecel, p.max_accel), false};
}

namespace {

// Acceleration of a vehicle with speed v behind an optional leader.
IdmResult accel_behind(double v, const std::optional<Neighbor>& leader, const IdmParams& p) {
  if (!leader) return idm_acceleration(v, kInf, 0.0, p);
  return idm_acceleration(v, leader->gap, v - leader->speed, p);
}

}  // namespace

LaneDecision mobil_decide(const EgoContext& ego, const LaneContext& current, const LaneContext& target,
                          const IdmParams& idm, const MobilParams& mobil, double bias) {
  // Ego in its current and in the target lane.
  const IdmResult ego_now = accel_behind(ego.speed, current.leader, idm);
  const IdmResult ego_new = accel_behind(ego.speed, target.leader, idm);
  if (ego_new.gap_error) return LaneDecision::kKeep;

  // New follower, before and after the change.
  double new_follower_gain = 0.0;
  if (target.follower) {
    const Neighbor& nf = *target.follower;
    if (nf.gap <= 0.0) return LaneDecision::kKeep;
    std::optional<Neighbor> nf_leader_before;
    if (target.leader) nf_leader_before = Neighbor{nf.gap + ego.length + target.leader->gap, target.leader->speed};
    const IdmResult before = accel_behind(nf.speed, nf_leader_before, idm);
    const IdmResult after = idm_acceleration(nf.speed, nf.gap, nf.speed - ego.speed, idm);
    if (after.gap_error || after.accel < -mobil.safe_decel_limit) return LaneDecision::kKeep;
    new_follower_gain = after.accel - before.accel;
  }

  // Old follower gets the ego's current leader.
  double old_follower_gain = 0.0;
  if (current.follower) {
    const Neighbor& of = *current.follower;
    const IdmResult before = idm_acceleration(of.speed, std::max(of.gap, 1e-3), of.speed - ego.speed, idm);
    std::optional<Neighbor> of_leader_after;
    if (current.leader) of_leader_after = Neighbor{of.gap + ego.length + current.leader->gap, current.leader->speed};
    const IdmResult after = accel_behind(of.speed, of_leader_after, idm);
    old_follower_gain = after.accel - before.accel;
  }

  const double incentive =
      ego_new.accel - ego_now.accel + mobil.politeness * (new_follower_gain + old_follower_gain) + bias;
  return incentive > mobil.accel_threshold ? LaneDecision::kChange : LaneDecision::kKeep;
}

Driver style_preset(DrivingStyle style, double nominal_speed) {
  Driver d;
  d.style = style;
  switch (style) {
    case DrivingStyle::kTimid:
      d.idm.desired_speed = 0.9 * nominal_speed;
      d.idm.time_headway = 2.0;
      d.mobil.politeness = 0.5;
      d.mobil.safe_decel_limit = 3.0;
      d.lane_change_duration = 3.0;
      break;
    case DrivingStyle::kNormal:
      d.idm.desired_speed = nominal_speed;
      d.idm.time_headway = 1.5;
      d.mobil.politeness = 0.25;
      d.mobil.safe_decel_limit = 4.0;
      d.lane_change_duration = 2.5;
      break;
    case DrivingStyle::kAggressive:
      d.idm.desired_speed = 1.15 * nominal_speed;
      d.idm.time_headway = 1.0;
      d.mobil.politeness = 0.0;
      d.mobil.accel_threshold = 0.1;
      // Aggressive drivers only refuse changes that leave no physical gap.
      d.mobil.safe_decel_limit = kEmergencyDecel;
      d.lane_change_duration = 2.0;
      break;
  }
  return d;
}

void TrafficSpec::validate() const {
  if (density < 0.0) throw std::invalid_argument("traffic density must be non-negative");
  double sum = 0.0;
  for (double p : style_mix) {
    if (p < 0.0) throw std::invalid_argument("style probabilities must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("style probabilities must sum to 1");
  if (!(nominal_speed > 0.0)) throw std::invalid_argument("nominal speed must be positive");
}

DrivingStyle sample_style(const std::array<double, 3>& mix, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  if (r < mix[0]) return DrivingStyle::kTimid;
  if (r < mix[0] + mix[1]) return DrivingStyle::kNormal;
  return DrivingStyle::kAggressive;
}

SpawnResult spawn_traffic(const TrafficSpec& spec, const RoadMap& road, const std::vector<KeepClear>& keep_clear,
                          std::mt19937_64& rng, int first_id) {
  spec.validate();
  road.validate();
  const double x_begin = std::max(0.0, spec.x_begin);
  const double x_end = spec.x_end < 0.0 ? road.length : std::min(spec.x_end, road.length);
  SpawnResult out;
  if (spec.density == 0.0 || x_end <= x_begin) return out;

  out.requested = static_cast<int>(std::lround(spec.density * road.lane_count * (x_end - x_begin) / 1000.0));
  std::uniform_real_distribution<double> pos(x_begin, x_end);
  std::uniform_real_distribution<double> speed_scale(0.85, 1.0);
  constexpr int kMaxAttempts = 60;

  auto blocked = [&](double x, double y, double len, double wid) {
    for (const auto& k : keep_clear) {
      if (x + 0.5 * len >= k.x_min && x - 0.5 * len <= k.x_max && y + 0.5 * wid >= k.y_min &&
          y - 0.5 * wid <= k.y_max) {
        return true;
      }
    }
    return false;
  };

  for (int k = 0; k < out.requested; ++k) {
    const int lane = k % road.lane_count;
    const DrivingStyle style = sample_style(spec.style_mix, rng);
    const Driver driver = style_preset(style, spec.nominal_speed);
    const double v = driver.idm.desired_speed * speed_scale(rng);
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      VehicleState cand;
      cand.x = pos(rng);
      cand.y = road.lane_center(lane);
      if (cand.x - 0.5 * cand.length < x_begin || cand.x + 0.5 * cand.length > x_end) continue;
      if (blocked(cand.x, cand.y, cand.length, cand.width)) continue;
      bool ok = true;
      for (size_t j = 0; j < out.vehicles.size() && ok; ++j) {
        const auto& other = out.vehicles[j];
        if (other.lane != lane) continue;
        const double gap = std::abs(other.x - cand.x) - 0.5 * (other.length + cand.length);
        // The rear vehicle of the pair needs its own equilibrium spacing.
        const bool cand_behind = cand.x < other.x;
        const double rear_speed = cand_behind ? v : other.speed;
        const Driver& rear_driver = cand_behind ? driver : out.drivers[j];
        if (gap < rear_driver.idm.min_gap + rear_speed * rear_driver.idm.time_headway) ok = false;
      }
      if (!ok) continue;
      cand.id = first_id + static_cast<int>(out.vehicles.size());
      cand.kind = VehicleKind::kHdv;
      cand.speed = v;
      cand.lane = lane;
      cand.target_lane = lane;
      out.vehicles.push_back(cand);
      out.drivers.push_back(driver);
      placed = true;
    }
    if (!placed) ++out.shortfall;
  }
  return out;
}

}  // namespace platoon
