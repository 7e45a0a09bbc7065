#pragma once

#include <array>
#include <string>
#include <vector>

#include "platoon/risk_field.hpp"
#include "platoon/world.hpp"

namespace platoon {

// p(t) = sum c_k t^k on [0, T]; beyond T the terminal state is extended with
// its terminal velocity and zero acceleration.
struct Quintic {
  std::array<double, 6> c{};
  double T = 0.0;

  static Quintic fit(double p0, double v0, double a0, double p1, double v1, double a1, double T);
  double p(double t) const;
  double v(double t) const;
  double a(double t) const;
  double j(double t) const;
};

// Velocity-constrained quartic: position start state plus terminal velocity
// and acceleration.
struct Quartic {
  std::array<double, 5> c{};
  double T = 0.0;

  static Quartic fit(double p0, double v0, double a0, double v1, double a1, double T);
  double p(double t) const;
  double v(double t) const;
  double a(double t) const;
  double j(double t) const;
};

struct TrajPoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double ax = 0.0;
  double ay = 0.0;
  double jx = 0.0;
};

struct TrajectoryCandidate {
  double duration = 0.0;
  double target_y = 0.0;
  double target_speed = 0.0;
  bool fallback = false;
  Quintic lateral;
  Quartic longitudinal;
  std::vector<TrajPoint> samples;  // t = 0, dt, ..., horizon
};

struct LatticeParams {
  std::vector<double> durations{2.0, 3.0, 4.0};
  std::vector<double> speed_offsets{-2.0, 0.0, 2.0};
  double dt = 0.1;
  double horizon = 4.0;
  double fallback_decel_speed = 8.0;  // fallback slows by this much over the horizon
};

// Candidates for moving to target_y while aiming at speed_ref + offset.
std::vector<TrajectoryCandidate> generate_lattice(const VehicleState& s, double target_y, double speed_ref,
                                                  double speed_limit, const LatticeParams& p);

// Keep the nearest lane center and slow down.
TrajectoryCandidate fallback_trajectory(const VehicleState& s, const RoadMap& road, const LatticeParams& p);

struct DynamicLimits {
  double max_accel = 4.0;
  double max_jerk = 8.0;
  double max_lateral_accel = 3.0;
};

struct CheckResult {
  bool ok = true;
  std::string reason;
};

CheckResult check_dynamics(const TrajectoryCandidate& c, const RoadMap& road, double vehicle_width,
                           const DynamicLimits& lim);

struct SelectionWeights {
  double safety = 5.0;
  double efficiency = 1.0;
  double comfort = 0.1;
};

struct Selection {
  TrajectoryCandidate trajectory;
  int index = -1;  // -1 when the fallback was used
  int passed = 0;
  double cost = 0.0;
};

double trajectory_cost(const TrajectoryCandidate& c, const VehicleState& ego, const std::vector<VehicleState>& others,
                       double v_max, const RiskFieldParams& risk, const SelectionWeights& w);

// True when the ego footprint along c overlaps any of `others` moved at
// constant velocity.
bool trajectory_conflicts(const TrajectoryCandidate& c, const VehicleState& ego,
                          const std::vector<VehicleState>& others);

// Lowest-cost candidate that passes the checker and has no conflict with the
// given obstacles; ties go to the shorter duration. Falls back to the slow-down
// profile when nothing passes.
Selection select_trajectory(const std::vector<TrajectoryCandidate>& candidates, const VehicleState& ego,
                            const std::vector<VehicleState>& obstacles, const std::vector<VehicleState>& risk_sources,
                            const RoadMap& road, const DynamicLimits& lim, const RiskFieldParams& risk,
                            const SelectionWeights& w, const LatticeParams& lp);

}  // namespace platoon
