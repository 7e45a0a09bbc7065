#include "platoon/motion.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace platoon {

Quintic Quintic::fit(double p0, double v0, double a0, double p1, double v1, double a1, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("Quintic::fit: duration must be positive");
  Quintic q;
  q.T = T;
  q.c[0] = p0;
  q.c[1] = v0;
  q.c[2] = 0.5 * a0;
  const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
  Eigen::Matrix3d m;
  m << T3, T4, T5, 3 * T2, 4 * T3, 5 * T4, 6 * T, 12 * T2, 20 * T3;
  Eigen::Vector3d rhs(p1 - (p0 + v0 * T + 0.5 * a0 * T2), v1 - (v0 + a0 * T), a1 - a0);
  const Eigen::Vector3d x = m.fullPivLu().solve(rhs);
  q.c[3] = x(0);
  q.c[4] = x(1);
  q.c[5] = x(2);
  return q;
}

double Quintic::p(double t) const {
  if (t > T) return p(T) + v(T) * (t - T);
  double r = 0.0;
  for (int k = 5; k >= 0; --k) r = r * t + c[static_cast<size_t>(k)];
  return r;
}

double Quintic::v(double t) const {
  t = std::min(t, T);
  return c[1] + t * (2 * c[2] + t * (3 * c[3] + t * (4 * c[4] + t * 5 * c[5])));
}

double Quintic::a(double t) const {
  if (t > T) return 0.0;
  return 2 * c[2] + t * (6 * c[3] + t * (12 * c[4] + t * 20 * c[5]));
}

double Quintic::j(double t) const {
  if (t > T) return 0.0;
  return 6 * c[3] + t * (24 * c[4] + t * 60 * c[5]);
}

Quartic Quartic::fit(double p0, double v0, double a0, double v1, double a1, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("Quartic::fit: duration must be positive");
  Quartic q;
  q.T = T;
  q.c[0] = p0;
  q.c[1] = v0;
  q.c[2] = 0.5 * a0;
  const double T2 = T * T, T3 = T2 * T;
  Eigen::Matrix2d m;
  m << 3 * T2, 4 * T3, 6 * T, 12 * T2;
  Eigen::Vector2d rhs(v1 - v0 - a0 * T, a1 - a0);
  const Eigen::Vector2d x = m.fullPivLu().solve(rhs);
  q.c[3] = x(0);
  q.c[4] = x(1);
  return q;
}

double Quartic::p(double t) const {
  if (t > T) return p(T) + v(T) * (t - T);
  double r = 0.0;
  for (int k = 4; k >= 0; --k) r = r * t + c[static_cast<size_t>(k)];
  return r;
}

double Quartic::v(double t) const {
  t = std::min(t, T);
  return c[1] + t * (2 * c[2] + t * (3 * c[3] + t * 4 * c[4]));
}

double Quartic::a(double t) const {
  if (t > T) return 0.0;
  return 2 * c[2] + t * (6 * c[3] + t * 12 * c[4]);
}

double Quartic::j(double t) const {
  if (t > T) return 0.0;
  return 6 * c[3] + t * 24 * c[4];
}

namespace {

void sample(TrajectoryCandidate& c, double x0, const LatticeParams& p) {
  const int steps = static_cast<int>(std::lround(p.horizon / p.dt));
  c.samples.clear();
  c.samples.reserve(static_cast<size_t>(steps + 1));
  for (int k = 0; k <= steps; ++k) {
    const double t = k * p.dt;
    TrajPoint tp;
    tp.t = t;
    tp.x = x0 + c.longitudinal.p(t);
    tp.y = c.lateral.p(t);
    tp.vx = c.longitudinal.v(t);
    tp.vy = c.lateral.v(t);
    tp.ax = c.longitudinal.a(t);
    tp.ay = c.lateral.a(t);
    tp.jx = c.longitudinal.j(t);
    c.samples.push_back(tp);
  }
}

}  // namespace

std::vector<TrajectoryCandidate> generate_lattice(const VehicleState& s, double target_y, double speed_ref,
                                                  double speed_limit, const LatticeParams& p) {
  if (!(p.dt > 0.0 && p.horizon > 0.0)) throw std::invalid_argument("lattice: dt and horizon must be positive");
  std::vector<TrajectoryCandidate> out;
  const double vy0 = s.vy();
  const double vx0 = s.vx();
  for (double T : p.durations) {
    for (double dv : p.speed_offsets) {
      TrajectoryCandidate c;
      c.duration = T;
      c.target_y = target_y;
      c.target_speed = std::clamp(speed_ref + dv, 0.0, speed_limit);
      c.lateral = Quintic::fit(s.y, vy0, 0.0, target_y, 0.0, 0.0, T);
      c.longitudinal = Quartic::fit(0.0, vx0, s.accel, c.target_speed, 0.0, T);
      sample(c, s.x, p);
      out.push_back(std::move(c));
    }
  }
  return out;
}

TrajectoryCandidate fallback_trajectory(const VehicleState& s, const RoadMap& road, const LatticeParams& p) {
  TrajectoryCandidate c;
  c.fallback = true;
  c.duration = p.horizon;
  c.target_y = road.lane_center(road.nearest_lane(s.y));
  c.target_speed = std::max(0.0, s.speed - p.fallback_decel_speed);
  c.lateral = Quintic::fit(s.y, s.vy(), 0.0, c.target_y, 0.0, 0.0, p.horizon);
  c.longitudinal = Quartic::fit(0.0, s.vx(), s.accel, c.target_speed, 0.0, p.horizon);
  sample(c, s.x, p);
  return c;
}

CheckResult check_dynamics(const TrajectoryCandidate& c, const RoadMap& road, double vehicle_width,
                           const DynamicLimits& lim) {
  constexpr double kTol = 1e-9;
  const double y_lo = road.y_min() + 0.5 * vehicle_width;
  const double y_hi = road.y_max() - 0.5 * vehicle_width;
  for (const auto& s : c.samples) {
    if (std::abs(s.ax) > lim.max_accel + kTol) return {false, "longitudinal acceleration"};
    if (std::abs(s.jx) > lim.max_jerk + kTol) return {false, "longitudinal jerk"};
    if (std::abs(s.ay) > lim.max_lateral_accel + kTol) return {false, "lateral acceleration"};
    if (s.y < y_lo - kTol || s.y > y_hi + kTol) return {false, "off road"};
    if (s.vx < -kTol) return {false, "reversing"};
  }
  return {};
}

namespace {

VehicleState pose_at(const VehicleState& ego, const TrajPoint& s) {
  VehicleState v = ego;
  v.x = s.x;
  v.y = s.y;
  v.speed = std::hypot(s.vx, s.vy);
  v.heading = std::atan2(s.vy, std::max(s.vx, 1e-6));
  return v;
}

VehicleState advance(const VehicleState& o, double t) {
  VehicleState v = o;
  v.x += o.vx() * t;
  v.y += o.vy() * t;
  return v;
}

}  // namespace

double trajectory_cost(const TrajectoryCandidate& c, const VehicleState& ego, const std::vector<VehicleState>& others,
                       double v_max, const RiskFieldParams& risk, const SelectionWeights& w) {
  double max_risk = 0.0, mean_v = 0.0, mean_j2 = 0.0;
  std::vector<VehicleState> moved(others.size());
  for (const auto& s : c.samples) {
    for (size_t k = 0; k < others.size(); ++k) moved[k] = advance(others[k], s.t);
    max_risk = std::max(max_risk, risk_reward(pose_at(ego, s), moved, risk));
    mean_v += s.vx;
    const double jy = c.lateral.j(s.t);
    mean_j2 += s.jx * s.jx + jy * jy;
  }
  const double n = static_cast<double>(c.samples.size());
  mean_v /= n;
  mean_j2 /= n;
  return w.safety * max_risk + w.efficiency * (v_max - mean_v) / v_max + w.comfort * mean_j2;
}

bool trajectory_conflicts(const TrajectoryCandidate& c, const VehicleState& ego,
                          const std::vector<VehicleState>& others) {
  for (const auto& s : c.samples) {
    const VehicleState e = pose_at(ego, s);
    for (const auto& o : others) {
      if (o.id == ego.id) continue;
      if (check_collision(e, advance(o, s.t))) return true;
    }
  }
  return false;
}

Selection select_trajectory(const std::vector<TrajectoryCandidate>& candidates, const VehicleState& ego,
                            const std::vector<VehicleState>& obstacles, const std::vector<VehicleState>& risk_sources,
                            const RoadMap& road, const DynamicLimits& lim, const RiskFieldParams& risk,
                            const SelectionWeights& w, const LatticeParams& lp) {
  Selection best;
  double best_cost = kInf;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!check_dynamics(c, road, ego.width, lim).ok) continue;
    if (trajectory_conflicts(c, ego, obstacles)) continue;
    ++best.passed;
    const double cost = trajectory_cost(c, ego, risk_sources, road.speed_limit, risk, w);
    const bool better = cost < best_cost - 1e-12 ||
                        (std::abs(cost - best_cost) <= 1e-12 && best.index >= 0 &&
                         c.duration < candidates[static_cast<size_t>(best.index)].duration);
    if (better) {
      best_cost = cost;
      best.index = static_cast<int>(i);
    }
  }
  if (best.index >= 0) {
    best.trajectory = candidates[static_cast<size_t>(best.index)];
    best.cost = best_cost;
    return best;
  }
  best.trajectory = fallback_trajectory(ego, road, lp);
  best.cost = trajectory_cost(best.trajectory, ego, risk_sources, road.speed_limit, risk, w);
  return best;
}

}  // namespace platoon
