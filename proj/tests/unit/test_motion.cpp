#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "platoon/controllers.hpp"
#include "platoon/motion.hpp"

using namespace platoon;

namespace {

VehicleState ego_at(double y, double v) {
  VehicleState s;
  s.id = 0;
  s.kind = VehicleKind::kCav;
  s.x = 100.0;
  s.y = y;
  s.speed = v;
  s.lane = static_cast<int>(std::lround(y / 4.0));
  s.target_lane = s.lane;
  return s;
}

VehicleState obstacle(int id, double x, double y, double v) {
  VehicleState s;
  s.id = id;
  s.x = x;
  s.y = y;
  s.speed = v;
  return s;
}

}  // namespace

TEST(Polynomials, QuinticBoundaryConditionsOnRandomStates) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0), T(0.5, 6.0);
  for (int k = 0; k < 2000; ++k) {
    const double p0 = u(rng), v0 = u(rng), a0 = u(rng), p1 = u(rng), v1 = u(rng), a1 = u(rng), t = T(rng);
    const auto q = Quintic::fit(p0, v0, a0, p1, v1, a1, t);
    ASSERT_NEAR(q.p(0), p0, 1e-9);
    ASSERT_NEAR(q.v(0), v0, 1e-9);
    ASSERT_NEAR(q.a(0), a0, 1e-9);
    ASSERT_NEAR(q.p(t), p1, 1e-9);
    ASSERT_NEAR(q.v(t), v1, 1e-9);
    ASSERT_NEAR(q.a(t), a1, 1e-9);
  }
}

TEST(Polynomials, QuarticBoundaryConditionsOnRandomStates) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5.0, 5.0), T(0.5, 6.0);
  for (int k = 0; k < 2000; ++k) {
    const double p0 = u(rng), v0 = u(rng), a0 = u(rng), v1 = u(rng), a1 = u(rng), t = T(rng);
    const auto q = Quartic::fit(p0, v0, a0, v1, a1, t);
    ASSERT_NEAR(q.p(0), p0, 1e-9);
    ASSERT_NEAR(q.v(0), v0, 1e-9);
    ASSERT_NEAR(q.a(0), a0, 1e-9);
    ASSERT_NEAR(q.v(t), v1, 1e-9);
    ASSERT_NEAR(q.a(t), a1, 1e-9);
  }
}

TEST(Polynomials, DerivativesMatchFiniteDifferences) {
  const auto q = Quintic::fit(0.0, 1.0, 0.5, 4.0, 0.0, 0.0, 3.0);
  const double h = 1e-5;
  for (double t = 0.2; t < 2.9; t += 0.3) {
    EXPECT_NEAR(q.v(t), (q.p(t + h) - q.p(t - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(q.a(t), (q.v(t + h) - q.v(t - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(q.j(t), (q.a(t + h) - q.a(t - h)) / (2 * h), 1e-5);
  }
}

TEST(Polynomials, ExtendedPastTheDuration) {
  const auto q = Quintic::fit(0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 2.0);
  EXPECT_NEAR(q.p(3.5), 4.0, 1e-12);
  EXPECT_EQ(q.a(3.5), 0.0);
}

TEST(Lattice, NineCandidatesEndingAtTheTargetLane) {
  const auto cands = generate_lattice(ego_at(4.0, 25.0), 8.0, 25.0, 40.0, LatticeParams{});
  ASSERT_EQ(cands.size(), 9u);
  for (const auto& c : cands) {
    EXPECT_NEAR(c.lateral.p(c.duration), 8.0, 1e-9);
    EXPECT_NEAR(c.lateral.v(c.duration), 0.0, 1e-9);
    EXPECT_NEAR(c.samples.front().x, 100.0, 1e-12);
    EXPECT_NEAR(c.samples.front().vx, 25.0, 1e-9);
  }
}

TEST(Lattice, KeepLaneIsStraight) {
  for (const auto& c : generate_lattice(ego_at(4.0, 25.0), 4.0, 25.0, 40.0, LatticeParams{})) {
    for (const auto& s : c.samples) EXPECT_NEAR(s.y, 4.0, 1e-12);
  }
}

TEST(Checker, Examples) {
  RoadMap road;
  DynamicLimits lim;
  LatticeParams gentle;
  gentle.durations = {4.0};
  gentle.speed_offsets = {0.0};
  gentle.horizon = 4.0;
  const auto g = generate_lattice(ego_at(4.0, 25.0), 8.0, 25.0, 40.0, gentle);
  EXPECT_TRUE(check_dynamics(g[0], road, 2.0, lim).ok);

  LatticeParams quick = gentle;
  quick.durations = {1.0};
  const auto q = generate_lattice(ego_at(4.0, 35.0), 8.0, 35.0, 40.0, quick);
  const auto r = check_dynamics(q[0], road, 2.0, lim);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.reason, "lateral acceleration");

  const auto still = generate_lattice(ego_at(4.0, 0.0), 4.0, 0.0, 40.0, gentle);
  EXPECT_TRUE(check_dynamics(still[0], road, 2.0, lim).ok);
}

TEST(Checker, OffRoadTargetFails) {
  LatticeParams p;
  const auto c = generate_lattice(ego_at(8.0, 25.0), 12.0, 25.0, 40.0, p);
  for (const auto& cand : c) EXPECT_FALSE(check_dynamics(cand, RoadMap{}, 2.0, DynamicLimits{}).ok);
}

TEST(Selection, ComfortPicksTheLowestJerk) {
  RoadMap road;
  LatticeParams p;
  p.speed_offsets = {0.0};
  const auto ego = ego_at(4.0, 25.0);
  const auto cands = generate_lattice(ego, 8.0, 25.0, 40.0, p);
  SelectionWeights w{0.0, 0.0, 1.0};
  const auto s = select_trajectory(cands, ego, {}, {}, road, DynamicLimits{}, RiskFieldParams{}, w, p);
  ASSERT_GE(s.index, 0);
  EXPECT_DOUBLE_EQ(s.trajectory.duration, 4.0);
  EXPECT_TRUE(check_dynamics(s.trajectory, road, ego.width, DynamicLimits{}).ok);
}

TEST(Selection, EfficiencyPicksTheFastest) {
  RoadMap road;
  LatticeParams p;
  p.durations = {3.0};
  const auto ego = ego_at(4.0, 25.0);
  const auto cands = generate_lattice(ego, 4.0, 25.0, 40.0, p);
  SelectionWeights w{0.0, 1.0, 0.0};
  const auto s = select_trajectory(cands, ego, {}, {}, road, DynamicLimits{}, RiskFieldParams{}, w, p);
  EXPECT_DOUBLE_EQ(s.trajectory.target_speed, 27.0);
}

TEST(Selection, ObstacleOnPathIsAvoided) {
  RoadMap road;
  LatticeParams p;
  const auto ego = ego_at(4.0, 25.0);
  auto cands = generate_lattice(ego, 8.0, 25.0, 40.0, p);
  const auto keep = generate_lattice(ego, 4.0, 25.0, 40.0, p);
  cands.insert(cands.end(), keep.begin(), keep.end());
  // Slow vehicle in the left lane right ahead blocks every lane change.
  const std::vector<VehicleState> obs{obstacle(5, 115.0, 8.0, 15.0)};
  const auto s = select_trajectory(cands, ego, obs, obs, road, DynamicLimits{}, RiskFieldParams{}, SelectionWeights{}, p);
  ASSERT_GE(s.index, 0);
  EXPECT_DOUBLE_EQ(s.trajectory.target_y, 4.0);
  EXPECT_FALSE(trajectory_conflicts(s.trajectory, ego, obs));
}

TEST(Selection, FallbackWhenNothingPasses) {
  RoadMap road;
  LatticeParams p;
  const auto ego = ego_at(8.0, 25.0);
  const auto s = select_trajectory(generate_lattice(ego, 12.0, 25.0, 40.0, p), ego, {}, {}, road, DynamicLimits{},
                                   RiskFieldParams{}, SelectionWeights{}, p);
  EXPECT_EQ(s.index, -1);
  EXPECT_TRUE(s.trajectory.fallback);
  EXPECT_NEAR(s.trajectory.samples.back().y, 8.0, 1e-9);
}

TEST(Lqr, StabilizingAndZeroAtZero) {
  const LqrLongitudinal lqr;
  EXPECT_LT(lqr.spectral_radius(), 1.0);
  EXPECT_EQ(lqr.command(0.0, 0.0), 0.0);
  EXPECT_GT(lqr.command(5.0, 0.0), 0.0);  // too far back: speed up
}

TEST(Lqr, ClosedLoopSettlesFromFiveMetres) {
  const LqrLongitudinal lqr;
  const double dt = lqr.gains().dt;
  double e = 5.0, ev = 0.0;
  double last_outside = 0.0;
  for (int k = 1; k <= 600; ++k) {
    const double u = lqr.command(e, ev);
    e = e + ev * dt - 0.5 * u * dt * dt;
    ev = ev - u * dt;
    if (std::abs(e) >= 0.25) last_outside = k * dt;
  }
  EXPECT_LE(last_outside, 15.0);
  EXPECT_LT(std::abs(e), 1e-3);
}

TEST(Lqr, RejectsBadWeights) {
  LqrGains g;
  g.r = 0.0;
  EXPECT_THROW(LqrLongitudinal{g}, std::invalid_argument);
}

TEST(Pid, AlignedOnPathIsZero) {
  PidSteering pid;
  EXPECT_EQ(pid.command(4.0, 0.0, 25.0, 4.0, 0.0, 0.1), 0.0);
}

TEST(Pid, OneMetreStepSettles) {
  PidSteering pid;
  const double dt = 0.1, v = 25.0;
  double y = 1.0, heading = 0.0, last_outside = 0.0;
  for (int k = 1; k <= 300; ++k) {
    const double rate = pid.command(y, heading, v, 0.0, 0.0, dt);
    ASSERT_LE(std::abs(rate), PidGains{}.max_rate + 1e-12);
    heading += rate * dt;
    y += v * std::sin(heading) * dt;
    if (std::abs(y) >= 0.05) last_outside = k * dt;
  }
  EXPECT_LE(last_outside, 8.0);
}

TEST(Pid, BoundedUnderPersistentError) {
  PidSteering pid;
  for (int k = 0; k < 10000; ++k) {
    const double u = pid.command(100.0, 0.0, 25.0, 0.0, 0.0, 0.1);
    ASSERT_LE(std::abs(u), PidGains{}.max_rate);
  }
  EXPECT_LE(std::abs(pid.integral()), PidGains{}.integral_limit);
}
