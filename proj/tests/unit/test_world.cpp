#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "platoon/world.hpp"

using namespace platoon;

namespace {

VehicleState car(double x, double y, double speed = 0.0, double heading = 0.0) {
  VehicleState v;
  v.x = x;
  v.y = y;
  v.speed = speed;
  v.heading = heading;
  return v;
}

}  // namespace

TEST(RoadMap, ValidatesInvariants) {
  RoadMap r;
  EXPECT_NO_THROW(r.validate());
  r.lane_count = 1;
  EXPECT_THROW(r.validate(), std::invalid_argument);
  r.lane_count = 3;
  r.lane_width = 0.0;
  EXPECT_THROW(r.validate(), std::invalid_argument);
  r.lane_width = 4.0;
  r.ramp = RampSegment{100.0, r.length + 1.0};
  EXPECT_THROW(r.validate(), std::invalid_argument);
}

TEST(RoadMap, LaneGeometry) {
  RoadMap r;
  EXPECT_DOUBLE_EQ(r.lane_center(2), 8.0);
  EXPECT_EQ(r.nearest_lane(5.9), 1);
  EXPECT_EQ(r.nearest_lane(6.1), 2);
  EXPECT_EQ(r.nearest_lane(-3.0), 0);
  r.ramp = RampSegment{100.0, 500.0};
  EXPECT_EQ(r.nearest_lane(-3.0), kRampLane);
}

TEST(Kinematics, ZeroHeadingIsPureLongitudinal) {
  const auto s = step_kinematics(car(0, 0), 20.0, 0.0, 0.1);
  EXPECT_NEAR(s.x, 2.0, 1e-12);
  EXPECT_NEAR(s.y, 0.0, 1e-12);
}

TEST(Kinematics, ZeroSpeedKeepsPosition) {
  const auto s = step_kinematics(car(3, 4), 0.0, 0.7, 0.1);
  EXPECT_DOUBLE_EQ(s.x, 3.0);
  EXPECT_DOUBLE_EQ(s.y, 4.0);
}

TEST(Kinematics, HeadedStep) {
  const auto s = step_kinematics(car(0, 0), 10.0, 0.05, 0.1);
  EXPECT_NEAR(s.x, 0.99875, 1e-5);
  EXPECT_NEAR(s.y, 0.04998, 1e-5);
  EXPECT_NEAR(s.x, 10.0 * std::cos(0.05) * 0.1, 1e-15);
}

TEST(Kinematics, AccelAndJerkAreBackwardDifferences) {
  auto s = car(0, 0, 10.0);
  s = step_kinematics(s, 11.0, 0.0, 0.1);
  EXPECT_NEAR(s.accel, 10.0, 1e-9);
  s = step_kinematics(s, 11.5, 0.0, 0.1);
  EXPECT_NEAR(s.accel, 5.0, 1e-9);
  EXPECT_NEAR(s.jerk, -50.0, 1e-6);
}

TEST(Kinematics, RejectsBadInput) {
  EXPECT_THROW(step_kinematics(car(0, 0), -1.0, 0.0, 0.1), std::invalid_argument);
  EXPECT_THROW(step_kinematics(car(0, 0), 1.0, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(step_kinematics(car(0, 0), NAN, 0.0, 0.1), std::invalid_argument);
}

TEST(Kinematics, ConstantInputsMatchStraightLine) {
  auto s = car(0, 0, 17.0, 0.03);
  const double dt = 0.1;
  for (int k = 1; k <= 500; ++k) {
    s = step_kinematics(s, 17.0, 0.03, dt);
    ASSERT_NEAR(s.x, 17.0 * std::cos(0.03) * dt * k, 1e-9 * k);
    ASSERT_NEAR(s.y, 17.0 * std::sin(0.03) * dt * k, 1e-9 * k);
  }
}

TEST(Ttc, Examples) {
  // Gap is bumper to bumper: centers 55 m apart with 5 m bodies leave 50 m.
  EXPECT_DOUBLE_EQ(compute_ttc(car(0, 0, 30), car(55, 0, 20)), 5.0);
  EXPECT_DOUBLE_EQ(compute_ttc(car(0, 0, 30), car(30, 0, 20)), 2.5);
  EXPECT_TRUE(std::isinf(compute_ttc(car(0, 0, 20), car(30, 0, 25))));
  EXPECT_DOUBLE_EQ(compute_ttc(car(0, 0, 20), car(3, 0, 10)), 0.0);
}

TEST(Ttc, RolesAreNotSymmetric) {
  const auto back = car(0, 0, 30), front = car(40, 0, 20);
  EXPECT_TRUE(std::isfinite(compute_ttc(back, front)));
  EXPECT_TRUE(std::isinf(compute_ttc(front, back)));
}

TEST(Collision, Examples) {
  EXPECT_TRUE(check_collision(car(0, 0), car(0, 0)));
  EXPECT_FALSE(check_collision(car(0, 0), car(10, 0)));
  EXPECT_TRUE(check_collision(car(0, 0), car(5, 0)));
  EXPECT_FALSE(check_collision(car(0, 0), car(0, 4)));
  EXPECT_TRUE(check_collision(car(0, 0), car(0, 2)));
}

TEST(Collision, RotatedBodies) {
  // A body turned 90 degrees reaches 2.5 m sideways.
  EXPECT_TRUE(check_collision(car(0, 0, 0, M_PI / 2), car(0, 3.4)));
  EXPECT_FALSE(check_collision(car(0, 0, 0, 0.0), car(0, 3.4)));
}

TEST(Collision, SymmetricOnRandomPoses) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(-6.0, 6.0), ang(-M_PI, M_PI);
  for (int k = 0; k < 20000; ++k) {
    const auto a = car(pos(rng), pos(rng), 0, ang(rng));
    const auto b = car(pos(rng), pos(rng), 0, ang(rng));
    ASSERT_EQ(check_collision(a, b), check_collision(b, a));
  }
}

TEST(Topology, LlpfMatchesDefinition) {
  const auto t3 = build_llpf_topology(3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const bool expect = (i == 0 && j == 1) || (i == 0 && j == 2) || (i == 1 && j == 2);
      EXPECT_EQ(t3.link(i, j), expect) << i << "," << j;
    }
  }
  const auto t2 = build_llpf_topology(2);
  EXPECT_TRUE(t2.link(0, 1));
  EXPECT_FALSE(t2.link(1, 0));
  EXPECT_FALSE(t2.link(0, 0));
  EXPECT_THROW(build_llpf_topology(1), std::invalid_argument);
}

TEST(Topology, StrictlyUpperTriangularWithFullFirstRow) {
  for (int n = 2; n <= 6; ++n) {
    const auto t = build_llpf_topology(n);
    for (int i = 0; i < n; ++i) {
      EXPECT_FALSE(t.link(i, i));
      for (int j = 0; j < i; ++j) EXPECT_FALSE(t.link(i, j));
    }
    for (int j = 1; j < n; ++j) EXPECT_TRUE(t.link(0, j));
  }
}

TEST(Clock, PeriodsAreMultiplesOfDt) {
  SimClock c(0.1, 1.0, 5.0);
  EXPECT_EQ(c.vehicle_period_steps(), 10);
  EXPECT_EQ(c.platoon_period_steps(), 50);
  EXPECT_TRUE(c.platoon_decision_due());
  for (int k = 0; k < 10; ++k) c.tick();
  EXPECT_TRUE(c.vehicle_decision_due());
  EXPECT_FALSE(c.platoon_decision_due());
  EXPECT_NEAR(c.time(), 1.0, 1e-12);
  EXPECT_THROW(SimClock(0.1, 0.25, 5.0), std::invalid_argument);
}

TEST(LaneIndex, LeaderAndFollower) {
  RoadMap road;
  std::vector<VehicleState> v{car(0, 4), car(30, 4), car(-20, 4), car(10, 0), car(15, 2.5)};
  const LaneIndex idx(road, v);
  EXPECT_EQ(idx.leader(1, 0.0, 0), 4);  // the straddling vehicle shows up in lane 1
  EXPECT_EQ(idx.follower(1, 0.0, 0), 2);
  EXPECT_EQ(idx.leader(0, 0.0), 3);
  EXPECT_FALSE(idx.leader(2, 0.0).has_value());
}

TEST(GapAcceptance, ClosingSpeedWidensTheGap) {
  RoadMap road;
  auto ego = car(0, 4, 20);
  ego.id = 1;
  auto rear = car(-20, 0, 20);
  rear.id = 2;
  EXPECT_TRUE(gap_acceptable(road, ego, 0, {rear}, 4.0, 2.0));
  rear.speed = 26.0;  // 15 m gap < 4 + 6 * 2
  EXPECT_FALSE(gap_acceptable(road, ego, 0, {rear}, 4.0, 2.0));
  auto front = car(12, 0, 20);
  front.id = 3;
  EXPECT_TRUE(gap_acceptable(road, ego, 0, {front}, 4.0, 2.0));
  front.speed = 15.0;
  EXPECT_FALSE(gap_acceptable(road, ego, 0, {front}, 4.0, 2.0));
}
