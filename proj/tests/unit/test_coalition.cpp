#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "platoon/coalition.hpp"

using namespace platoon;

namespace {

VehicleState car(int id, int lane, double x, double v = 25.0, VehicleKind kind = VehicleKind::kCav) {
  VehicleState s;
  s.id = id;
  s.kind = kind;
  s.lane = lane;
  s.target_lane = lane;
  s.x = x;
  s.y = 4.0 * lane;
  s.speed = v;
  return s;
}

VehicleState hdv(int id, int lane, double x, double v = 25.0) { return car(id, lane, x, v, VehicleKind::kHdv); }

ConfigAction single3() { return enumerate_configurations(3).front(); }

struct Scene {
  std::vector<VehicleState> platoon;
  std::vector<VehicleState> background;
  ConfigAction target;
  bool use_pdi = false;
};

Scene random_scene(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> lane(0, 2), bg_count(0, 4), cfg(0, 3), coin(0, 1);
  std::uniform_real_distribution<double> gap(9.0, 40.0), speed(18.0, 30.0), off(-60.0, 80.0);
  Scene s;
  const int base = lane(rng);
  double x = 300.0;
  for (int i = 0; i < 3; ++i) {
    // Mostly one lane, sometimes scattered.
    const int l = coin(rng) ? base : lane(rng);
    s.platoon.push_back(car(i, l, x, speed(rng)));
    x -= gap(rng);
  }
  const int nb = bg_count(rng);
  for (int k = 0; k < nb; ++k) {
    const auto cand = hdv(10 + k, lane(rng), 300.0 + off(rng), speed(rng));
    bool clash = false;
    for (const auto& v : s.platoon) clash = clash || (v.lane == cand.lane && std::abs(v.x - cand.x) < 8.0);
    for (const auto& v : s.background) clash = clash || (v.lane == cand.lane && std::abs(v.x - cand.x) < 8.0);
    if (!clash) s.background.push_back(cand);
  }
  s.target = enumerate_configurations(3)[static_cast<size_t>(cfg(rng))];
  s.use_pdi = coin(rng);
  return s;
}

}  // namespace

TEST(Coalitions, CompactPlatoonIsOneCoalition) {
  const auto p = form_coalitions({car(0, 1, 100), car(1, 1, 85), car(2, 1, 70)}, {});
  ASSERT_EQ(p.coalitions.size(), 1u);
  EXPECT_EQ(p.coalitions[0].members, (std::vector<int>{0, 1, 2}));
}

TEST(Coalitions, LongGapSplits) {
  const auto p = form_coalitions({car(0, 1, 100), car(1, 1, 85), car(2, 1, 50)}, {});
  ASSERT_EQ(p.coalitions.size(), 2u);
  EXPECT_EQ(p.coalitions[0].members, (std::vector<int>{0, 1}));
  EXPECT_EQ(p.coalitions[1].members, (std::vector<int>{2}));
}

TEST(Coalitions, IntrusionSplits) {
  const auto p = form_coalitions({car(0, 1, 100), car(1, 1, 85), car(2, 1, 70)}, {hdv(9, 1, 92.5)});
  ASSERT_EQ(p.coalitions.size(), 2u);
  EXPECT_EQ(p.coalitions[0].members, (std::vector<int>{0}));
  EXPECT_EQ(p.coalitions[1].members, (std::vector<int>{1, 2}));
}

TEST(Coalitions, LaneDifferenceSplits) {
  const auto p = form_coalitions({car(0, 1, 100), car(1, 2, 85), car(2, 2, 70)}, {});
  EXPECT_EQ(p.coalitions.size(), 2u);
}

TEST(Coalitions, AlwaysAnOrderedPartition) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 500; ++k) {
    const auto s = random_scene(rng);
    const auto p = form_coalitions(s.platoon, s.background);
    int next = 0;
    for (const auto& c : p.coalitions) {
      for (size_t m = 0; m < c.members.size(); ++m) {
        EXPECT_EQ(c.members[m], next++);
        if (m > 0) {
          const auto& a = s.platoon[static_cast<size_t>(c.members[m - 1])];
          const auto& b = s.platoon[static_cast<size_t>(c.members[m])];
          EXPECT_LT(std::abs(a.x - b.x), CoalitionParams{}.x_lim);
          EXPECT_LT(std::abs(a.y - b.y), CoalitionParams{}.y_lim);
        }
      }
    }
    EXPECT_EQ(next, 3);
  }
}

TEST(Phase, FollowsTargetAndPartition) {
  const auto compact = form_coalitions({car(0, 1, 100), car(1, 1, 85), car(2, 1, 70)}, {});
  const auto broken = form_coalitions({car(0, 1, 100), car(1, 1, 85), car(2, 1, 50)}, {});
  EXPECT_EQ(resolve_phase(single3(), compact), GamePhase::kSteady);
  EXPECT_EQ(resolve_phase(single3(), broken), GamePhase::kMerging);
  EXPECT_EQ(resolve_phase(enumerate_configurations(3)[1], compact), GamePhase::kSplitting);
}

TEST(Profits, EntropyExamples) {
  EXPECT_NEAR(integration_entropy({1, 1, 1}, 3), 3.0 * std::log(3.0), 1e-9);
  EXPECT_NEAR(integration_entropy({2, 1, 0}, 3), -3.0 * (2.0 / 3 * std::log(2.0 / 3) + 1.0 / 3 * std::log(1.0 / 3)), 1e-12);
  EXPECT_NEAR(integration_entropy({2, 1, 0}, 3), 1.910, 1e-3);
  EXPECT_EQ(integration_entropy({0, 3, 0}, 3), 0.0);
  EXPECT_EQ(integration_entropy({0, 0, 0}, 3), 0.0);
}

TEST(Profits, TrackingExamples) {
  GameWeights w;
  EXPECT_EQ(tracking_profit({car(0, 1, 100), car(1, 1, 90)}, w), 0.0);
  EXPECT_NEAR(tracking_profit({car(0, 1, 100), car(1, 1, 88)}, w), -2.0, 1e-12);
  auto b = car(1, 1, 90);
  b.y += 1.0;
  EXPECT_NEAR(tracking_profit({car(0, 1, 100), b}, w), -0.5, 1e-12);
  EXPECT_EQ(tracking_profit({car(0, 1, 100)}, w), 0.0);
}

TEST(Profits, EfficiencyExamples) {
  EXPECT_NEAR(efficiency_profit({30, 30, 30}, 30.0), 1.0, 1e-15);
  std::vector<double> ramp;
  for (int k = 0; k <= 30; ++k) ramp.push_back(30.0 - k / 3.0);
  EXPECT_NEAR(efficiency_profit(ramp, 30.0), 25.0 / 30.0, 1e-12);
  EXPECT_EQ(efficiency_profit({0, 0}, 30.0), 0.0);
}

TEST(Profits, SafetyOrdering) {
  GameWeights w;
  SafetyTerms a, b;
  a.ttc = 2.5;
  b.ttc = 5.0;
  EXPECT_GT(safety_profit(b, w), safety_profit(a, w));
  SafetyTerms clear;
  EXPECT_NEAR(safety_profit(clear, w), w.k_tau * w.tau_cap + w.k_d * w.d_cap * w.d_cap, 1e-12);
  SafetyTerms hot = clear;
  hot.max_risk = 1.0;
  EXPECT_NEAR(safety_profit(clear, w) - safety_profit(hot, w), 1.0, 1e-12);
}

TEST(Prediction, LeftChangeReachesTheNextLane) {
  const auto ctx = make_context(RoadMap{}, {car(0, 1, 100), car(1, 1, 90), car(2, 1, 80)}, {}, single3(), false);
  PredictParams pp;
  const auto pr = predict_outcome(ctx, {LateralAction::kLeft, LateralAction::kKeep, LateralAction::kKeep}, pp);
  EXPECT_NEAR(pr.platoon.back()[0].y - pr.platoon.front()[0].y, 4.0, 1e-9);
  EXPECT_NEAR(pr.platoon.back()[1].y, 4.0, 1e-12);
  const auto again = predict_outcome(ctx, {LateralAction::kLeft, LateralAction::kKeep, LateralAction::kKeep}, pp);
  EXPECT_EQ(pr.platoon.back()[2].x, again.platoon.back()[2].x);
}

TEST(Prediction, BackgroundMovesLinearly) {
  const auto ctx = make_context(RoadMap{}, {car(0, 1, 100), car(1, 1, 90), car(2, 1, 80)}, {hdv(9, 0, 50, 20)},
                                single3(), false);
  const auto pr = predict_outcome(ctx, {LateralAction::kKeep, LateralAction::kKeep, LateralAction::kKeep}, PredictParams{});
  for (size_t k = 0; k < pr.times.size(); ++k) EXPECT_NEAR(pr.background[k][0].x, 50 + 20 * pr.times[k], 1e-9);
}

TEST(Pruning, EdgeLanesAndOccupiedSlots) {
  PredictParams pp;
  // Leftmost lane: left is pruned.
  auto ctx = make_context(RoadMap{}, {car(0, 2, 100), car(1, 2, 90), car(2, 2, 80)}, {}, single3(), false);
  for (const auto& a : prune_joint_actions(ctx, pp)) EXPECT_NE(a[0], LateralAction::kLeft);
  // A vehicle alongside on the right removes the right change.
  ctx = make_context(RoadMap{}, {car(0, 1, 100), car(1, 1, 90), car(2, 1, 80)}, {hdv(9, 0, 92)}, single3(), false);
  const auto kept = prune_joint_actions(ctx, pp);
  for (const auto& a : kept) EXPECT_NE(a[0], LateralAction::kRight);
  EXPECT_EQ(kept.front()[0], LateralAction::kKeep);
}

TEST(Pruning, TwoPlayersOnAnEmptyRoad) {
  // Split target, both halves in the middle lane: all 9 joint actions survive.
  const auto ctx = make_context(RoadMap{}, {car(0, 1, 100), car(1, 1, 90), car(2, 1, 80)}, {},
                                enumerate_configurations(3)[1], false);
  ASSERT_EQ(ctx.players, 2);
  int total = 0;
  EXPECT_EQ(prune_joint_actions(ctx, PredictParams{}, &total).size(), 9u);
  EXPECT_EQ(total, 9);
}

TEST(Game, EmptyRoadSteadyKeeps) {
  const auto ctx = make_context(RoadMap{}, {car(0, 1, 100), car(1, 1, 90), car(2, 1, 80)}, {}, single3(), false);
  const auto d = solve_tu_game(ctx, GameWeights{}, PredictParams{}, RiskFieldParams{}, PdiParams{});
  for (auto a : d.member_actions) EXPECT_EQ(a, LateralAction::kKeep);
}

TEST(Game, StoppedObstacleAheadTriggersAChange) {
  const auto ctx = make_context(RoadMap{}, {car(0, 1, 100), car(1, 1, 90), car(2, 1, 80)}, {hdv(9, 1, 150, 0.0)},
                                single3(), false);
  GameWeights w;
  PredictParams pp;
  const auto d = solve_tu_game(ctx, w, pp, RiskFieldParams{}, PdiParams{});
  const auto o = brute_force_game(ctx, w, pp, RiskFieldParams{}, PdiParams{});
  EXPECT_NE(d.member_actions[0], LateralAction::kKeep);
  EXPECT_EQ(d.evaluation.total, o.evaluation.total);
}

TEST(Game, SolverMatchesBruteForceOnRandomScenes) {
  GameWeights w;
  PredictParams pp;
  RiskFieldParams risk;
  PdiParams pdi;
  std::mt19937_64 rng(4242);
  for (int k = 0; k < 100; ++k) {
    const auto s = random_scene(rng);
    const auto ctx = make_context(RoadMap{}, s.platoon, s.background, s.target, s.use_pdi);
    const auto d = solve_tu_game(ctx, w, pp, risk, pdi);
    const auto o = brute_force_game(ctx, w, pp, risk, pdi);
    ASSERT_EQ(d.evaluation.total, o.evaluation.total) << "scene " << k;
    const auto kept = prune_joint_actions(ctx, pp);
    EXPECT_NE(std::find(kept.begin(), kept.end(), o.player_actions), kept.end()) << "scene " << k;
    // TU consistency against independently recomputed coalition values.
    double sum = 0.0;
    for (int p = 0; p < ctx.players; ++p) sum += coalition_value(ctx, p, d.player_actions, w, pp, risk, pdi);
    EXPECT_NEAR(sum, d.evaluation.total, 1e-9) << "scene " << k;
  }
}

TEST(Game, ScalingWeightsKeepsTheArgmax) {
  GameWeights w;
  PredictParams pp;
  std::mt19937_64 rng(77);
  for (int k = 0; k < 30; ++k) {
    const auto s = random_scene(rng);
    const auto ctx = make_context(RoadMap{}, s.platoon, s.background, s.target, s.use_pdi);
    const auto base = solve_tu_game(ctx, w, pp, RiskFieldParams{}, PdiParams{});
    for (double c : {0.5, 2.0, 8.0}) {
      const auto scaled = solve_tu_game(ctx, w.scaled(c), pp, RiskFieldParams{}, PdiParams{});
      EXPECT_EQ(scaled.player_actions, base.player_actions) << "scene " << k << " c " << c;
    }
  }
}

TEST(Game, PdiTermIsTheOnlyDifferenceWithGroundTruthVariant) {
  const std::vector<VehicleState> platoon{car(0, 1, 100), car(1, 1, 85), car(2, 1, 50)};
  const auto grdf = make_context(RoadMap{}, platoon, {}, single3(), false);
  const auto gt = make_context(RoadMap{}, platoon, {}, single3(), true);
  ASSERT_EQ(gt.phase, GamePhase::kMerging);
  GameWeights w;
  const std::vector<LateralAction> keep(static_cast<size_t>(gt.players), LateralAction::kKeep);
  const auto a = evaluate_joint(grdf, keep, w, PredictParams{}, RiskFieldParams{}, PdiParams{});
  const auto b = evaluate_joint(gt, keep, w, PredictParams{}, RiskFieldParams{}, PdiParams{});
  ASSERT_GT(b.pdi, 0.0);
  for (size_t p = 0; p < a.players.size(); ++p) {
    EXPECT_NEAR(a.players[p].value - b.players[p].value, w.w_pdi * b.pdi, 1e-12);
  }
}

TEST(Game, HigherPdiLowersTheValue) {
  const std::vector<VehicleState> platoon{car(0, 1, 100), car(1, 1, 85), car(2, 1, 50)};
  const auto ctx = make_context(RoadMap{}, platoon, {}, single3(), true);
  const auto blocked = make_context(RoadMap{}, platoon, {hdv(9, 1, 70)}, single3(), true);
  GameWeights w;
  w.w_s = 0.0;  // isolate the PDI pressure from the obstacle's risk
  const std::vector<LateralAction> keep(static_cast<size_t>(ctx.players), LateralAction::kKeep);
  const auto a = evaluate_joint(ctx, keep, w, PredictParams{}, RiskFieldParams{}, PdiParams{});
  const auto b = evaluate_joint(blocked, std::vector<LateralAction>(static_cast<size_t>(blocked.players),
                                                                    LateralAction::kKeep),
                                w, PredictParams{}, RiskFieldParams{}, PdiParams{});
  EXPECT_GT(b.pdi, a.pdi);
  EXPECT_LT(b.players.back().pdi_term, a.players.back().pdi_term);
}
