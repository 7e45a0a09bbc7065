#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "platoon/configuration.hpp"
#include "platoon/mlp.hpp"
#include "platoon/observation.hpp"
#include "platoon/ppo.hpp"
#include "platoon/reward.hpp"

using namespace platoon;

namespace {

VehicleState member(int id, double x, double y, double v) {
  VehicleState s;
  s.id = id;
  s.x = x;
  s.y = y;
  s.speed = v;
  return s;
}

}  // namespace

TEST(Configurations, ThreeMembersInOrder) {
  const auto c = enumerate_configurations(3);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c[0].label(), "(0,1,2)");
  EXPECT_EQ(c[1].label(), "(0)(1,2)");
  EXPECT_EQ(c[2].label(), "(0,1)(2)");
  EXPECT_EQ(c[3].label(), "(0)(1)(2)");
}

TEST(Configurations, CountsAndPartitionInvariants) {
  for (int n = kMinPlatoonSize; n <= kMaxPlatoonSize; ++n) {
    const auto cs = enumerate_configurations(n);
    EXPECT_EQ(cs.size(), size_t{1} << (n - 1));
    for (size_t k = 0; k < cs.size(); ++k) {
      int next = 0;
      for (const auto& g : cs[k].groups) {
        ASSERT_FALSE(g.empty());
        for (int m : g) EXPECT_EQ(m, next++);
      }
      EXPECT_EQ(next, n);
      EXPECT_EQ(configuration_index(cs[k]), static_cast<int>(k));
    }
  }
  EXPECT_EQ(enumerate_configurations(2).size(), 2u);
}

TEST(Heuristic, ClearRoadKeepsOneGroup) {
  HeuristicConfigurator h(3);
  RiskSummary s;
  s.member_ttc = {kInf, kInf, kInf};
  s.member_risk = {0, 0, 0};
  EXPECT_TRUE(h.decide(s, 0.0).single());
}

TEST(Heuristic, ThreatSplitsAndHoldTimeDelaysMerge) {
  HeuristicConfigurator h(3);
  RiskSummary threat;
  threat.member_ttc = {kInf, 2.0, kInf};
  threat.member_risk = {0, 0, 0};
  const auto split = h.decide(threat, 0.0);
  EXPECT_EQ(split.label(), "(0)(1)(2)");
  RiskSummary clear;
  clear.member_ttc = {kInf, kInf, kInf};
  clear.member_risk = {0, 0, 0};
  EXPECT_FALSE(h.decide(clear, 5.0).single());
  EXPECT_FALSE(h.decide(clear, 9.0).single());
  EXPECT_TRUE(h.decide(clear, 10.0).single());
}

TEST(Heuristic, LeaderThreatSplitsOffTheFront) {
  HeuristicConfigurator h(3);
  RiskSummary s;
  s.leader_ttc = 2.0;
  EXPECT_EQ(h.decide(s, 0.0).label(), "(0)(1,2)");
}

TEST(Reward, WorkedExamples) {
  RewardWeights w;
  RiskFieldParams risk;
  RewardInputs in;
  in.platoon = {member(0, 20, 4, w.v_max), member(1, 10, 4, w.v_max), member(2, 0, 4, w.v_max)};
  in.n_trigger = 2;
  in.n_step = 100;
  const auto r = compute_reward(in, w, risk);
  EXPECT_NEAR(r.r_e, 1.0, 1e-15);
  EXPECT_EQ(r.r_d, 0.0);
  EXPECT_NEAR(r.r_rf, 0.02, 1e-15);
  EXPECT_EQ(r.r_col, 1.0);
  in.collision = true;
  EXPECT_EQ(compute_reward(in, w, risk).r_col, 0.0);
  EXPECT_LT(compute_reward(in, w, risk).total, r.total);
}

TEST(Reward, BoundedOnRandomInputs) {
  RewardWeights w;
  RiskFieldParams risk;
  const double bound = reward_bound(w);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> x(-200, 200), y(-2, 10), v(0, 45), t(0, 100), u(0, 1);
  for (int k = 0; k < 2000; ++k) {
    RewardInputs in;
    for (int i = 0; i < 3; ++i) in.platoon.push_back(member(i, x(rng), y(rng), v(rng)));
    for (int i = 0; i < 5; ++i) in.others.push_back(member(10 + i, x(rng), y(rng), v(rng)));
    in.collision = u(rng) < 0.1;
    in.n_step = 1 + k;
    in.n_trigger = static_cast<int>(u(rng) * in.n_step);
    in.reorg_elapsed = t(rng);
    in.leader_ttc = u(rng) < 0.3 ? kInf : t(rng);
    in.multi_group = u(rng) < 0.5;
    const auto r = compute_reward(in, w, risk);
    ASSERT_TRUE(std::isfinite(r.total));
    ASSERT_LE(std::abs(r.total), bound);
  }
}

TEST(Ppo, SoftmaxSumsToOne) {
  Eigen::VectorXd z(4);
  z << 1000.0, -3.0, 2.0, 999.0;
  const auto p = softmax(z);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  EXPECT_TRUE(p.allFinite());
}

TEST(Ppo, IdentityRatioSurrogateIsMeanAdvantage) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd logits(4, 50);
  std::vector<int> actions;
  std::vector<double> old_logp, adv;
  double mean = 0.0;
  for (int c = 0; c < 50; ++c) {
    for (int r = 0; r < 4; ++r) logits(r, c) = n(rng);
    const int a = c % 4;
    actions.push_back(a);
    old_logp.push_back(std::log(softmax(logits.col(c))(a)));
    adv.push_back(n(rng));
    mean += adv.back() / 50.0;
  }
  const auto l = ppo_policy_loss(logits, actions, old_logp, adv, 0.2, 0.0);
  EXPECT_NEAR(l.surrogate, mean, 1e-9);
  EXPECT_EQ(l.clip_fraction, 0.0);
  const auto zero = ppo_policy_loss(logits, actions, old_logp, std::vector<double>(50, 0.0), 0.2, 0.0);
  EXPECT_EQ(zero.loss, 0.0);
}

TEST(Ppo, ClippedExample) {
  Eigen::MatrixXd logits(2, 1);
  logits << 0.0, 0.0;
  const double eps = 0.2;
  // Old probability chosen so the ratio is 1 + 2 eps.
  const double old_logp = std::log(0.5 / (1.0 + 2.0 * eps));
  const auto l = ppo_policy_loss(logits, {0}, {old_logp}, {2.0}, eps, 0.0);
  EXPECT_NEAR(l.surrogate, (1.0 + eps) * 2.0, 1e-12);
  EXPECT_EQ(l.clip_fraction, 1.0);
  EXPECT_NEAR(l.dlogits.norm(), 0.0, 1e-15);
}

TEST(Ppo, ActorGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  Mlp actor(5, 6, 3, rng);
  std::normal_distribution<double> n(0.0, 1.0);
  const int batch = 12;
  Eigen::MatrixXd x(5, batch);
  for (int c = 0; c < batch; ++c) {
    for (int r = 0; r < 5; ++r) x(r, c) = n(rng);
  }
  std::vector<int> actions;
  std::vector<double> old_logp, adv;
  const Eigen::MatrixXd logits0 = actor.forward(x);
  for (int c = 0; c < batch; ++c) {
    actions.push_back(c % 3);
    // Perturbed old policy, but keep every ratio well inside or outside the clip range.
    const double shift = (c % 2 == 0) ? 0.05 : 0.6;
    old_logp.push_back(std::log(softmax(logits0.col(c))(c % 3)) - shift);
    adv.push_back(n(rng));
  }
  auto loss_of = [&](const Mlp& net) {
    return ppo_policy_loss(net.forward(x), actions, old_logp, adv, 0.2, 0.01).loss;
  };
  Mlp::Cache cache;
  const auto out = actor.forward(x, &cache);
  const auto l = ppo_policy_loss(out, actions, old_logp, adv, 0.2, 0.01);
  const auto g = actor.backward(cache, l.dlogits);
  auto params = actor.params();
  const double h = 1e-6;
  double worst = 0.0;
  for (size_t t = 0; t < params.size(); ++t) {
    for (Eigen::Index k = 0; k < params[t]->size(); ++k) {
      double& p = params[t]->data()[k];
      const double keep = p;
      p = keep + h;
      const double up = loss_of(actor);
      p = keep - h;
      const double down = loss_of(actor);
      p = keep;
      const double fd = (up - down) / (2 * h);
      const double an = g.tensors[t].data()[k];
      worst = std::max(worst, std::abs(fd - an) / std::max(1e-3, std::abs(fd) + std::abs(an)));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Ppo, GaeMatchesHandComputation) {
  const auto g = compute_gae({1.0, 2.0, 3.0}, {0.5, 0.5, 0.5}, {false, false, true}, 9.0, 0.9, 0.8);
  const double d2 = 3.0 - 0.5;
  const double d1 = 2.0 + 0.9 * 0.5 - 0.5;
  const double d0 = 1.0 + 0.9 * 0.5 - 0.5;
  const double a2 = d2, a1 = d1 + 0.72 * a2, a0 = d0 + 0.72 * a1;
  EXPECT_NEAR(g.advantages[2], a2, 1e-12);
  EXPECT_NEAR(g.advantages[1], a1, 1e-12);
  EXPECT_NEAR(g.advantages[0], a0, 1e-12);
  EXPECT_NEAR(g.returns[0], a0 + 0.5, 1e-12);
  // Without a terminal the last value is bootstrapped.
  const auto b = compute_gae({1.0}, {0.5}, {false}, 9.0, 0.9, 0.8);
  EXPECT_NEAR(b.advantages[0], 1.0 + 0.9 * 9.0 - 0.5, 1e-12);
}

TEST(Ppo, SelectActionRules) {
  std::mt19937_64 rng(4);
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(4);
  onehot(2) = 1.0;
  EXPECT_EQ(select_action(onehot, true, rng), 2);
  EXPECT_EQ(select_action(onehot, false, rng), 2);
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(4, 0.25);
  EXPECT_EQ(select_action(uniform, true, rng), 0);
  std::mt19937_64 a(77), b(77);
  for (int k = 0; k < 50; ++k) EXPECT_EQ(select_action(uniform, false, a), select_action(uniform, false, b));
}

TEST(Ppo, ProbabilitiesStayNormalizedAcrossUpdates) {
  PpoHyper h;
  h.hidden = 16;
  h.lr = 1e-2;
  PpoAgent agent(6, 4, h, 11);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int round = 0; round < 5; ++round) {
    std::vector<Transition> rollout;
    for (int k = 0; k < 64; ++k) {
      Transition t;
      for (int i = 0; i < 6; ++i) t.obs.push_back(n(rng));
      const auto a = agent.act(t.obs, rng, false);
      t.action = a.action;
      t.logp = std::log(a.probs(a.action));
      t.value = a.value;
      t.reward = t.action == 1 ? 1.0 : 0.0;
      t.done = k % 16 == 15;
      rollout.push_back(t);
    }
    const auto stats = agent.update(rollout, 0.0, rng);
    EXPECT_EQ(stats.skipped, 0);
    for (int k = 0; k < 20; ++k) {
      std::vector<double> obs;
      for (int i = 0; i < 6; ++i) obs.push_back(n(rng));
      const auto p = agent.probabilities(obs);
      ASSERT_NEAR(p.sum(), 1.0, 1e-6);
      ASSERT_GE(p.minCoeff(), 0.0);
    }
  }
}

TEST(Ppo, CheckpointRoundTrip) {
  PpoHyper h;
  h.hidden = 8;
  const PpoAgent agent(5, 3, h, 2);
  const auto back = PpoAgent::from_json(agent.to_json());
  const std::vector<double> obs{0.1, -0.2, 0.3, 0.0, 1.0};
  EXPECT_EQ((agent.probabilities(obs) - back.probabilities(obs)).norm(), 0.0);
  EXPECT_EQ(agent.value(obs), back.value(obs));
}

TEST(Observation, NoiselessAndPadded) {
  ObservationParams p;
  p.sigma_pos = 0.0;
  p.sigma_vel = 0.0;
  std::array<std::vector<VehicleState>, 3> frames;
  for (auto& f : frames) f = {member(0, 100, 4, 25), member(1, 90, 4, 25)};
  std::mt19937_64 rng(1);
  const auto o = observe(frames, {0, 1}, 0.1, p, rng);
  EXPECT_EQ(o.platoon_rows, 2);
  EXPECT_EQ(o.object_rows, 0);
  EXPECT_EQ(static_cast<int>(o.values.size()), observation_size(2, p));
  EXPECT_EQ(o.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(o.at(1, 0), -10.0);
  EXPECT_DOUBLE_EQ(o.at(1, 2), 25.0);
  for (int r = 2; r < o.rows; ++r) EXPECT_EQ(o.at(r, 0), p.sentinel_x);
}

TEST(Observation, SeededNoiseIsReproducible) {
  ObservationParams p;
  std::array<std::vector<VehicleState>, 3> frames;
  for (auto& f : frames) f = {member(0, 100, 4, 25), member(1, 90, 4, 25), member(5, 130, 0, 20)};
  std::mt19937_64 a(9), b(9), c(10);
  const auto o1 = observe(frames, {0, 1}, 0.1, p, a);
  const auto o2 = observe(frames, {0, 1}, 0.1, p, b);
  const auto o3 = observe(frames, {0, 1}, 0.1, p, c);
  EXPECT_EQ(o1.values, o2.values);
  EXPECT_NE(o1.values, o3.values);
  EXPECT_EQ(o1.object_rows, 1);
  for (double v : observation_features(o1)) EXPECT_TRUE(std::isfinite(v));
}
