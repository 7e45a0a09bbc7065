#include "platoon/training.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>

#include "platoon/io.hpp"

namespace platoon {

ScenarioSpec training_scenario() {
  ScenarioSpec s = default_scenario(2);
  s.episode_length = 60.0;
  s.spawn_behind = 300.0;
  s.spawn_ahead = 600.0;
  s.road.length = 3000.0;
  s.brake->time_min = 5.0;
  s.brake->time_max = 40.0;
  return s;
}

void TrainingConfig::validate() const {
  hyper.validate();
  if (total_steps < 1) throw std::invalid_argument("training: total steps must be positive");
  if (!uses_distribution_layer(vehicle_layer)) {
    throw std::invalid_argument("training: the vehicle layer must be one that takes a configuration");
  }
}

double head_mean(const std::vector<EpisodeRecord>& episodes, double fraction) {
  if (episodes.empty()) return 0.0;
  const size_t k = std::max<size_t>(1, static_cast<size_t>(fraction * static_cast<double>(episodes.size())));
  double s = 0.0;
  for (size_t i = 0; i < k; ++i) s += episodes[i].reward;
  return s / static_cast<double>(k);
}

double tail_mean(const std::vector<EpisodeRecord>& episodes, double fraction) {
  if (episodes.empty()) return 0.0;
  const size_t k = std::max<size_t>(1, static_cast<size_t>(fraction * static_cast<double>(episodes.size())));
  double s = 0.0;
  for (size_t i = episodes.size() - k; i < episodes.size(); ++i) s += episodes[i].reward;
  return s / static_cast<double>(k);
}

TrainingResult train_policy(const ScenarioSpec& spec, const StackConfig& cfg, const TrainingConfig& tc,
                            std::ostream* curve) {
  tc.validate();
  spec.validate();
  std::mt19937_64 rng(tc.seed);
  const int obs_dim = observation_size(spec.platoon_size, cfg.observation);
  const int n_actions = 1 << (spec.platoon_size - 1);
  TrainingResult res;
  res.agent = PpoAgent(obs_dim, n_actions, tc.hyper, tc.seed);
  if (curve) *curve << "step,episode,reward,length,collision,policy_loss,value_loss\n";

  int episode = 0;
  auto new_env = [&]() {
    const std::uint64_t env_seed = tc.seed * 1000003ULL + static_cast<std::uint64_t>(episode);
    return std::make_unique<Simulation>(spec, cfg, tc.vehicle_layer, env_seed);
  };
  auto env = new_env();
  std::vector<double> obs = env->features();
  std::vector<Transition> rollout;
  double ep_reward = 0.0;
  int ep_len = 0;
  UpdateStats last;

  for (long step = 1; step <= tc.total_steps; ++step) {
    const auto a = res.agent.act(obs, rng, false);
    const StepOutcome out = env->step_platoon(a.action);
    rollout.push_back({obs, a.action, a.logp, a.value, out.reward, out.done});
    ep_reward += out.reward;
    ++ep_len;
    if (out.done) {
      const auto m = env->metrics();
      if (!m.error.empty()) throw std::runtime_error("training episode failed: " + m.error);
      res.episodes.push_back({step, episode, ep_reward, ep_len, m.collision});
      if (curve) {
        *curve << step << ',' << episode << ',' << fmt(ep_reward) << ',' << ep_len << ',' << (m.collision ? 1 : 0)
               << ',' << fmt(last.policy_loss) << ',' << fmt(last.value_loss) << '\n';
      }
      ++episode;
      ep_reward = 0.0;
      ep_len = 0;
      env = new_env();
    }
    obs = env->features();
    if (static_cast<int>(rollout.size()) == tc.hyper.rollout_steps || step == tc.total_steps) {
      const double last_value = rollout.back().done ? 0.0 : res.agent.value(obs);
      last = res.agent.update(rollout, last_value, rng);
      res.skipped_minibatches += last.skipped;
      res.updates.push_back({step, last});
      rollout.clear();
    }
  }
  return res;
}

}  // namespace platoon
