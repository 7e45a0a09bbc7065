#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "platoon/ppo.hpp"
#include "platoon/scenario.hpp"
#include "platoon/simulation.hpp"

namespace platoon {

// Case 2 with shorter episodes and a smaller traffic window.
ScenarioSpec training_scenario();

struct TrainingConfig {
  long total_steps = 50000;  // distribution-layer decisions
  std::uint64_t seed = 0;
  PpoHyper hyper;
  Policy vehicle_layer = Policy::kGrdf;

  void validate() const;
};

struct EpisodeRecord {
  long step = 0;  // decisions taken when the episode ended
  int episode = 0;
  double reward = 0.0;
  int length = 0;
  bool collision = false;
};

struct UpdateRecord {
  long step = 0;
  UpdateStats stats;
};

struct TrainingResult {
  PpoAgent agent;
  std::vector<EpisodeRecord> episodes;
  std::vector<UpdateRecord> updates;
  int skipped_minibatches = 0;
};

// Mean episodic reward over the first or last `fraction` of episodes (at least one).
double head_mean(const std::vector<EpisodeRecord>& episodes, double fraction);
double tail_mean(const std::vector<EpisodeRecord>& episodes, double fraction);

// PPO on the closed-loop simulator. Each finished episode appends a row to
// `curve` (step, episode, reward, length, collision, policy_loss, value_loss).
TrainingResult train_policy(const ScenarioSpec& spec, const StackConfig& cfg, const TrainingConfig& tc,
                            std::ostream* curve = nullptr);

}  // namespace platoon
