#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "platoon/mlp.hpp"

namespace platoon {

struct PpoHyper {
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double lr = 3e-4;
  double gamma = 0.85;
  double lambda = 0.95;
  int rollout_steps = 128;
  int minibatch = 64;
  int epochs = 4;
  double max_grad_norm = 0.5;
  int hidden = 256;

  void validate() const;
  nlohmann::json to_json() const;
  static PpoHyper from_json(const nlohmann::json& j);
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct PolicyLoss {
  double loss = 0.0;       // -(mean clipped surrogate) - c_e * mean entropy
  double surrogate = 0.0;  // mean clipped surrogate
  double entropy = 0.0;
  double clip_fraction = 0.0;
  Eigen::MatrixXd dlogits;  // d loss / d logits, same shape as logits
};

// logits: one column per sample. Clipped surrogate
// min(r A, clip(r, 1-eps, 1+eps) A) with r = exp(logp - old_logp).
PolicyLoss ppo_policy_loss(const Eigen::MatrixXd& logits, const std::vector<int>& actions,
                           const std::vector<double>& old_logp, const std::vector<double>& advantages, double clip,
                           double entropy_coef);

struct Gae {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation. done[t] marks the last step of an episode.
Gae compute_gae(const std::vector<double>& rewards, const std::vector<double>& values, const std::vector<bool>& done,
                double last_value, double gamma, double lambda);

// Greedy picks the highest probability with the lowest index on ties.
int select_action(const Eigen::VectorXd& probs, bool greedy, std::mt19937_64& rng);

struct Transition {
  std::vector<double> obs;
  int action = 0;
  double logp = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  int skipped = 0;  // minibatches dropped for non-finite gradients
};

class PpoAgent {
 public:
  PpoAgent() = default;
  PpoAgent(int obs_dim, int n_actions, const PpoHyper& h, std::uint64_t seed);

  struct Act {
    int action = 0;
    double logp = 0.0;
    double value = 0.0;
    Eigen::VectorXd probs;
  };
  Act act(const std::vector<double>& obs, std::mt19937_64& rng, bool greedy) const;
  Eigen::VectorXd probabilities(const std::vector<double>& obs) const;
  double value(const std::vector<double>& obs) const;

  UpdateStats update(const std::vector<Transition>& rollout, double last_value, std::mt19937_64& rng);

  int obs_dim() const { return obs_dim_; }
  int n_actions() const { return n_actions_; }
  const PpoHyper& hyper() const { return hyper_; }

  nlohmann::json to_json() const;
  static PpoAgent from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static PpoAgent load(const std::string& path);

 private:
  int obs_dim_ = 0;
  int n_actions_ = 0;
  PpoHyper hyper_;
  Mlp actor_, critic_;
  Adam actor_opt_, critic_opt_;
};

}  // namespace platoon
