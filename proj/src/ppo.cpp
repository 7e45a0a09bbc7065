#include "platoon/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace platoon {

void PpoHyper::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("ppo: clip must lie in (0,1)");
  if (!(lr > 0.0)) throw std::invalid_argument("ppo: learning rate must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0 && lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("ppo: gamma/lambda out of range");
  }
  if (rollout_steps <= 0 || minibatch <= 0 || epochs <= 0 || hidden <= 0) {
    throw std::invalid_argument("ppo: sizes must be positive");
  }
  if (value_coef < 0.0 || entropy_coef < 0.0 || max_grad_norm <= 0.0) {
    throw std::invalid_argument("ppo: coefficients out of range");
  }
}

nlohmann::json PpoHyper::to_json() const {
  return {{"clip", clip},       {"value_coef", value_coef}, {"entropy_coef", entropy_coef},
          {"lr", lr},           {"gamma", gamma},           {"lambda", lambda},
          {"rollout_steps", rollout_steps}, {"minibatch", minibatch}, {"epochs", epochs},
          {"max_grad_norm", max_grad_norm}, {"hidden", hidden}};
}

PpoHyper PpoHyper::from_json(const nlohmann::json& j) {
  PpoHyper h;
  h.clip = j.value("clip", h.clip);
  h.value_coef = j.value("value_coef", h.value_coef);
  h.entropy_coef = j.value("entropy_coef", h.entropy_coef);
  h.lr = j.value("lr", h.lr);
  h.gamma = j.value("gamma", h.gamma);
  h.lambda = j.value("lambda", h.lambda);
  h.rollout_steps = j.value("rollout_steps", h.rollout_steps);
  h.minibatch = j.value("minibatch", h.minibatch);
  h.epochs = j.value("epochs", h.epochs);
  h.max_grad_norm = j.value("max_grad_norm", h.max_grad_norm);
  h.hidden = j.value("hidden", h.hidden);
  h.validate();
  return h;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

PolicyLoss ppo_policy_loss(const Eigen::MatrixXd& logits, const std::vector<int>& actions,
                           const std::vector<double>& old_logp, const std::vector<double>& advantages, double clip,
                           double entropy_coef) {
  const auto batch = static_cast<size_t>(logits.cols());
  if (actions.size() != batch || old_logp.size() != batch || advantages.size() != batch || batch == 0) {
    throw std::invalid_argument("ppo_policy_loss: batch size mismatch");
  }
  PolicyLoss out;
  out.dlogits = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  const double inv_b = 1.0 / static_cast<double>(batch);
  int clipped = 0;
  for (size_t i = 0; i < batch; ++i) {
    const Eigen::VectorXd p = softmax(logits.col(static_cast<Eigen::Index>(i)));
    const int a = actions[i];
    if (a < 0 || a >= p.size()) throw std::invalid_argument("ppo_policy_loss: action out of range");
    const double logp = std::log(p(a));
    const double ratio = std::exp(logp - old_logp[i]);
    const double adv = advantages[i];
    const double s1 = ratio * adv;
    const double s2 = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    const double obj = std::min(s1, s2);
    out.surrogate += obj * inv_b;
    // d obj / d logp is ratio * A when the unclipped branch is the minimum.
    const double g = s1 <= s2 ? ratio * adv : 0.0;
    if (s2 < s1) ++clipped;
    Eigen::VectorXd dlogp = -p;
    dlogp(a) += 1.0;
    out.dlogits.col(static_cast<Eigen::Index>(i)) -= inv_b * g * dlogp;

    double h = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      if (p(k) > 0.0) h -= p(k) * std::log(p(k));
    }
    out.entropy += h * inv_b;
    if (entropy_coef > 0.0) {
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double lp = p(k) > 0.0 ? std::log(p(k)) : 0.0;
        // dH/dz_k = -p_k (log p_k + H)
        out.dlogits(k, static_cast<Eigen::Index>(i)) += entropy_coef * inv_b * p(k) * (lp + h);
      }
    }
  }
  out.loss = -out.surrogate - entropy_coef * out.entropy;
  out.clip_fraction = clipped * inv_b;
  return out;
}

Gae compute_gae(const std::vector<double>& rewards, const std::vector<double>& values, const std::vector<bool>& done,
                double last_value, double gamma, double lambda) {
  const size_t n = rewards.size();
  if (values.size() != n || done.size() != n) throw std::invalid_argument("compute_gae: size mismatch");
  Gae g;
  g.advantages.assign(n, 0.0);
  g.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = last_value;
  for (size_t k = n; k-- > 0;) {
    const double mask = done[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * mask - values[k];
    next_adv = delta + gamma * lambda * mask * next_adv;
    g.advantages[k] = next_adv;
    g.returns[k] = next_adv + values[k];
    next_value = values[k];
  }
  return g;
}

int select_action(const Eigen::VectorXd& probs, bool greedy, std::mt19937_64& rng) {
  if (probs.size() == 0) throw std::invalid_argument("select_action: empty distribution");
  if (greedy) {
    int best = 0;
    for (Eigen::Index k = 1; k < probs.size(); ++k) {
      if (probs(k) > probs(best)) best = static_cast<int>(k);
    }
    return best;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng) * probs.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    acc += probs(k);
    if (r < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

PpoAgent::PpoAgent(int obs_dim, int n_actions, const PpoHyper& h, std::uint64_t seed)
    : obs_dim_(obs_dim), n_actions_(n_actions), hyper_(h) {
  h.validate();
  std::mt19937_64 rng(seed);
  actor_ = Mlp(obs_dim, h.hidden, n_actions, rng, 0.01);
  critic_ = Mlp(obs_dim, h.hidden, 1, rng, 1.0);
  actor_opt_ = Adam(actor_, h.lr);
  critic_opt_ = Adam(critic_, h.lr);
}

namespace {

Eigen::MatrixXd as_column(const std::vector<double>& obs) {
  return Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
}

}  // namespace

Eigen::VectorXd PpoAgent::probabilities(const std::vector<double>& obs) const {
  return softmax(actor_.forward(as_column(obs)).col(0));
}

double PpoAgent::value(const std::vector<double>& obs) const { return critic_.forward(as_column(obs))(0, 0); }

PpoAgent::Act PpoAgent::act(const std::vector<double>& obs, std::mt19937_64& rng, bool greedy) const {
  Act a;
  a.probs = probabilities(obs);
  a.action = select_action(a.probs, greedy, rng);
  a.logp = std::log(a.probs(a.action));
  a.value = value(obs);
  return a;
}

UpdateStats PpoAgent::update(const std::vector<Transition>& rollout, double last_value, std::mt19937_64& rng) {
  UpdateStats stats;
  const size_t n = rollout.size();
  if (n == 0) return stats;
  std::vector<double> rewards, values;
  std::vector<bool> done;
  for (const auto& t : rollout) {
    rewards.push_back(t.reward);
    values.push_back(t.value);
    done.push_back(t.done);
  }
  Gae gae = compute_gae(rewards, values, done, last_value, hyper_.gamma, hyper_.lambda);
  // Advantage normalisation over the whole rollout.
  const double mean = std::accumulate(gae.advantages.begin(), gae.advantages.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double a : gae.advantages) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  for (double& a : gae.advantages) a = (a - mean) / (sd + 1e-8);

  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  int batches = 0;
  for (int epoch = 0; epoch < hyper_.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t start = 0; start < n; start += static_cast<size_t>(hyper_.minibatch)) {
      const size_t end = std::min(n, start + static_cast<size_t>(hyper_.minibatch));
      const auto b = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd x(obs_dim_, b);
      std::vector<int> actions;
      std::vector<double> old_logp, adv;
      Eigen::MatrixXd ret(1, b);
      for (size_t k = start; k < end; ++k) {
        const auto& t = rollout[idx[k]];
        x.col(static_cast<Eigen::Index>(k - start)) = as_column(t.obs);
        actions.push_back(t.action);
        old_logp.push_back(t.logp);
        adv.push_back(gae.advantages[idx[k]]);
        ret(0, static_cast<Eigen::Index>(k - start)) = gae.returns[idx[k]];
      }
      Mlp::Cache ac, cc;
      const Eigen::MatrixXd logits = actor_.forward(x, &ac);
      const PolicyLoss pl = ppo_policy_loss(logits, actions, old_logp, adv, hyper_.clip, hyper_.entropy_coef);
      const Eigen::MatrixXd v = critic_.forward(x, &cc);
      const Eigen::MatrixXd diff = v - ret;
      const double vloss = hyper_.value_coef * diff.squaredNorm() / static_cast<double>(b);
      const Eigen::MatrixXd dv = (2.0 * hyper_.value_coef / static_cast<double>(b)) * diff;

      Mlp::Grad ga = actor_.backward(ac, pl.dlogits);
      Mlp::Grad gc = critic_.backward(cc, dv);
      const double na = grad_norm(ga);
      const double nc = grad_norm(gc);
      if (!std::isfinite(na) || !std::isfinite(nc) || !std::isfinite(pl.loss) || !std::isfinite(vloss)) {
        ++stats.skipped;
        continue;
      }
      if (na > hyper_.max_grad_norm) scale_grad(ga, hyper_.max_grad_norm / na);
      if (nc > hyper_.max_grad_norm) scale_grad(gc, hyper_.max_grad_norm / nc);
      actor_opt_.step(actor_, ga);
      critic_opt_.step(critic_, gc);
      stats.policy_loss += pl.loss;
      stats.value_loss += vloss;
      stats.entropy += pl.entropy;
      stats.clip_fraction += pl.clip_fraction;
      ++batches;
    }
  }
  if (batches > 0) {
    stats.policy_loss /= batches;
    stats.value_loss /= batches;
    stats.entropy /= batches;
    stats.clip_fraction /= batches;
  }
  return stats;
}

nlohmann::json PpoAgent::to_json() const {
  return {{"format", "platoon-ppo"}, {"version", 1},          {"obs_dim", obs_dim_}, {"n_actions", n_actions_},
          {"hyper", hyper_.to_json()}, {"actor", actor_.to_json()}, {"critic", critic_.to_json()}};
}

PpoAgent PpoAgent::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "platoon-ppo" || j.value("version", 0) != 1) {
    throw std::runtime_error("checkpoint: unsupported format");
  }
  PpoAgent a;
  a.obs_dim_ = j.at("obs_dim").get<int>();
  a.n_actions_ = j.at("n_actions").get<int>();
  a.hyper_ = PpoHyper::from_json(j.at("hyper"));
  a.actor_ = Mlp::from_json(j.at("actor"));
  a.critic_ = Mlp::from_json(j.at("critic"));
  if (a.actor_.input_size() != a.obs_dim_ || a.actor_.output_size() != a.n_actions_ ||
      a.critic_.input_size() != a.obs_dim_ || a.critic_.output_size() != 1) {
    throw std::runtime_error("checkpoint: network shapes do not match header");
  }
  a.actor_opt_ = Adam(a.actor_, a.hyper_.lr);
  a.critic_opt_ = Adam(a.critic_, a.hyper_.lr);
  return a;
}

void PpoAgent::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  f << to_json().dump();
}

PpoAgent PpoAgent::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path);
  return from_json(nlohmann::json::parse(f));
}

}  // namespace platoon
