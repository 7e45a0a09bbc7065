#include "platoon/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace platoon {

void RewardWeights::validate() const {
  const double all[] = {w_s, w_e, w_d, w_r, w_col, w_ris, w_x, w_y, w_v, w_rf, w_re, w_ri, k_t, k_v};
  for (double v : all) {
    if (!std::isfinite(v)) throw std::invalid_argument("reward weights must be finite");
  }
  if (!(tau_min > 0.0 && d_target > 0.0 && v_max > 0.0)) {
    throw std::invalid_argument("reward needs positive tau_min, d_target and v_max");
  }
}

RewardBreakdown compute_reward(const RewardInputs& in, const RewardWeights& w, const RiskFieldParams& risk) {
  RewardBreakdown r;
  const size_t n = in.platoon.size();

  r.r_col = in.collision ? 0.0 : 1.0;
  for (const auto& m : in.platoon) r.r_ris = std::max(r.r_ris, risk_reward(m, in.others, risk));
  // The risk term is a penalty.
  r.r_s = w.w_col * r.r_col - w.w_ris * r.r_ris;

  double speed_ratio = 0.0;
  for (const auto& m : in.platoon) speed_ratio += std::clamp(m.speed / w.v_max, 0.0, 1.0);
  if (n > 0) speed_ratio /= static_cast<double>(n);
  r.r_e = speed_ratio;

  if (n > 1) {
    double err = 0.0;
    for (size_t i = 0; i + 1 < n; ++i) {
      const auto& a = in.platoon[i];
      const auto& b = in.platoon[i + 1];
      err += w.w_x * std::abs(a.x - b.x - w.d_target) + w.w_y * std::abs(a.y - b.y) + w.w_v * std::abs(a.speed - b.speed);
    }
    r.r_d = std::clamp(-err / static_cast<double>(n - 1), -1.0, 0.0);
  }

  r.r_rf = in.n_step > 0 ? static_cast<double>(in.n_trigger) / in.n_step : 0.0;
  r.r_re = std::clamp(in.reorg_elapsed / in.reorg_time_max, 0.0, 1.0);
  if (in.multi_group) {
    const double ttc_part = std::isfinite(in.leader_ttc) && in.leader_ttc > 0.0
                                ? std::min(w.tau_min / in.leader_ttc, 1.0)
                                : (in.leader_ttc <= 0.0 ? 1.0 : 0.0);
    r.r_ri = w.k_t * ttc_part + w.k_v * speed_ratio;
  }
  r.r_r = -w.w_rf * r.r_rf - w.w_re * r.r_re + w.w_ri * r.r_ri;

  r.total = w.w_s * r.r_s + w.w_e * r.r_e + w.w_d * r.r_d + w.w_r * r.r_r;
  return r;
}

double reward_bound(const RewardWeights& w) {
  const double rs = std::abs(w.w_col) + std::abs(w.w_ris);
  const double rr = std::abs(w.w_rf) + std::abs(w.w_re) + std::abs(w.w_ri) * (std::abs(w.k_t) + std::abs(w.k_v));
  return std::abs(w.w_s) * rs + std::abs(w.w_e) + std::abs(w.w_d) + std::abs(w.w_r) * rr;
}

}  // namespace platoon
