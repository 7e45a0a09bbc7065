#pragma once

#include <vector>

#include "platoon/risk_field.hpp"
#include "platoon/world.hpp"

namespace platoon {

struct RewardWeights {
  double w_s = 1.0, w_e = 0.5, w_d = 0.3, w_r = 0.2;
  double w_col = 10.0, w_ris = 1.0;
  double w_x = 0.02, w_y = 0.1, w_v = 0.05;
  double w_rf = 1.0, w_re = 0.5, w_ri = 0.5;
  double k_t = 0.5, k_v = 0.5;
  double tau_min = 2.5;
  double d_target = 10.0;
  double v_max = 40.0;

  void validate() const;
};

struct RewardInputs {
  bool collision = false;
  std::vector<VehicleState> platoon;  // front to back
  std::vector<VehicleState> others;
  int n_trigger = 0;
  int n_step = 0;
  double reorg_elapsed = 0.0;  // time spent in the current or last reorganization
  double reorg_time_max = 60.0;
  double leader_ttc = kInf;
  bool multi_group = false;    // the action taken this step splits the platoon
};

struct RewardBreakdown {
  double r_col = 1.0;
  double r_ris = 0.0;
  double r_s = 0.0;
  double r_e = 0.0;
  double r_d = 0.0;
  double r_rf = 0.0;
  double r_re = 0.0;
  double r_ri = 0.0;
  double r_r = 0.0;
  double total = 0.0;
};

RewardBreakdown compute_reward(const RewardInputs& in, const RewardWeights& w, const RiskFieldParams& risk);

// Upper bound on |total| for any input under the given weights.
double reward_bound(const RewardWeights& w);

}  // namespace platoon
