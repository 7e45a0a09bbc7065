#pragma once

#include <string>
#include <vector>

#include "platoon/configuration.hpp"
#include "platoon/motion.hpp"
#include "platoon/pdi.hpp"
#include "platoon/risk_field.hpp"
#include "platoon/traffic.hpp"
#include "platoon/world.hpp"

namespace platoon {

enum class LateralAction { kKeep = 0, kLeft = 1, kRight = 2 };

inline int lane_delta(LateralAction a) { return a == LateralAction::kLeft ? 1 : (a == LateralAction::kRight ? -1 : 0); }
const char* action_name(LateralAction a);

struct CoalitionParams {
  double x_lim = 30.0;
  double y_lim = 1.5;
};

// Members are indices into the platoon vector, front to back.
struct Coalition {
  std::vector<int> members;
  int leader() const { return members.front(); }
};

struct CoalitionPartition {
  std::vector<Coalition> coalitions;
  int coalition_of(int member) const;
};

// Longitudinal order of the platoon, front first.
std::vector<int> front_to_back(const std::vector<VehicleState>& platoon);

// Walks the platoon front to back and starts a new coalition whenever two
// consecutive members are too far apart, in different lanes, or separated by a
// foreign vehicle in their lane.
CoalitionPartition form_coalitions(const std::vector<VehicleState>& platoon,
                                   const std::vector<VehicleState>& background, const CoalitionParams& p = {});

enum class GamePhase { kSteady, kSplitting, kMerging };
const char* phase_name(GamePhase p);

// Splitting while the distribution layer asks for several groups, merging while
// it asks for one but the platoon is physically broken, steady otherwise.
GamePhase resolve_phase(const ConfigAction& target, const CoalitionPartition& partition);

struct GameWeights {
  double w_s = 1.0, w_e = 0.6, w_it = 0.2, w_er = 0.4;
  double k_tau = 0.1, k_d = 0.0005;
  double k_y = 0.5, k_v = 0.2;
  double w_pdi = 0.05;
  double tau_cap = 10.0;
  double d_cap = 50.0;
  double d_target = 10.0;
  double v_max = 40.0;
  double entropy_window = 50.0;
  double collision_penalty = 100.0;  // per predicted overlapping sample
  double slot_penalty = 1e5;         // lane change into an occupied slot
  double pdi_infeasible = 100.0;     // PDI charged when no free path exists
  // Count background vehicles in the lane-occupancy entropy as well as the
  // platoon's own members.
  bool entropy_counts_background = false;

  void validate() const;
  GameWeights scaled(double c) const;
};

struct PredictParams {
  double horizon = 3.0;
  double dt = 0.2;
  double lane_change_duration = 3.0;
  double stagger = 1.0;      // start offset between successive coalition members
  double slot_time = 1.0;    // time of the occupancy check used for pruning
  double slot_margin = 4.0;  // longitudinal clearance required around the slot
  double closing_time = 2.0; // extra clearance per m/s of closing speed in the slot
  double cruise_speed = 25.0;
  double platoon_headway = 0.12;
  double free_headway = 1.2;

  void validate() const;
};

// Everything the game needs about the current scene.
struct GameContext {
  RoadMap road;
  std::vector<VehicleState> platoon;     // front to back
  std::vector<VehicleState> background;
  std::vector<int> player_of;            // platoon index -> player
  int players = 0;
  GamePhase phase = GamePhase::kSteady;
  bool use_pdi = false;
};

// Players are the non-empty intersections of configuration groups with the
// physical coalitions, ordered by their front member.
std::vector<std::vector<int>> make_players(const CoalitionPartition& partition, const ConfigAction& target);

GameContext make_context(const RoadMap& road, const std::vector<VehicleState>& platoon,
                         const std::vector<VehicleState>& background, const ConfigAction& target, bool use_pdi,
                         const CoalitionParams& cp = {});

struct Prediction {
  std::vector<double> times;
  std::vector<std::vector<VehicleState>> platoon;     // [sample][member]
  std::vector<std::vector<VehicleState>> background;  // [sample][vehicle]
};

// Constant-velocity background (lateral motion stops at the adjacent lane
// center); platoon members follow quintic lane changes with staggered starts and
// IDM speeds.
Prediction predict_outcome(const GameContext& ctx, const std::vector<LateralAction>& member_actions,
                           const PredictParams& pp);

struct SafetyTerms {
  double max_risk = 0.0;
  double ttc = kInf;   // to the leading vehicle at the horizon
  double dist2 = kInf; // squared distance to the leading vehicle at the horizon
  int overlaps = 0;
  bool slot_conflict = false;
};

double safety_profit(const SafetyTerms& s, const GameWeights& w);
double efficiency_profit(const std::vector<double>& speeds, double v_max);
// -n_S * sum_j q_j ln q_j with q_j = p_j / sum(p); equals the textbook form when
// only coalition members are counted.
double integration_entropy(const std::vector<int>& lane_counts, int n_s);
// Sum of |x_j - x_{j+1} - d| + k_y |y_j - y_{j+1}| + k_v |v_j - v_{j+1}| over
// consecutive pairs, returned with a negative sign.
double tracking_profit(const std::vector<VehicleState>& front_to_back, const GameWeights& w);

struct PlayerValue {
  double value = 0.0;
  double safety = 0.0;
  double efficiency = 0.0;
  double integration = 0.0;
  double tracking = 0.0;
  double pdi_term = 0.0;
};

struct JointEvaluation {
  std::vector<PlayerValue> players;
  double total = 0.0;
  double pdi = 0.0;
  bool pdi_feasible = true;
};

// Expands per-player actions to members.
std::vector<LateralAction> expand_actions(const GameContext& ctx, const std::vector<LateralAction>& player_actions);

bool action_on_road(const GameContext& ctx, const std::vector<LateralAction>& member_actions);

JointEvaluation evaluate_joint(const GameContext& ctx, const std::vector<LateralAction>& player_actions,
                               const GameWeights& w, const PredictParams& pp, const RiskFieldParams& risk,
                               const PdiParams& pdi);

// Value of one player under a joint action, recomputed independently.
double coalition_value(const GameContext& ctx, int player, const std::vector<LateralAction>& player_actions,
                       const GameWeights& w, const PredictParams& pp, const RiskFieldParams& risk,
                       const PdiParams& pdi);

// True when the acting members' target slots are occupied at slot_time.
bool slot_conflict(const GameContext& ctx, const std::vector<LateralAction>& member_actions, const PredictParams& pp);

struct GameDecision {
  std::vector<LateralAction> player_actions;
  std::vector<LateralAction> member_actions;
  JointEvaluation evaluation;
  int candidates = 0;
  int pruned = 0;
};

// Exhaustive TU maximisation over the pruned joint space with the tie-break
// fewer lane changes, then lexicographic.
GameDecision solve_tu_game(const GameContext& ctx, const GameWeights& w, const PredictParams& pp,
                           const RiskFieldParams& risk, const PdiParams& pdi);

// Joint actions left after pruning (off-road and occupied-slot actions removed;
// all-keep always kept).
std::vector<std::vector<LateralAction>> prune_joint_actions(const GameContext& ctx, const PredictParams& pp,
                                                            int* total = nullptr);

// Reference: every per-vehicle assignment in 3^n that is on-road and respects
// common fate, no pruning.
GameDecision brute_force_game(const GameContext& ctx, const GameWeights& w, const PredictParams& pp,
                              const RiskFieldParams& risk, const PdiParams& pdi);

}  // namespace platoon
