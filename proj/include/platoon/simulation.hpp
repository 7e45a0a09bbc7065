#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "platoon/baselines.hpp"
#include "platoon/coalition.hpp"
#include "platoon/configuration.hpp"
#include "platoon/controllers.hpp"
#include "platoon/motion.hpp"
#include "platoon/observation.hpp"
#include "platoon/pdi.hpp"
#include "platoon/ppo.hpp"
#include "platoon/reward.hpp"
#include "platoon/risk_field.hpp"
#include "platoon/scenario.hpp"

namespace platoon {

enum class Policy { kGrdf, kGrdfGt, kSiplc, kSuplc, kRrl };

const char* policy_name(Policy p);
// Accepts grdf, grdf-gt, siplc, suplc, rrl. Throws std::invalid_argument otherwise.
Policy parse_policy(const std::string& s);
// Policies whose configuration comes from the distribution layer.
bool uses_distribution_layer(Policy p);

// Every tunable of the decision and control stack.
struct StackConfig {
  RiskFieldParams risk;
  GameWeights game;
  PredictParams predict;
  CoalitionParams coalition;
  PdiParams pdi;
  LatticeParams lattice;
  DynamicLimits limits;
  SelectionWeights selection;
  LqrGains lqr;
  PidGains pid;
  ObservationParams observation;
  RewardWeights reward;
  HeuristicParams heuristic;
  BaselineParams baseline;
  double dt = 0.1;
  double vehicle_period = 1.0;
  double platoon_period = 5.0;
  double cruise_speed = 25.0;
  double platoon_gap = 10.0;      // center-to-center target spacing
  double follow_headway = 1.2;    // behind a vehicle outside the platoon
  double follow_min_gap = 2.0;
  double speed_gain = 0.5;        // speed-tracking gain, 1/s
  double catch_up_margin = 5.0;   // followers may exceed cruise by this much
  double context_range = 150.0;   // scene radius handed to the decision layers
  double ttc_cap = 30.0;          // episode min-TTC is capped here
  double reorg_time_max = 60.0;
  double speed_step = 3.0;           // lattice speeds stay within this of the current speed
  double change_patience = 3.0;      // a pending lane change waits this long for a gap
  double change_margin = 4.0;        // gap acceptance when a lane change starts
  double change_closing_time = 2.0;

  void validate() const;
  nlohmann::json to_json() const;
  static StackConfig from_json(const nlohmann::json& j);
};

struct EpisodeMetrics {
  std::uint64_t seed = 0;
  bool collision = false;
  double avg_speed = 0.0;
  double min_ttc = 0.0;
  double avg_distance = 0.0;
  bool formation_success = true;
  double formation_time = 0.0;  // NaN unless a reorganization completed successfully
  int reorganizations = 0;
  double duration = 0.0;
  double episode_reward = 0.0;
  int decisions = 0;
  int trajectories = 0;            // selected trajectories
  int checker_violations = 0;      // selected trajectories failing the limits
  int boundary_violations = 0;     // selected polynomials off their boundary conditions
  int fallbacks = 0;
  std::string error;               // non-empty when the episode aborted
};

struct StepOutcome {
  double reward = 0.0;
  RewardBreakdown breakdown;
  bool done = false;
};

// One episode of the closed loop. The distribution layer can be driven from
// outside (training) through needs_decision/features/step_platoon, or from
// inside through run().
class Simulation {
 public:
  Simulation(const ScenarioSpec& spec, const StackConfig& cfg, Policy policy, std::uint64_t seed,
             const PpoAgent* agent = nullptr);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  // Runs to the end with the built-in distribution layer: the agent greedily
  // when one was given, the heuristic otherwise.
  EpisodeMetrics run();

  // External stepping. Applies configuration `action` and simulates one
  // platoon period or until termination.
  std::vector<double> features();
  StepOutcome step_platoon(int action);

  bool done() const { return done_; }
  double time() const;
  EpisodeMetrics metrics() const;
  const std::vector<VehicleState>& vehicles() const { return vehicles_; }
  std::vector<VehicleState> platoon_front_to_back() const;
  const ConfigAction& configuration() const { return config_; }
  int action_count() const { return static_cast<int>(configs_.size()); }
  int observation_dim() const;

  // JSON-lines log of every decision.
  void set_audit(std::ostream* out) { audit_ = out; }
  // CSV trace (t, id, x, y, v, a, jerk) of platoon members every step.
  void set_trace(std::ostream* out);

 private:
  struct Actor;
  struct Tracker;

  void tick();
  void apply_configuration(const ConfigAction& c);
  ConfigAction decide_configuration();
  RiskSummary risk_summary() const;
  void vehicle_layer();
  void hdv_lane_decisions();
  void start_pending_changes();
  // False when a lane change could not start; the vehicle then keeps its lane.
  bool plan_cav(size_t i, int dest_lane, bool starting_change);
  double hdv_accel(size_t i, const LaneIndex& idx) const;
  double cav_accel(size_t i, const LaneIndex& idx, const std::vector<int>& order) const;
  void integrate(const std::vector<double>& accel, const std::vector<double>& yaw_rate);
  void handle_collisions();
  void spawn_ramp();
  void update_metrics();
  void audit(const nlohmann::json& j);
  std::vector<VehicleState> background_near() const;
  std::vector<int> platoon_order() const;
  double member_ttc(size_t i) const;
  int index_of(int id) const;

  ScenarioSpec spec_;
  StackConfig cfg_;
  Policy policy_;
  std::uint64_t seed_;
  const PpoAgent* agent_;
  std::mt19937_64 rng_;
  std::mt19937_64 obs_rng_;
  SimClock clock_;
  RoadMap road_;
  std::vector<VehicleState> vehicles_;
  std::vector<Actor> actors_;
  std::vector<int> platoon_ids_;
  std::optional<ScriptedLead> lead_;
  std::array<std::vector<VehicleState>, 3> frames_;
  int next_id_ = 0;
  std::vector<ConfigAction> configs_;
  ConfigAction config_;
  HeuristicConfigurator heuristic_;
  SuplcController suplc_;
  LqrLongitudinal lqr_;
  std::unique_ptr<Tracker> tracker_;
  bool done_ = false;
  bool reorg_active_ = false;  // from leaving the single group until one coalition again
  double reorg_since_ = 0.0;
  int n_trigger_ = 0;
  int n_step_ = 0;
  std::ostream* audit_ = nullptr;
  std::ostream* trace_ = nullptr;
};

// Convenience wrapper around Simulation::run. Exceptions become an error
// string in the metrics.
EpisodeMetrics run_episode(const ScenarioSpec& spec, const StackConfig& cfg, Policy policy, std::uint64_t seed,
                           const PpoAgent* agent = nullptr, std::ostream* audit = nullptr,
                           std::ostream* trace = nullptr);

}  // namespace platoon
