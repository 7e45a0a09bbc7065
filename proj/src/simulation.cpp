#include "platoon/simulation.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace platoon {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RiskFieldParams, grm, k1, k2, d_min, v_max, d_support, lateral_scale)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GameWeights, w_s, w_e, w_it, w_er, k_tau, k_d, k_y, k_v, w_pdi,
                                                tau_cap, d_cap, d_target, v_max, entropy_window, collision_penalty,
                                                slot_penalty, pdi_infeasible, entropy_counts_background)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PredictParams, horizon, dt, lane_change_duration, stagger, slot_time,
                                                slot_margin, closing_time, cruise_speed, platoon_headway, free_headway)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CoalitionParams, x_lim, y_lim)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PdiParams, lane_change_penalty, distance_normalizer, node_spacing_min,
                                                node_spacing_max, preferred_spacing, lane_width, rear_overhang)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LatticeParams, durations, speed_offsets, dt, horizon,
                                                fallback_decel_speed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DynamicLimits, max_accel, max_jerk, max_lateral_accel)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SelectionWeights, safety, efficiency, comfort)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LqrGains, q_gap, q_speed, r, dt, u_min, u_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PidGains, kp, ki, kd, preview, max_rate, integral_limit)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ObservationParams, k_nearest, sigma_pos, sigma_vel, sentinel_x,
                                                same_lane_dy)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RewardWeights, w_s, w_e, w_d, w_r, w_col, w_ris, w_x, w_y, w_v, w_rf,
                                                w_re, w_ri, k_t, k_v, tau_min, d_target, v_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(HeuristicParams, ttc_threshold, risk_threshold, hold_time)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BaselineParams, siplc_fore, siplc_aft, suplc_fore, suplc_aft, spacing,
                                                trigger_ttc, trigger_risk, threat_window, threat_lateral_speed,
                                                settle_tolerance)

const char* policy_name(Policy p) {
  switch (p) {
    case Policy::kGrdf: return "grdf";
    case Policy::kGrdfGt: return "grdf-gt";
    case Policy::kSiplc: return "siplc";
    case Policy::kSuplc: return "suplc";
    case Policy::kRrl: return "rrl";
  }
  return "?";
}

Policy parse_policy(const std::string& s) {
  for (Policy p : {Policy::kGrdf, Policy::kGrdfGt, Policy::kSiplc, Policy::kSuplc, Policy::kRrl}) {
    if (s == policy_name(p)) return p;
  }
  throw std::invalid_argument("unknown policy: " + s);
}

bool uses_distribution_layer(Policy p) { return p == Policy::kGrdf || p == Policy::kGrdfGt || p == Policy::kRrl; }

void StackConfig::validate() const {
  risk.validate();
  game.validate();
  predict.validate();
  pdi.validate();
  lqr.validate();
  pid.validate();
  observation.validate();
  reward.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("stack: dt must be positive");
  if (!(vehicle_period >= dt) || !(platoon_period >= vehicle_period)) {
    throw std::invalid_argument("stack: decision periods must satisfy dt <= vehicle <= platoon");
  }
  if (std::abs(lqr.dt - dt) > 1e-12) throw std::invalid_argument("stack: LQR dt must equal the simulation dt");
  if (!(cruise_speed > 0.0) || !(platoon_gap > 0.0) || !(ttc_cap > 0.0)) {
    throw std::invalid_argument("stack: cruise speed, gap and TTC cap must be positive");
  }
  if (change_margin < 0.0 || change_closing_time < 0.0 || !(speed_step > 0.0) || change_patience < 0.0) {
    throw std::invalid_argument("stack: lane-change gap acceptance must be non-negative");
  }
}

json StackConfig::to_json() const {
  return {{"risk", risk},
          {"game", game},
          {"predict", predict},
          {"coalition", coalition},
          {"pdi", pdi},
          {"lattice", lattice},
          {"limits", limits},
          {"selection", selection},
          {"lqr", lqr},
          {"pid", pid},
          {"observation", observation},
          {"reward", reward},
          {"heuristic", heuristic},
          {"baseline", baseline},
          {"dt", dt},
          {"vehicle_period", vehicle_period},
          {"platoon_period", platoon_period},
          {"cruise_speed", cruise_speed},
          {"platoon_gap", platoon_gap},
          {"follow_headway", follow_headway},
          {"follow_min_gap", follow_min_gap},
          {"speed_gain", speed_gain},
          {"catch_up_margin", catch_up_margin},
          {"context_range", context_range},
          {"ttc_cap", ttc_cap},
          {"reorg_time_max", reorg_time_max},
          {"speed_step", speed_step},
          {"change_patience", change_patience},
          {"change_margin", change_margin},
          {"change_closing_time", change_closing_time}};
}

StackConfig StackConfig::from_json(const json& j) {
  StackConfig c;
  auto load = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  load("risk", c.risk);
  load("game", c.game);
  load("predict", c.predict);
  load("coalition", c.coalition);
  load("pdi", c.pdi);
  load("lattice", c.lattice);
  load("limits", c.limits);
  load("selection", c.selection);
  load("lqr", c.lqr);
  load("pid", c.pid);
  load("observation", c.observation);
  load("reward", c.reward);
  load("heuristic", c.heuristic);
  load("baseline", c.baseline);
  load("dt", c.dt);
  load("vehicle_period", c.vehicle_period);
  load("platoon_period", c.platoon_period);
  load("cruise_speed", c.cruise_speed);
  load("platoon_gap", c.platoon_gap);
  load("follow_headway", c.follow_headway);
  load("follow_min_gap", c.follow_min_gap);
  load("speed_gain", c.speed_gain);
  load("catch_up_margin", c.catch_up_margin);
  load("context_range", c.context_range);
  load("ttc_cap", c.ttc_cap);
  load("reorg_time_max", c.reorg_time_max);
  load("speed_step", c.speed_step);
  load("change_patience", c.change_patience);
  load("change_margin", c.change_margin);
  load("change_closing_time", c.change_closing_time);
  c.validate();
  return c;
}

struct Simulation::Actor {
  Driver driver;
  bool cav = false;
  // HDV lane change in progress.
  bool changing = false;
  double lc_y0 = 0.0, lc_y1 = 0.0, lc_t0 = 0.0, lc_duration = 1.0;
  double last_change_end = -1e9;
  // Scripted braking vehicle.
  bool scripted = false;
  bool brake_over = false;
  // CAV planning and control.
  PidSteering pid;
  std::optional<TrajectoryCandidate> traj;
  double traj_t0 = 0.0;
  int pending_lane = INT_MIN;
  double pending_time = 0.0;
};

struct Simulation::Tracker {
  double speed_sum = 0.0;
  long speed_n = 0;
  double min_ttc = kInf;
  double dist_sum = 0.0;
  long dist_n = 0;
  bool in_reorg = false;
  bool current_failed = false;
  double reorg_start = 0.0;
  double intact_since = -1.0;
  int reorganizations = 0;
  int failures = 0;
  std::vector<double> times;
  double reward = 0.0;
  int decisions = 0;
  int trajectories = 0;
  int checker_violations = 0;
  int boundary_violations = 0;
  int fallbacks = 0;
  bool collision = false;
  std::string error;
};

namespace {

bool near(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

// Start-state and terminal-state conditions of a selected trajectory.
bool boundary_ok(const TrajectoryCandidate& c, const VehicleState& ego) {
  const double T = c.duration;
  return near(c.lateral.p(0.0), ego.y) && near(c.lateral.v(0.0), ego.vy()) && near(c.lateral.a(0.0), 0.0) &&
         near(c.lateral.p(T), c.target_y) && near(c.lateral.v(T), 0.0) && near(c.lateral.a(T), 0.0) &&
         near(c.longitudinal.v(0.0), ego.vx()) && near(c.longitudinal.a(0.0), ego.accel) &&
         near(c.longitudinal.v(T), c.target_speed) && near(c.longitudinal.a(T), 0.0);
}

}  // namespace

Simulation::Simulation(const ScenarioSpec& spec, const StackConfig& cfg, Policy policy, std::uint64_t seed,
                       const PpoAgent* agent)
    : spec_(spec),
      cfg_(cfg),
      policy_(policy),
      seed_(seed),
      agent_(agent),
      rng_(seed * 0x9E3779B97F4A7C15ULL + 0x1234567ULL),
      obs_rng_(seed * 0xD1B54A32D192ED03ULL + 0x89ABCDEFULL),
      clock_(cfg.dt, cfg.vehicle_period, cfg.platoon_period),
      heuristic_(spec.platoon_size, cfg.heuristic),
      suplc_(cfg.baseline),
      lqr_(cfg.lqr),
      tracker_(std::make_unique<Tracker>()) {
  cfg_.validate();
  InitialWorld w = build_scenario(spec, seed);
  road_ = w.road;
  vehicles_ = w.vehicles;
  platoon_ids_ = w.platoon_ids;
  lead_ = w.lead;
  next_id_ = w.next_id;
  actors_.resize(vehicles_.size());
  for (size_t i = 0; i < vehicles_.size(); ++i) {
    actors_[i].driver = w.drivers[i];
    actors_[i].cav = vehicles_[i].kind == VehicleKind::kCav;
    actors_[i].pid = PidSteering(cfg_.pid);
    actors_[i].scripted = lead_ && vehicles_[i].id == lead_->id;
  }
  configs_ = enumerate_configurations(spec.platoon_size);
  config_ = configs_.front();
  if (agent_) {
    if (agent_->obs_dim() != observation_dim() || agent_->n_actions() != action_count()) {
      throw std::invalid_argument("checkpoint does not match the platoon size or observation layout");
    }
  }
  frames_ = {vehicles_, vehicles_, vehicles_};
}

Simulation::~Simulation() = default;

void Simulation::set_trace(std::ostream* out) {
  trace_ = out;
  if (trace_) *trace_ << "t,id,kind,x,y,v,a,jerk\n";
}

double Simulation::time() const { return clock_.time(); }

int Simulation::observation_dim() const { return observation_size(spec_.platoon_size, cfg_.observation); }

int Simulation::index_of(int id) const {
  for (size_t i = 0; i < vehicles_.size(); ++i) {
    if (vehicles_[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> Simulation::platoon_order() const {
  std::vector<int> idx;
  for (int id : platoon_ids_) idx.push_back(index_of(id));
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return vehicles_[static_cast<size_t>(a)].x > vehicles_[static_cast<size_t>(b)].x;
  });
  return idx;
}

std::vector<VehicleState> Simulation::platoon_front_to_back() const {
  std::vector<VehicleState> out;
  for (int i : platoon_order()) out.push_back(vehicles_[static_cast<size_t>(i)]);
  return out;
}

std::vector<VehicleState> Simulation::background_near() const {
  const auto order = platoon_order();
  const double front = vehicles_[static_cast<size_t>(order.front())].x;
  const double rear = vehicles_[static_cast<size_t>(order.back())].x;
  std::vector<VehicleState> out;
  for (size_t i = 0; i < vehicles_.size(); ++i) {
    if (actors_[i].cav) continue;
    const auto& v = vehicles_[i];
    if (v.x > rear - cfg_.context_range && v.x < front + cfg_.context_range) out.push_back(v);
  }
  return out;
}

double Simulation::member_ttc(size_t i) const {
  const auto& ego = vehicles_[i];
  const VehicleState* lead = nullptr;
  for (size_t k = 0; k < vehicles_.size(); ++k) {
    const auto& o = vehicles_[k];
    if (k == i || o.x <= ego.x || std::abs(o.y - ego.y) >= 2.5) continue;
    if (!lead || o.x < lead->x) lead = &o;
  }
  return lead ? compute_ttc(ego, *lead) : kInf;
}

std::vector<double> Simulation::features() {
  std::vector<int> ids;
  for (int i : platoon_order()) ids.push_back(vehicles_[static_cast<size_t>(i)].id);
  const Observation obs = observe(frames_, ids, cfg_.dt, cfg_.observation, obs_rng_);
  return observation_features(obs);
}

RiskSummary Simulation::risk_summary() const {
  RiskSummary s;
  const auto order = platoon_order();
  const auto bg = background_near();
  for (int i : order) {
    s.member_ttc.push_back(member_ttc(static_cast<size_t>(i)));
    s.member_risk.push_back(risk_reward(vehicles_[static_cast<size_t>(i)], bg, cfg_.risk));
  }
  s.leader_ttc = s.member_ttc.front();
  const auto& lead = vehicles_[static_cast<size_t>(order.front())];
  const int lane = road_.nearest_lane(lead.y);
  auto blocked = [&](int l) {
    if (!road_.is_main_lane(l)) return true;
    return !window_clear(road_, l, lead.x - 15.0, lead.x + 15.0, bg);
  };
  s.left_blocked = blocked(lane + 1);
  s.right_blocked = blocked(lane - 1);
  return s;
}

ConfigAction Simulation::decide_configuration() {
  if (agent_) {
    const auto a = agent_->act(features(), obs_rng_, true);
    return configs_[static_cast<size_t>(a.action)];
  }
  return heuristic_.decide(risk_summary(), time());
}

void Simulation::apply_configuration(const ConfigAction& c) {
  if (!c.single() && config_.single()) {
    ++n_trigger_;
    if (!reorg_active_) {
      reorg_active_ = true;
      reorg_since_ = time();
    }
  }
  ++n_step_;
  config_ = c;
  ++tracker_->decisions;
  audit({{"t", time()}, {"layer", "platoon"}, {"config", c.label()}});
}

void Simulation::audit(const json& j) {
  if (audit_) *audit_ << j.dump() << '\n';
}

EpisodeMetrics Simulation::run() {
  try {
    while (!done_) {
      if (uses_distribution_layer(policy_) && clock_.platoon_decision_due()) {
        apply_configuration(decide_configuration());
      }
      tick();
    }
  } catch (const std::exception& e) {
    tracker_->error = e.what();
    done_ = true;
  }
  return metrics();
}

StepOutcome Simulation::step_platoon(int action) {
  if (done_) throw std::logic_error("step_platoon: episode is over");
  if (action < 0 || action >= action_count()) throw std::invalid_argument("step_platoon: action out of range");
  apply_configuration(configs_[static_cast<size_t>(action)]);
  do {
    tick();
  } while (!done_ && !clock_.platoon_decision_due());

  RewardInputs in;
  in.collision = tracker_->collision;
  in.platoon = platoon_front_to_back();
  const auto& lead = in.platoon.front();
  for (size_t i = 0; i < vehicles_.size(); ++i) {
    if (!actors_[i].cav && std::abs(vehicles_[i].x - lead.x) < 100.0) in.others.push_back(vehicles_[i]);
  }
  in.n_trigger = n_trigger_;
  in.n_step = n_step_;
  in.reorg_elapsed = reorg_active_ ? time() - reorg_since_ : 0.0;
  in.reorg_time_max = cfg_.reorg_time_max;
  in.leader_ttc = member_ttc(static_cast<size_t>(platoon_order().front()));
  in.multi_group = !config_.single();
  StepOutcome out;
  out.breakdown = compute_reward(in, cfg_.reward, cfg_.risk);
  out.reward = out.breakdown.total;
  out.done = done_;
  tracker_->reward += out.reward;
  return out;
}

bool Simulation::plan_cav(size_t i, int dest_lane, bool starting_change) {
  auto& actor = actors_[i];
  const auto& ego = vehicles_[i];
  const double target_y = road_.lane_center(dest_lane);
  const double speed_ref = std::clamp(cfg_.cruise_speed, ego.speed - cfg_.speed_step, ego.speed + cfg_.speed_step);
  const auto cands = generate_lattice(ego, target_y, speed_ref, road_.speed_limit, cfg_.lattice);
  std::vector<VehicleState> obstacles, sources;
  const bool lateral_move = std::abs(ego.y - target_y) > 0.5;
  for (size_t k = 0; k < vehicles_.size(); ++k) {
    if (k == i) continue;
    const auto& o = vehicles_[k];
    if (std::abs(o.x - ego.x) > 100.0) continue;
    if (!actors_[k].cav) sources.push_back(o);
    if (lateral_move && occupies_lane(road_, o, dest_lane)) obstacles.push_back(o);
  }
  Selection sel = select_trajectory(cands, ego, obstacles, sources, road_, cfg_.limits, cfg_.risk, cfg_.selection,
                                    cfg_.lattice);
  if (starting_change && sel.index >= 0) {
    std::vector<VehicleState> outside;
    for (size_t k = 0; k < vehicles_.size(); ++k) {
      if (!actors_[k].cav && std::abs(vehicles_[k].x - ego.x) <= 100.0) outside.push_back(vehicles_[k]);
    }
    if (!gap_acceptable(road_, ego, dest_lane, outside, cfg_.change_margin, cfg_.change_closing_time)) sel.index = -1;
  }
  if (sel.index < 0) {
    if (starting_change) {
      plan_cav(i, ego.target_lane, false);
      return false;
    }
    const int here = road_.nearest_lane(ego.y);
    if (dest_lane != here && road_.is_main_lane(here)) {
      // A change that can no longer be completed is abandoned for the nearer lane.
      audit({{"t", time()}, {"layer", "plan"}, {"id", ego.id}, {"abort", dest_lane}});
      vehicles_[i].target_lane = here;
      return plan_cav(i, here, false);
    }
  }
  auto& t = *tracker_;
  ++t.trajectories;
  if (!check_dynamics(sel.trajectory, road_, ego.width, cfg_.limits).ok) ++t.checker_violations;
  if (!boundary_ok(sel.trajectory, ego)) ++t.boundary_violations;
  if (sel.index < 0) ++t.fallbacks;
  actor.traj = std::move(sel.trajectory);
  actor.traj_t0 = time();
  if (starting_change) {
    vehicles_[i].target_lane = dest_lane;
    audit({{"t", time()}, {"layer", "plan"}, {"id", ego.id}, {"lane_change", dest_lane}});
  }
  return true;
}

void Simulation::vehicle_layer() {
  const auto order = platoon_order();
  std::vector<VehicleState> platoon;
  for (int i : order) platoon.push_back(vehicles_[static_cast<size_t>(i)]);
  const auto bg = background_near();
  const double settle = cfg_.baseline.settle_tolerance;
  bool busy = false;
  for (int i : order) {
    const auto& v = vehicles_[static_cast<size_t>(i)];
    if (actors_[static_cast<size_t>(i)].pending_lane != INT_MIN) busy = true;
    if (std::abs(v.y - road_.lane_center(v.target_lane)) > settle) busy = true;
  }

  std::vector<LateralAction> actions(order.size(), LateralAction::kKeep);
  std::vector<int> rank(order.size(), 0);
  json note = {{"t", time()}, {"layer", "vehicle"}, {"policy", policy_name(policy_)}};
  switch (policy_) {
    case Policy::kGrdf:
    case Policy::kGrdfGt: {
      if (busy) break;
      const auto ctx = make_context(road_, platoon, bg, config_, policy_ == Policy::kGrdfGt, cfg_.coalition);
      const auto d = solve_tu_game(ctx, cfg_.game, cfg_.predict, cfg_.risk, cfg_.pdi);
      actions = d.member_actions;
      std::vector<int> acting(static_cast<size_t>(ctx.players), 0);
      for (size_t k = 0; k < actions.size(); ++k) {
        if (actions[k] == LateralAction::kKeep) continue;
        rank[k] = acting[static_cast<size_t>(ctx.player_of[k])]++;
      }
      note["phase"] = phase_name(ctx.phase);
      note["players"] = ctx.players;
      note["value"] = d.evaluation.total;
      note["pdi"] = d.evaluation.pdi;
      break;
    }
    case Policy::kRrl: {
      const auto threat = assess_threat(platoon, bg, road_, cfg_.risk, cfg_.baseline);
      actions = rrl_step(platoon, bg, road_, config_, threat, cfg_.baseline);
      std::vector<int> acting(config_.groups.size(), 0);
      for (size_t k = 0; k < actions.size(); ++k) {
        if (actions[k] == LateralAction::kKeep) continue;
        rank[k] = acting[static_cast<size_t>(config_.group_of(static_cast<int>(k)))]++;
      }
      break;
    }
    case Policy::kSiplc: {
      if (busy) break;
      const auto threat = assess_threat(platoon, bg, road_, cfg_.risk, cfg_.baseline);
      actions = siplc_step(platoon, bg, road_, threat, cfg_.baseline);
      break;
    }
    case Policy::kSuplc: {
      const auto threat = assess_threat(platoon, bg, road_, cfg_.risk, cfg_.baseline);
      actions = suplc_.step(platoon, bg, road_, threat);
      break;
    }
  }

  json acts = json::array();
  for (size_t k = 0; k < order.size(); ++k) {
    acts.push_back(action_name(actions[k]));
    if (actions[k] == LateralAction::kKeep) continue;
    auto& a = actors_[static_cast<size_t>(order[k])];
    const auto& v = vehicles_[static_cast<size_t>(order[k])];
    const int base = road_.is_main_lane(v.target_lane) ? v.target_lane : road_.nearest_lane(v.y);
    const int dest = base + lane_delta(actions[k]);
    if (!road_.is_main_lane(dest)) continue;
    a.pending_lane = dest;
    a.pending_time = time() + cfg_.predict.stagger * rank[k];
  }
  note["actions"] = acts;
  audit(note);

  for (int i : order) {
    const auto& a = actors_[static_cast<size_t>(i)];
    const auto& v = vehicles_[static_cast<size_t>(i)];
    if (a.pending_lane != INT_MIN) continue;
    // A lane change in progress keeps its trajectory until it ends.
    const bool changing = a.traj && !a.traj->fallback && time() - a.traj_t0 < a.traj->duration &&
                          std::abs(a.traj->target_y - road_.lane_center(v.target_lane)) < 1e-9 &&
                          std::abs(v.y - a.traj->target_y) > settle;
    if (!changing) plan_cav(static_cast<size_t>(i), v.target_lane, false);
  }
}

void Simulation::start_pending_changes() {
  for (size_t i = 0; i < vehicles_.size(); ++i) {
    auto& a = actors_[i];
    if (!a.cav || a.pending_lane == INT_MIN || a.pending_time > time() + 1e-9) continue;
    const int dest = a.pending_lane;
    a.pending_lane = INT_MIN;
    if (plan_cav(i, dest, true)) continue;
    // No acceptable gap yet: keep waiting for one, up to the patience limit.
    if (time() - a.pending_time < cfg_.change_patience - 1e-9) {
      a.pending_lane = dest;
    } else {
      audit({{"t", time()}, {"layer", "plan"}, {"id", vehicles_[i].id}, {"cancel", dest}});
    }
  }
}

void Simulation::hdv_lane_decisions() {
  const LaneIndex idx(road_, vehicles_);
  const double t = time();
  auto context = [&](int lane, const VehicleState& ego, int self) {
    LaneContext c;
    if (auto l = idx.leader(lane, ego.x, self)) {
      const auto& o = vehicles_[static_cast<size_t>(*l)];
      c.leader = Neighbor{o.rear() - ego.front(), o.vx()};
    }
    if (auto f = idx.follower(lane, ego.x, self)) {
      const auto& o = vehicles_[static_cast<size_t>(*f)];
      c.follower = Neighbor{ego.rear() - o.front(), o.vx()};
    }
    return c;
  };
  for (size_t i = 0; i < vehicles_.size(); ++i) {
    auto& a = actors_[i];
    if (a.cav || a.scripted || a.changing || t - a.last_change_end < 3.0) continue;
    auto& v = vehicles_[i];
    const int lane = road_.nearest_lane(v.y);
    std::vector<std::pair<int, double>> options;
    if (lane == kRampLane) {
      const auto& r = *road_.ramp;
      const double progress = std::clamp((v.x - r.start) / std::max(1.0, r.end - r.start), 0.0, 1.0);
      options.push_back({0, 1.0 + 4.0 * progress});
    } else {
      if (road_.is_main_lane(lane + 1)) options.push_back({lane + 1, 0.0});
      if (road_.is_main_lane(lane - 1)) options.push_back({lane - 1, 0.0});
    }
    const EgoContext ego{v.speed, v.length};
    const auto cur = context(lane, v, static_cast<int>(i));
    for (const auto& [target, bias] : options) {
      const auto tgt = context(target, v, static_cast<int>(i));
      if (mobil_decide(ego, cur, tgt, a.driver.idm, a.driver.mobil, bias) == LaneDecision::kChange) {
        a.changing = true;
        a.lc_y0 = v.y;
        a.lc_y1 = road_.lane_center(target);
        a.lc_t0 = t;
        a.lc_duration = a.driver.lane_change_duration;
        v.target_lane = target;
        break;
      }
    }
  }
}

double Simulation::hdv_accel(size_t i, const LaneIndex& idx) const {
  const auto& v = vehicles_[i];
  const auto& a = actors_[i];
  IdmParams idm = a.driver.idm;
  if (a.scripted && lead_ && a.brake_over) idm.desired_speed = lead_->event.floor_speed;
  double best = kInf;
  std::optional<int> lead;
  for (int lane : {road_.nearest_lane(v.y), v.target_lane}) {
    if (auto l = idx.leader(lane, v.x, static_cast<int>(i))) {
      if (!lead || vehicles_[static_cast<size_t>(*l)].x < vehicles_[static_cast<size_t>(*lead)].x) lead = l;
    }
  }
  double acc;
  if (lead) {
    const auto& o = vehicles_[static_cast<size_t>(*lead)];
    const auto r = idm_acceleration(v.speed, o.rear() - v.front(), v.speed - o.vx(), idm);
    acc = r.gap_error ? -kEmergencyDecel : r.accel;
  } else {
    acc = idm_acceleration(v.speed, kInf, 0.0, idm).accel;
  }
  best = acc;
  if (road_.ramp && road_.nearest_lane(v.y) == kRampLane && !a.changing) {
    const auto r = idm_acceleration(v.speed, road_.ramp->end - v.front(), v.speed, idm);
    best = std::min(best, r.gap_error ? -kEmergencyDecel : r.accel);
  }
  if (a.scripted && lead_ && !a.brake_over) {
    const double t = time();
    if (t >= lead_->brake_time) best = std::min(best, -lead_->event.decel);
  }
  return std::max(best, -kEmergencyDecel);
}

double Simulation::cav_accel(size_t i, const LaneIndex& idx, const std::vector<int>& order) const {
  const auto& ego = vehicles_[i];
  const auto& actor = actors_[i];
  const int pos = static_cast<int>(std::find(order.begin(), order.end(), static_cast<int>(i)) - order.begin());
  std::optional<int> lead;
  for (int lane : {road_.nearest_lane(ego.y), ego.target_lane}) {
    if (auto l = idx.leader(lane, ego.x, static_cast<int>(i))) {
      if (!lead || vehicles_[static_cast<size_t>(*l)].x < vehicles_[static_cast<size_t>(*lead)].x) lead = l;
    }
  }
  double u = kInf;
  if (lead && vehicles_[static_cast<size_t>(*lead)].x - ego.x < cfg_.context_range) {
    const auto& o = vehicles_[static_cast<size_t>(*lead)];
    const bool member = actors_[static_cast<size_t>(*lead)].cav;
    const double gap_ref = member ? cfg_.platoon_gap
                                  : cfg_.follow_min_gap + 0.5 * (o.length + ego.length) +
                                        ego.speed * cfg_.follow_headway;
    u = lqr_.command(o.x - ego.x - gap_ref, o.vx() - ego.vx(), member ? o.accel : 0.0);
  }
  if (config_.single() && pos > 0) {
    const int p = order[static_cast<size_t>(pos - 1)];
    const auto& pred = vehicles_[static_cast<size_t>(p)];
    const bool same = lead && *lead == p;
    if (!same && std::abs(pred.x - ego.x) < 60.0 && std::abs(pred.y - ego.y) >= 2.5) {
      u = std::min(u, lqr_.command(pred.x - ego.x - cfg_.platoon_gap, pred.vx() - ego.vx(), pred.accel));
    }
  }
  double v_ref = cfg_.cruise_speed + cfg_.catch_up_margin;
  if (actor.traj) {
    const double tau = time() - actor.traj_t0;
    if (pos == 0 || actor.traj->fallback) v_ref = std::min(v_ref, actor.traj->longitudinal.v(tau));
  }
  u = std::min(u, cfg_.speed_gain * (v_ref - ego.speed));
  return std::clamp(u, cfg_.lqr.u_min, cfg_.lqr.u_max);
}

void Simulation::integrate(const std::vector<double>& accel, const std::vector<double>& yaw_rate) {
  const double dt = cfg_.dt;
  const double t_next = time() + dt;
  for (size_t i = 0; i < vehicles_.size(); ++i) {
    auto& v = vehicles_[i];
    auto& a = actors_[i];
    const double speed = std::max(0.0, v.speed + accel[i] * dt);
    if (a.cav) {
      const double heading = std::clamp(v.heading + yaw_rate[i] * dt, -0.25, 0.25);
      v = step_kinematics(v, speed, heading, dt);
      v.lane = road_.nearest_lane(v.y);
    } else {
      VehicleState next = step_kinematics(v, speed, 0.0, dt);
      if (a.changing) {
        const double s = std::clamp((t_next - a.lc_t0) / a.lc_duration, 0.0, 1.0);
        const double pi = std::acos(-1.0);
        next.y = a.lc_y0 + (a.lc_y1 - a.lc_y0) * 0.5 * (1.0 - std::cos(pi * s));
        const double vy = (a.lc_y1 - a.lc_y0) * 0.5 * pi / a.lc_duration * std::sin(pi * s);
        next.heading = std::atan2(vy, std::max(speed, 0.1));
        if (s >= 1.0) {
          a.changing = false;
          a.last_change_end = t_next;
          next.y = a.lc_y1;
          next.heading = 0.0;
        }
      }
      next.lane = road_.nearest_lane(next.y);
      if (!a.changing) next.target_lane = next.lane;
      v = next;
      if (a.scripted && lead_ && !a.brake_over && t_next >= lead_->brake_time &&
          (v.speed <= lead_->event.floor_speed || t_next >= lead_->brake_time + lead_->event.duration)) {
        a.brake_over = true;
      }
    }
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.speed)) {
      throw std::runtime_error("non-finite vehicle state");
    }
  }
}

void Simulation::handle_collisions() {
  std::vector<int> order(vehicles_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return vehicles_[static_cast<size_t>(a)].x < vehicles_[static_cast<size_t>(b)].x; });
  std::vector<bool> remove(vehicles_.size(), false);
  for (size_t a = 0; a < order.size(); ++a) {
    const auto& va = vehicles_[static_cast<size_t>(order[a])];
    for (size_t b = a + 1; b < order.size(); ++b) {
      const auto& vb = vehicles_[static_cast<size_t>(order[b])];
      if (vb.x - va.x > 0.5 * (va.length + vb.length) + 1.0) break;
      if (std::abs(vb.y - va.y) > 0.5 * (va.length + vb.length)) continue;
      if (!check_collision(va, vb)) continue;
      const bool pa = actors_[static_cast<size_t>(order[a])].cav;
      const bool pb = actors_[static_cast<size_t>(order[b])].cav;
      if (pa || pb) {
        tracker_->collision = true;
        done_ = true;
        audit({{"t", time()}, {"event", "collision"}, {"a", va.id}, {"b", vb.id}});
        return;
      }
      remove[static_cast<size_t>(order[a])] = true;
      remove[static_cast<size_t>(order[b])] = true;
    }
  }
  for (size_t i = 0; i < vehicles_.size(); ++i) {
    if (!actors_[i].cav && vehicles_[i].front() > road_.length) remove[i] = true;
  }
  size_t w = 0;
  for (size_t i = 0; i < vehicles_.size(); ++i) {
    if (remove[i]) continue;
    if (w != i) {
      vehicles_[w] = std::move(vehicles_[i]);
      actors_[w] = std::move(actors_[i]);
    }
    ++w;
  }
  vehicles_.resize(w);
  actors_.resize(w);
}

void Simulation::spawn_ramp() {
  if (!road_.ramp || spec_.ramp_rate <= 0.0) return;
  std::bernoulli_distribution arrive(std::min(1.0, spec_.ramp_rate * cfg_.dt));
  if (!arrive(rng_)) return;
  const double x = road_.ramp->start + 5.0;
  for (const auto& v : vehicles_) {
    if (road_.nearest_lane(v.y) == kRampLane && std::abs(v.x - x) < 30.0) return;
  }
  const auto style = sample_style(spec_.traffic.style_mix, rng_);
  VehicleState v;
  v.id = next_id_++;
  v.kind = VehicleKind::kHdv;
  v.x = x;
  v.y = road_.lane_center(kRampLane);
  v.speed = spec_.ramp_speed;
  v.lane = kRampLane;
  v.target_lane = kRampLane;
  Actor a;
  a.driver = style_preset(style, spec_.traffic.nominal_speed);
  vehicles_.push_back(v);
  actors_.push_back(std::move(a));
}

void Simulation::update_metrics() {
  auto& t = *tracker_;
  const auto order = platoon_order();
  for (size_t k = 0; k < order.size(); ++k) {
    const auto& v = vehicles_[static_cast<size_t>(order[k])];
    t.speed_sum += v.speed;
    ++t.speed_n;
    t.min_ttc = std::min(t.min_ttc, member_ttc(static_cast<size_t>(order[k])));
    if (k > 0) {
      t.dist_sum += vehicles_[static_cast<size_t>(order[k - 1])].x - v.x;
      ++t.dist_n;
    }
  }
  if (trace_ && !order.empty()) {
    // Members, then every other vehicle within the context range of the leader.
    const double x0 = vehicles_[static_cast<size_t>(order.front())].x;
    for (const auto& v : vehicles_) {
      const bool member = v.kind == VehicleKind::kCav;
      if (!member && std::abs(v.x - x0) > cfg_.context_range) continue;
      *trace_ << time() << ',' << v.id << ',' << (member ? "cav" : "hdv") << ',' << v.x << ',' << v.y << ','
              << v.speed << ',' << v.accel << ',' << v.jerk << '\n';
    }
  }
  std::vector<VehicleState> platoon;
  for (int i : order) platoon.push_back(vehicles_[static_cast<size_t>(i)]);
  const bool intact = form_coalitions(platoon, background_near(), cfg_.coalition).coalitions.size() == 1;
  const double now = time();
  if (reorg_active_ && intact && config_.single()) reorg_active_ = false;
  const double window = spec_.success_fraction * spec_.episode_length;
  if (!t.in_reorg && !intact) {
    t.in_reorg = true;
    t.current_failed = false;
    t.reorg_start = now;
    t.intact_since = -1.0;
    ++t.reorganizations;
    audit({{"t", now}, {"event", "reorganization_start"}});
  }
  if (t.in_reorg) {
    if (intact) {
      if (t.intact_since < 0.0) t.intact_since = now;
      if (now - t.intact_since >= spec_.debounce - 1e-9) {
        const double took = t.intact_since - t.reorg_start;
        if (!t.current_failed && took <= window + 1e-9) t.times.push_back(took);
        t.in_reorg = false;
        audit({{"t", now}, {"event", "formation_restored"}, {"took", took}});
      }
    } else {
      t.intact_since = -1.0;
    }
    if (t.in_reorg && !t.current_failed && now - t.reorg_start > window + spec_.debounce) {
      t.current_failed = true;
      ++t.failures;
    }
  }
}

void Simulation::tick() {
  if (done_) return;
  if (clock_.vehicle_decision_due()) {
    hdv_lane_decisions();
    vehicle_layer();
  }
  start_pending_changes();

  const LaneIndex idx(road_, vehicles_);
  const auto order = platoon_order();
  std::vector<double> accel(vehicles_.size(), 0.0), yaw(vehicles_.size(), 0.0);
  for (size_t i = 0; i < vehicles_.size(); ++i) {
    if (actors_[i].cav) {
      accel[i] = cav_accel(i, idx, order);
      auto& a = actors_[i];
      const auto& v = vehicles_[i];
      const double tau = time() - a.traj_t0;
      const double y_ref = a.traj ? a.traj->lateral.p(tau) : road_.lane_center(v.target_lane);
      const double vy_ref = a.traj ? a.traj->lateral.v(tau) : 0.0;
      yaw[i] = a.pid.command(v.y, v.heading, v.speed, y_ref, vy_ref, cfg_.dt);
    } else {
      accel[i] = hdv_accel(i, idx);
    }
  }
  integrate(accel, yaw);
  clock_.tick();
  handle_collisions();
  if (!done_) spawn_ramp();
  frames_[2] = std::move(frames_[1]);
  frames_[1] = std::move(frames_[0]);
  frames_[0] = vehicles_;
  update_metrics();
  const double lead_x = vehicles_[static_cast<size_t>(platoon_order().front())].x;
  if (time() >= spec_.episode_length - 1e-9 || lead_x > road_.length - 50.0) done_ = true;
}

EpisodeMetrics Simulation::metrics() const {
  const auto& t = *tracker_;
  EpisodeMetrics m;
  m.seed = seed_;
  m.collision = t.collision;
  m.avg_speed = t.speed_n ? t.speed_sum / static_cast<double>(t.speed_n) : 0.0;
  m.min_ttc = std::min(t.min_ttc, cfg_.ttc_cap);
  m.avg_distance = t.dist_n ? t.dist_sum / static_cast<double>(t.dist_n) : 0.0;
  int failures = t.failures;
  // An open reorganization fails when the platoon crashed or its window has passed.
  if (t.in_reorg && !t.current_failed &&
      (t.collision || time() - t.reorg_start > spec_.success_fraction * spec_.episode_length)) {
    ++failures;
  }
  m.formation_success = failures == 0;
  m.formation_time = std::nan("");
  if (m.formation_success && !t.times.empty()) {
    m.formation_time = std::accumulate(t.times.begin(), t.times.end(), 0.0) / static_cast<double>(t.times.size());
  }
  m.reorganizations = t.reorganizations;
  m.duration = time();
  m.episode_reward = t.reward;
  m.decisions = t.decisions;
  m.trajectories = t.trajectories;
  m.checker_violations = t.checker_violations;
  m.boundary_violations = t.boundary_violations;
  m.fallbacks = t.fallbacks;
  m.error = t.error;
  return m;
}

EpisodeMetrics run_episode(const ScenarioSpec& spec, const StackConfig& cfg, Policy policy, std::uint64_t seed,
                           const PpoAgent* agent, std::ostream* audit, std::ostream* trace) {
  try {
    Simulation sim(spec, cfg, policy, seed, agent);
    sim.set_audit(audit);
    sim.set_trace(trace);
    return sim.run();
  } catch (const std::exception& e) {
    EpisodeMetrics m;
    m.seed = seed;
    m.error = e.what();
    m.formation_success = false;
    m.formation_time = std::nan("");
    return m;
  }
}

}  // namespace platoon
