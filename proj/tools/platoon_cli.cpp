#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon/experiment.hpp"
#include "platoon/io.hpp"
#include "platoon/pdi.hpp"
#include "platoon/risk_field.hpp"
#include "platoon/scenario.hpp"
#include "platoon/simulation.hpp"
#include "platoon/training.hpp"

using namespace platoon;

namespace {

enum Exit { kOk = 0, kUsage = 2, kConfig = 3, kIo = 4, kRuntime = 5 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --config wins over PLATOON_CONFIG; neither means defaults.
StackConfig load_stack(const std::string& path) {
  std::string p = path;
  if (p.empty()) {
    if (const char* env = std::getenv("PLATOON_CONFIG")) p = env;
  }
  if (p.empty()) return StackConfig{};
  try {
    return StackConfig::from_json(read_json(p));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ScenarioSpec load_scenario(const std::string& path, int case_id) {
  try {
    if (path.empty()) return default_scenario(case_id);
    auto j = read_json(path);
    if (!j.contains("case")) j["case"] = case_id;
    return ScenarioSpec::from_json(j);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

std::optional<PpoAgent> load_agent(const std::string& path) {
  if (path.empty()) return std::nullopt;
  try {
    return PpoAgent::from_json(read_json(path));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

std::vector<VehicleState> vehicles_from_json(const nlohmann::json& arr, VehicleKind kind) {
  std::vector<VehicleState> out;
  int id = kind == VehicleKind::kCav ? 0 : 1000;
  for (const auto& v : arr) {
    VehicleState s;
    s.id = v.value("id", id++);
    s.kind = kind;
    s.x = v.at("x").get<double>();
    s.y = v.at("y").get<double>();
    s.speed = v.value("speed", 0.0);
    s.heading = v.value("heading", 0.0);
    s.length = v.value("length", 5.0);
    s.width = v.value("width", 2.0);
    out.push_back(s);
  }
  return out;
}

struct Scene {
  RoadMap road;
  std::vector<VehicleState> platoon;
  std::vector<VehicleState> background;
};

// Either an explicit scene file or the initial world of a case and seed.
Scene load_scene(const std::string& path, int case_id, std::uint64_t seed) {
  Scene s;
  if (!path.empty()) {
    try {
      const auto j = read_json(path);
      s.road = j.contains("road") ? road_from_json(j["road"]) : RoadMap{};
      s.platoon = vehicles_from_json(j.at("platoon"), VehicleKind::kCav);
      s.background = vehicles_from_json(j.value("background", nlohmann::json::array()), VehicleKind::kHdv);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("scene: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("scene: ") + e.what());
    }
    for (auto& v : s.platoon) v.lane = v.target_lane = s.road.nearest_lane(v.y);
    for (auto& v : s.background) v.lane = v.target_lane = s.road.nearest_lane(v.y);
    return s;
  }
  const auto w = build_scenario(default_scenario(case_id), seed);
  s.road = w.road;
  for (const auto& v : w.vehicles) (v.kind == VehicleKind::kCav ? s.platoon : s.background).push_back(v);
  return s;
}

int cmd_run(int case_id, const std::string& policy, int seeds, std::uint64_t seed_base, double episode_len,
            const std::string& out, const std::string& checkpoint, const std::string& config,
            const std::string& scenario_path, int workers, const std::string& audit_path,
            const std::string& trace_path) {
  ScenarioSpec spec = load_scenario(scenario_path, case_id);
  if (episode_len > 0.0) spec.episode_length = episode_len;
  const StackConfig cfg = load_stack(config);
  const Policy p = parse_policy(policy);
  const auto agent = load_agent(checkpoint);
  const PpoAgent* ap = agent ? &*agent : nullptr;
  if (!audit_path.empty()) {
    std::ostringstream log;
    for (int s = 0; s < seeds; ++s) {
      log << nlohmann::json({{"episode", seed_base + static_cast<std::uint64_t>(s)}}).dump() << '\n';
      run_episode(spec, cfg, p, seed_base + static_cast<std::uint64_t>(s), uses_distribution_layer(p) ? ap : nullptr,
                  &log);
    }
    write_text(audit_path, log.str());
  }
  if (!trace_path.empty()) {
    std::ostringstream trace;
    run_episode(spec, cfg, p, seed_base, uses_distribution_layer(p) ? ap : nullptr, nullptr, &trace);
    write_text(trace_path, trace.str());
  }
  const auto res = run_experiment(spec, cfg, {p}, seeds, seed_base, ap, workers);
  write_experiment(res, out);
  write_json(out + "/config.json", {{"scenario", spec.to_json()}, {"stack", cfg.to_json()},
                                    {"policy", policy}, {"checkpoint", checkpoint}});
  std::cout << to_csv(aggregates_table(res.aggregates));
  int failed = 0;
  for (const auto& r : res.rows) failed += r.metrics.error.empty() ? 0 : 1;
  if (failed) std::cerr << failed << " episode(s) aborted; see the error column\n";
  return kOk;
}

int cmd_eval(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<EpisodeRow> rows;
  for (const auto& in : inputs) {
    std::string path = in;
    if (path.size() < 4 || path.substr(path.size() - 4) != ".csv") path += "/episodes.csv";
    auto part = rows_from_table(parse_csv(read_text(path)));
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto aggs = aggregate_all(rows);
  const std::string csv = to_csv(aggregates_table(aggs));
  if (!out.empty()) write_text(out, csv);
  std::cout << csv;
  return kOk;
}

int cmd_train(long steps, std::uint64_t seed, const std::string& scenario_path, const std::string& checkpoint,
              const std::string& curve_path, const std::string& config, const std::string& policy) {
  ScenarioSpec spec = scenario_path.empty() ? training_scenario() : load_scenario(scenario_path, 2);
  const StackConfig cfg = load_stack(config);
  TrainingConfig tc;
  tc.total_steps = steps;
  tc.seed = seed;
  tc.vehicle_layer = parse_policy(policy);
  std::ostringstream curve;
  const auto res = train_policy(spec, cfg, tc, &curve);
  auto j = res.agent.to_json();
  j["config_hash"] = content_hash(spec.to_json().dump() + cfg.to_json().dump());
  j["training"] = {{"steps", steps}, {"seed", seed}, {"episodes", res.episodes.size()}};
  write_json(checkpoint, j);
  if (!curve_path.empty()) write_text(curve_path, curve.str());
  std::cout << "episodes " << res.episodes.size() << "\n"
            << "first_10pct_reward " << fmt(head_mean(res.episodes, 0.1)) << "\n"
            << "last_10pct_reward " << fmt(tail_mean(res.episodes, 0.1)) << "\n"
            << "skipped_minibatches " << res.skipped_minibatches << "\n";
  return kOk;
}

int cmd_pdi(const std::string& scene_path, int case_id, std::uint64_t seed, const std::string& config) {
  const StackConfig cfg = load_stack(config);
  const Scene s = load_scene(scene_path, case_id, seed);
  const auto g = build_node_graph(s.road, s.platoon, s.background, cfg.pdi);
  const auto r = compute_pdi(g);
  const auto o = dijkstra_oracle(g);
  nlohmann::json path = nlohmann::json::array();
  for (int id : r.path) {
    const auto& n = g.nodes[static_cast<size_t>(id)];
    path.push_back({{"id", id}, {"lane", n.lane}, {"x", n.x}});
  }
  nlohmann::json j = {{"feasible", r.feasible}, {"pdi", r.value},      {"oracle", o.value},
                      {"nodes", g.nodes.size()}, {"edges", g.edges.size()}, {"branch_nodes", r.branch_nodes},
                      {"path", path}};
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_riskmap(const std::string& scene_path, int case_id, std::uint64_t seed, double x_min, double x_max,
                double resolution, const std::string& out, const std::string& config) {
  const StackConfig cfg = load_stack(config);
  const Scene s = load_scene(scene_path, case_id, seed);
  std::vector<VehicleState> all = s.platoon;
  all.insert(all.end(), s.background.begin(), s.background.end());
  if (!(x_max > x_min)) {
    double lo = s.platoon.front().x, hi = lo;
    for (const auto& v : s.platoon) {
      lo = std::min(lo, v.x);
      hi = std::max(hi, v.x);
    }
    x_min = lo - 60.0;
    x_max = hi + 60.0;
  }
  const auto grid = risk_grid(all, s.road, x_min, x_max, resolution, cfg.risk);
  std::ostringstream csv;
  csv << "x,y,value\n";
  for (size_t iy = 0; iy < grid.ys.size(); ++iy) {
    for (size_t ix = 0; ix < grid.xs.size(); ++ix) {
      csv << fmt(grid.xs[ix]) << ',' << fmt(grid.ys[iy]) << ',' << fmt(grid.at(ix, iy)) << '\n';
    }
  }
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(out, csv.str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Platoon reorganization simulator"};
  app.require_subcommand(1);
  std::string config;
  app.add_option("--config", config, "Stack configuration JSON (overrides PLATOON_CONFIG)");

  auto* run = app.add_subcommand("run", "Run seeded episodes and write CSV/JSON results");
  int case_id = 1, seeds = 1, workers = 1;
  std::uint64_t seed_base = 0;
  double episode_len = 0.0;
  std::string policy = "grdf", out = "out", checkpoint, scenario, audit, trace;
  run->add_option("--case", case_id, "Case study")->check(CLI::IsMember({1, 2}));
  run->add_option("--policy", policy, "Policy")->check(CLI::IsMember({"grdf", "grdf-gt", "siplc", "suplc", "rrl"}));
  run->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);
  run->add_option("--seed-base", seed_base, "First seed");
  run->add_option("--episode-len", episode_len, "Episode length in seconds (default from scenario)");
  run->add_option("--out", out, "Output directory");
  run->add_option("--checkpoint", checkpoint, "Distribution-layer checkpoint (heuristic when absent)");
  run->add_option("--scenario", scenario, "Scenario JSON");
  run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--audit", audit, "Write decision logs (JSON lines) here");
  run->add_option("--trace", trace, "Write the platoon trajectory CSV (t, id, x, y, v, a, jerk) of the first seed");

  auto* eval = app.add_subcommand("eval", "Aggregate existing episode CSVs");
  std::vector<std::string> inputs;
  std::string eval_out;
  eval->add_option("inputs", inputs, "Run directories or episodes.csv files")->required();
  eval->add_option("--out", eval_out, "Write the aggregate CSV here");

  auto* train = app.add_subcommand("train", "Train the distribution layer with PPO");
  long steps = 50000;
  std::uint64_t train_seed = 0;
  std::string train_scenario, train_ckpt = "checkpoint.json", curve, train_policy_name = "grdf";
  train->add_option("--steps", steps, "Distribution-layer decisions")->check(CLI::PositiveNumber);
  train->add_option("--seed", train_seed, "Training seed");
  train->add_option("--scenario", train_scenario, "Scenario JSON (default: simplified case 2)");
  train->add_option("--checkpoint", train_ckpt, "Checkpoint output path");
  train->add_option("--curve", curve, "Training curve CSV output path");
  train->add_option("--vehicle-layer", train_policy_name, "Vehicle layer used while training")
      ->check(CLI::IsMember({"grdf", "grdf-gt", "rrl"}));

  auto* pdi = app.add_subcommand("pdi", "Platoon disposition index of a scene");
  auto* riskmap = app.add_subcommand("riskmap", "Sample the risk field of a scene to CSV");
  std::string scene, risk_out;
  int scene_case = 1;
  std::uint64_t scene_seed = 0;
  double x_min = 0.0, x_max = 0.0, resolution = 1.0;
  for (auto* sc : {pdi, riskmap}) {
    sc->add_option("--scene", scene, "Scene JSON with road, platoon and background");
    sc->add_option("--case", scene_case, "Use the initial world of this case")->check(CLI::IsMember({1, 2}));
    sc->add_option("--seed", scene_seed, "Seed for the initial world");
  }
  riskmap->add_option("--x-min", x_min, "Grid start");
  riskmap->add_option("--x-max", x_max, "Grid end");
  riskmap->add_option("--resolution", resolution, "Grid spacing in meters")->check(CLI::PositiveNumber);
  riskmap->add_option("--out", risk_out, "CSV output path (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(case_id, policy, seeds, seed_base, episode_len, out, checkpoint, config, scenario, workers, audit,
                                trace);
    if (*eval) return cmd_eval(inputs, eval_out);
    if (*train) return cmd_train(steps, train_seed, train_scenario, train_ckpt, curve, config, train_policy_name);
    if (*pdi) return cmd_pdi(scene, scene_case, scene_seed, config);
    if (*riskmap) return cmd_riskmap(scene, scene_case, scene_seed, x_min, x_max, resolution, risk_out, config);
  } catch (const ConfigError& e) {
    std::cerr << "error [config]: " << e.what() << "\n";
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error [config]: " << e.what() << "\n";
    return kConfig;
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    const bool io = msg.rfind("cannot ", 0) == 0 || msg.rfind("write failed", 0) == 0 || msg.rfind("malformed", 0) == 0;
    std::cerr << "error [" << (io ? "io" : "runtime") << "]: " << msg << "\n";
    return io ? kIo : kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error [runtime]: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
