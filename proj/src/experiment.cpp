#include "platoon/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace platoon {

using nlohmann::json;

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double parse_number(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  return std::stod(s);
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Aggregate aggregate(const std::vector<EpisodeRow>& rows) {
  Aggregate a;
  if (!rows.empty()) {
    a.case_id = rows.front().case_id;
    a.policy = rows.front().policy;
  }
  a.episodes = static_cast<int>(rows.size());
  std::vector<double> ttc, speed, dist, ftime, reorg;
  int collisions = 0, success = 0;
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    if (!m.error.empty()) continue;
    ++a.completed;
    if (m.collision) ++collisions;
    if (m.formation_success) ++success;
    ttc.push_back(m.min_ttc);
    speed.push_back(m.avg_speed);
    if (!m.collision) dist.push_back(m.avg_distance);
    if (std::isfinite(m.formation_time)) ftime.push_back(m.formation_time);
    reorg.push_back(m.reorganizations);
  }
  const double n = std::max(1, a.completed);
  a.collision_rate = collisions / n;
  a.formation_success_rate = success / n;
  a.min_ttc_mean = mean(ttc);
  a.min_ttc_q25 = quantile(ttc, 0.25);
  a.min_ttc_median = quantile(ttc, 0.5);
  a.min_ttc_q75 = quantile(ttc, 0.75);
  a.avg_speed_mean = mean(speed);
  a.avg_distance_mean = mean(dist);
  a.collision_free = static_cast<int>(dist.size());
  a.formation_time_mean = mean(ftime);
  a.formation_time_count = static_cast<int>(ftime.size());
  a.reorganizations_mean = mean(reorg);
  return a;
}

std::vector<Aggregate> aggregate_all(const std::vector<EpisodeRow>& rows) {
  std::vector<std::pair<int, std::string>> keys;
  std::map<std::pair<int, std::string>, std::vector<EpisodeRow>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.case_id, r.policy);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].push_back(r);
  }
  std::vector<Aggregate> out;
  for (const auto& k : keys) out.push_back(aggregate(groups[k]));
  return out;
}

CsvTable episodes_table(const std::vector<EpisodeRow>& rows) {
  CsvTable t;
  t.header = {"case",          "policy",         "seed",           "collision",      "avg_speed",
              "min_ttc",       "avg_distance",   "formation_success", "formation_time", "reorganizations",
              "duration",      "episode_reward", "decisions",      "trajectories",   "checker_violations",
              "boundary_violations", "fallbacks", "error"};
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    std::string err = m.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    t.rows.push_back({std::to_string(r.case_id), r.policy, std::to_string(m.seed), m.collision ? "1" : "0",
                      fmt(m.avg_speed), fmt(m.min_ttc), fmt(m.avg_distance), m.formation_success ? "1" : "0",
                      fmt(m.formation_time), std::to_string(m.reorganizations), fmt(m.duration),
                      fmt(m.episode_reward), std::to_string(m.decisions), std::to_string(m.trajectories),
                      std::to_string(m.checker_violations), std::to_string(m.boundary_violations),
                      std::to_string(m.fallbacks), err});
  }
  return t;
}

std::vector<EpisodeRow> rows_from_table(const CsvTable& t) {
  const char* required[] = {"case", "policy", "seed", "collision", "avg_speed", "min_ttc", "avg_distance",
                            "formation_success", "formation_time", "reorganizations"};
  for (const char* c : required) {
    if (t.column(c) < 0) throw std::runtime_error(std::string("episodes CSV lacks column ") + c);
  }
  auto get = [&](const std::vector<std::string>& row, const char* name) -> std::string {
    const int c = t.column(name);
    return c < 0 ? std::string() : row[static_cast<size_t>(c)];
  };
  auto get_int = [&](const std::vector<std::string>& row, const char* name) {
    const auto s = get(row, name);
    return s.empty() ? 0 : std::stoi(s);
  };
  auto get_num = [&](const std::vector<std::string>& row, const char* name) {
    const auto s = get(row, name);
    return s.empty() ? 0.0 : parse_number(s);
  };
  std::vector<EpisodeRow> out;
  for (const auto& row : t.rows) {
    EpisodeRow r;
    r.case_id = get_int(row, "case");
    r.policy = get(row, "policy");
    auto& m = r.metrics;
    m.seed = std::stoull(get(row, "seed"));
    m.collision = get(row, "collision") == "1";
    m.avg_speed = get_num(row, "avg_speed");
    m.min_ttc = get_num(row, "min_ttc");
    m.avg_distance = get_num(row, "avg_distance");
    m.formation_success = get(row, "formation_success") == "1";
    m.formation_time = get_num(row, "formation_time");
    m.reorganizations = get_int(row, "reorganizations");
    m.duration = get_num(row, "duration");
    m.episode_reward = get_num(row, "episode_reward");
    m.decisions = get_int(row, "decisions");
    m.trajectories = get_int(row, "trajectories");
    m.checker_violations = get_int(row, "checker_violations");
    m.boundary_violations = get_int(row, "boundary_violations");
    m.fallbacks = get_int(row, "fallbacks");
    m.error = get(row, "error");
    out.push_back(std::move(r));
  }
  return out;
}

CsvTable aggregates_table(const std::vector<Aggregate>& aggs) {
  CsvTable t;
  t.header = {"case",           "policy",         "episodes",      "completed",       "collision_rate",
              "min_ttc_mean",   "min_ttc_q25",    "min_ttc_median", "min_ttc_q75",    "avg_speed_mean",
              "avg_distance_mean", "collision_free", "formation_success_rate", "formation_time_mean",
              "formation_time_count", "reorganizations_mean"};
  for (const auto& a : aggs) {
    t.rows.push_back({std::to_string(a.case_id), a.policy, std::to_string(a.episodes), std::to_string(a.completed),
                      fmt(a.collision_rate), fmt(a.min_ttc_mean), fmt(a.min_ttc_q25), fmt(a.min_ttc_median),
                      fmt(a.min_ttc_q75), fmt(a.avg_speed_mean), fmt(a.avg_distance_mean),
                      std::to_string(a.collision_free), fmt(a.formation_success_rate), fmt(a.formation_time_mean),
                      std::to_string(a.formation_time_count), fmt(a.reorganizations_mean)});
  }
  return t;
}

json ExperimentResult::to_json() const {
  json aggs = json::array();
  for (const auto& a : aggregates) {
    aggs.push_back({{"case", a.case_id},
                    {"policy", a.policy},
                    {"episodes", a.episodes},
                    {"completed", a.completed},
                    {"collision_rate", number(a.collision_rate)},
                    {"min_ttc_mean", number(a.min_ttc_mean)},
                    {"min_ttc_quantiles", {number(a.min_ttc_q25), number(a.min_ttc_median), number(a.min_ttc_q75)}},
                    {"avg_speed_mean", number(a.avg_speed_mean)},
                    {"avg_distance_mean", number(a.avg_distance_mean)},
                    {"collision_free", a.collision_free},
                    {"formation_success_rate", number(a.formation_success_rate)},
                    {"formation_time_mean", number(a.formation_time_mean)},
                    {"formation_time_count", a.formation_time_count},
                    {"reorganizations_mean", number(a.reorganizations_mean)}});
  }
  return {{"config_hash", config_hash}, {"seeds", seeds}, {"aggregates", aggs}};
}

ExperimentResult run_experiment(const ScenarioSpec& spec, const StackConfig& cfg, const std::vector<Policy>& policies,
                                int n_seeds, std::uint64_t seed_base, const PpoAgent* agent, int workers) {
  if (n_seeds < 1) throw std::invalid_argument("run_experiment: need at least one seed");
  if (policies.empty()) throw std::invalid_argument("run_experiment: no policy given");
  spec.validate();
  cfg.validate();
  ExperimentResult res;
  for (int s = 0; s < n_seeds; ++s) res.seeds.push_back(seed_base + static_cast<std::uint64_t>(s));
  std::string basis = spec.to_json().dump() + cfg.to_json().dump();
  if (agent) basis += agent->to_json().dump();
  res.config_hash = content_hash(basis);

  const size_t jobs = policies.size() * static_cast<size_t>(n_seeds);
  std::vector<EpisodeRow> rows(jobs);
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t k = next++; k < jobs; k = next++) {
      const Policy p = policies[k / static_cast<size_t>(n_seeds)];
      const std::uint64_t seed = res.seeds[k % static_cast<size_t>(n_seeds)];
      EpisodeRow r;
      r.case_id = spec.case_id;
      r.policy = policy_name(p);
      r.metrics = run_episode(spec, cfg, p, seed, uses_distribution_layer(p) ? agent : nullptr);
      rows[k] = std::move(r);
    }
  };
  const int n_workers = std::clamp(workers, 1, static_cast<int>(jobs));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  // Round through the CSV form so aggregates are exactly recomputable from the file.
  res.rows = rows_from_table(episodes_table(rows));
  res.aggregates = aggregate_all(res.rows);
  return res;
}

void write_experiment(const ExperimentResult& r, const std::string& dir) {
  write_text(dir + "/episodes.csv", to_csv(episodes_table(r.rows)));
  write_text(dir + "/aggregate.csv", to_csv(aggregates_table(r.aggregates)));
  write_json(dir + "/summary.json", r.to_json());
}

}  // namespace platoon
