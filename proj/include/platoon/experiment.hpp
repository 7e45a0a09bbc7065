#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "platoon/io.hpp"
#include "platoon/simulation.hpp"

namespace platoon {

struct EpisodeRow {
  int case_id = 1;
  std::string policy;
  EpisodeMetrics metrics;
};

struct Aggregate {
  int case_id = 1;
  std::string policy;
  int episodes = 0;
  int completed = 0;  // episodes without an error
  double collision_rate = 0.0;
  double min_ttc_mean = 0.0;
  double min_ttc_q25 = 0.0;
  double min_ttc_median = 0.0;
  double min_ttc_q75 = 0.0;
  double avg_speed_mean = 0.0;
  double avg_distance_mean = 0.0;  // collision-free episodes only; NaN when none
  int collision_free = 0;
  double formation_success_rate = 0.0;
  double formation_time_mean = 0.0;  // over episodes where it is defined; NaN when none
  int formation_time_count = 0;
  double reorganizations_mean = 0.0;
};

// Aggregates over completed rows of one (case, policy) pair.
Aggregate aggregate(const std::vector<EpisodeRow>& rows);

struct ExperimentResult {
  std::vector<EpisodeRow> rows;  // sorted by policy order given, then seed
  std::vector<Aggregate> aggregates;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;

  nlohmann::json to_json() const;
};

// Runs seeds base..base+n-1 for every policy on `workers` threads. Output is
// independent of the worker count.
ExperimentResult run_experiment(const ScenarioSpec& spec, const StackConfig& cfg, const std::vector<Policy>& policies,
                                int n_seeds, std::uint64_t seed_base, const PpoAgent* agent = nullptr,
                                int workers = 1);

CsvTable episodes_table(const std::vector<EpisodeRow>& rows);
std::vector<EpisodeRow> rows_from_table(const CsvTable& t);
CsvTable aggregates_table(const std::vector<Aggregate>& aggs);

// Groups rows by (case, policy) in first-seen order and aggregates each group.
std::vector<Aggregate> aggregate_all(const std::vector<EpisodeRow>& rows);

// episodes.csv, aggregate.csv and summary.json under dir.
void write_experiment(const ExperimentResult& r, const std::string& dir);

}  // namespace platoon
