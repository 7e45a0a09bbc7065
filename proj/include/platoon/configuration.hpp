#pragma once

#include <string>
#include <vector>

namespace platoon {

inline constexpr int kMinPlatoonSize = 2;
inline constexpr int kMaxPlatoonSize = 5;

// Ordered partition of platoon members 0..n-1 into contiguous sub-platoons.
struct ConfigAction {
  std::vector<std::vector<int>> groups;

  bool single() const { return groups.size() == 1; }
  int size() const;
  int group_of(int member) const;
  std::string label() const;  // e.g. "(0)(1,2)"

  bool operator==(const ConfigAction& o) const { return groups == o.groups; }
};

// All 2^(n-1) contiguous partitions. Ordered by group count ascending, then by
// cut positions lexicographically: (0,1,2), (0)(1,2), (0,1)(2), (0)(1)(2).
std::vector<ConfigAction> enumerate_configurations(int n);

// Index of `action` in enumerate_configurations(n), or -1.
int configuration_index(const ConfigAction& action);

struct RiskSummary {
  double leader_ttc = 1e300;         // TTC of the platoon leader to its front object
  std::vector<double> member_ttc;    // per member, front to back
  std::vector<double> member_risk;   // per member risk-field value
  bool left_blocked = false;
  bool right_blocked = false;
};

struct HeuristicParams {
  double ttc_threshold = 2.5;
  double risk_threshold = 0.5;
  double hold_time = 5.0;
};

// Rule-based configuration policy. Splits off the first at-risk member when a
// threat is seen and returns to one group only after the threat has been clear
// for hold_time.
class HeuristicConfigurator {
 public:
  HeuristicConfigurator(int n, HeuristicParams p = {});

  ConfigAction decide(const RiskSummary& s, double t);
  void reset();

 private:
  int n_;
  HeuristicParams p_;
  ConfigAction current_;
  double clear_since_ = -1.0;
};

}  // namespace platoon
