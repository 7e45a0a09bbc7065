#include "platoon/configuration.hpp"

#include <algorithm>
#include <stdexcept>

namespace platoon {

int ConfigAction::size() const {
  int n = 0;
  for (const auto& g : groups) n += static_cast<int>(g.size());
  return n;
}

int ConfigAction::group_of(int member) const {
  for (size_t g = 0; g < groups.size(); ++g) {
    if (std::find(groups[g].begin(), groups[g].end(), member) != groups[g].end()) return static_cast<int>(g);
  }
  return -1;
}

std::string ConfigAction::label() const {
  std::string s;
  for (const auto& g : groups) {
    s += '(';
    for (size_t i = 0; i < g.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(g[i]);
    }
    s += ')';
  }
  return s;
}

namespace {

ConfigAction from_cuts(int n, const std::vector<int>& cuts) {
  ConfigAction a;
  int begin = 0;
  auto push = [&](int end) {
    std::vector<int> g;
    for (int i = begin; i < end; ++i) g.push_back(i);
    a.groups.push_back(std::move(g));
    begin = end;
  };
  for (int c : cuts) push(c);
  push(n);
  return a;
}

void choose_cuts(int n, int k, int first, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == k) {
    out.push_back(cur);
    return;
  }
  for (int c = first; c < n; ++c) {
    cur.push_back(c);
    choose_cuts(n, k, c + 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<ConfigAction> enumerate_configurations(int n) {
  if (n < kMinPlatoonSize || n > kMaxPlatoonSize) {
    throw std::invalid_argument("enumerate_configurations: platoon size must be in [2, 5]");
  }
  std::vector<ConfigAction> out;
  for (int k = 0; k < n; ++k) {
    std::vector<std::vector<int>> cut_sets;
    std::vector<int> cur;
    choose_cuts(n, k, 1, cur, cut_sets);
    for (const auto& cuts : cut_sets) out.push_back(from_cuts(n, cuts));
  }
  return out;
}

int configuration_index(const ConfigAction& action) {
  const int n = action.size();
  if (n < kMinPlatoonSize || n > kMaxPlatoonSize) return -1;
  const auto all = enumerate_configurations(n);
  for (size_t i = 0; i < all.size(); ++i) {
    if (all[i] == action) return static_cast<int>(i);
  }
  return -1;
}

HeuristicConfigurator::HeuristicConfigurator(int n, HeuristicParams p) : n_(n), p_(p) {
  if (n < kMinPlatoonSize || n > kMaxPlatoonSize) throw std::invalid_argument("heuristic: bad platoon size");
  reset();
}

void HeuristicConfigurator::reset() {
  current_ = enumerate_configurations(n_).front();
  clear_since_ = -1.0;
}

ConfigAction HeuristicConfigurator::decide(const RiskSummary& s, double t) {
  int at_risk = -1;
  if (s.leader_ttc < p_.ttc_threshold) at_risk = 0;
  for (int i = 0; i < n_ && at_risk < 0; ++i) {
    const bool ttc_bad = i < static_cast<int>(s.member_ttc.size()) && s.member_ttc[static_cast<size_t>(i)] < p_.ttc_threshold;
    const bool risk_bad =
        i < static_cast<int>(s.member_risk.size()) && s.member_risk[static_cast<size_t>(i)] > p_.risk_threshold;
    if (ttc_bad || risk_bad) at_risk = i;
  }

  if (at_risk >= 0) {
    clear_since_ = -1.0;
    if (s.left_blocked && s.right_blocked) return current_;
    ConfigAction a;
    if (at_risk > 0) {
      std::vector<int> front;
      for (int i = 0; i < at_risk; ++i) front.push_back(i);
      a.groups.push_back(front);
    }
    a.groups.push_back({at_risk});
    if (at_risk + 1 < n_) {
      std::vector<int> back;
      for (int i = at_risk + 1; i < n_; ++i) back.push_back(i);
      a.groups.push_back(back);
    }
    current_ = a;
    return current_;
  }

  if (current_.single()) return current_;
  if (clear_since_ < 0.0) clear_since_ = t;
  if (t - clear_since_ >= p_.hold_time - 1e-9) {
    current_ = enumerate_configurations(n_).front();
    clear_since_ = -1.0;
  }
  return current_;
}

}  // namespace platoon
