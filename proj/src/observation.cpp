#include "platoon/observation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace platoon {

void ObservationParams::validate() const {
  if (k_nearest < 0) throw std::invalid_argument("observation: k_nearest must be non-negative");
  if (sigma_pos < 0.0 || sigma_vel < 0.0) throw std::invalid_argument("observation: noise must be non-negative");
}

namespace {

struct Noisy {
  double x, y, vx, vy;
};

const VehicleState* find_id(const std::vector<VehicleState>& frame, int id) {
  for (const auto& v : frame) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

double lane_ttc(const VehicleState& a, const VehicleState& b, double same_lane_dy) {
  if (std::abs(a.y - b.y) >= same_lane_dy) return kInf;
  return a.x <= b.x ? compute_ttc(a, b) : compute_ttc(b, a);
}

}  // namespace

Observation observe(const std::array<std::vector<VehicleState>, 3>& frames, const std::vector<int>& platoon_ids,
                    double dt, const ObservationParams& p, std::mt19937_64& rng) {
  p.validate();
  if (platoon_ids.empty()) throw std::invalid_argument("observe: empty platoon");
  if (!(dt > 0.0)) throw std::invalid_argument("observe: dt must be positive");
  const auto& now = frames[0];
  const VehicleState* leader = find_id(now, platoon_ids.front());
  if (!leader) throw std::invalid_argument("observe: platoon leader missing from scene");

  std::vector<const VehicleState*> members;
  for (int id : platoon_ids) {
    const VehicleState* v = find_id(now, id);
    if (!v) throw std::invalid_argument("observe: platoon member missing from scene");
    members.push_back(v);
  }
  std::vector<const VehicleState*> others;
  for (const auto& v : now) {
    if (std::find(platoon_ids.begin(), platoon_ids.end(), v.id) == platoon_ids.end()) others.push_back(&v);
  }
  auto dist_to_platoon = [&](const VehicleState& o) {
    double best = kInf;
    for (const auto* m : members) best = std::min(best, std::hypot(o.x - m->x, o.y - m->y));
    return best;
  };
  std::vector<std::pair<double, const VehicleState*>> ranked;
  for (const auto* o : others) ranked.push_back({dist_to_platoon(*o), o});
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second->id < b.second->id;
  });
  if (static_cast<int>(ranked.size()) > p.k_nearest) ranked.resize(static_cast<size_t>(p.k_nearest));

  std::normal_distribution<double> n01(0.0, 1.0);
  auto noisy = [&](const VehicleState& v) {
    Noisy s{v.x, v.y, v.vx(), v.vy()};
    if (p.sigma_pos > 0.0) {
      s.x += p.sigma_pos * n01(rng);
      s.y += p.sigma_pos * n01(rng);
    }
    if (p.sigma_vel > 0.0) {
      s.vx += p.sigma_vel * n01(rng);
      s.vy += p.sigma_vel * n01(rng);
    }
    return s;
  };

  Observation obs;
  obs.platoon_rows = static_cast<int>(members.size());
  obs.object_rows = static_cast<int>(ranked.size());
  obs.rows = obs.platoon_rows + p.k_nearest;
  obs.values.reserve(static_cast<size_t>(obs.rows * kObsFields));

  auto emit = [&](const VehicleState& v, double ttc) {
    std::array<Noisy, 3> s;
    for (size_t f = 0; f < 3; ++f) {
      const VehicleState* past = find_id(frames[f], v.id);
      s[f] = noisy(past ? *past : v);
    }
    const double ax0 = (s[0].vx - s[1].vx) / dt;
    const double ay0 = (s[0].vy - s[1].vy) / dt;
    const double ax1 = (s[1].vx - s[2].vx) / dt;
    const double ay1 = (s[1].vy - s[2].vy) / dt;
    const double row[kObsFields] = {s[0].x - leader->x, s[0].y - leader->y, s[0].vx, s[0].vy, ax0,
                                    ay0, (ax0 - ax1) / dt, (ay0 - ay1) / dt, ttc};
    obs.values.insert(obs.values.end(), row, row + kObsFields);
  };

  for (const auto* m : members) {
    double ttc = kInf;
    for (const auto& o : now) {
      if (o.id == m->id || o.x <= m->x) continue;
      ttc = std::min(ttc, lane_ttc(*m, o, p.same_lane_dy));
    }
    emit(*m, ttc);
  }
  for (const auto& [d, o] : ranked) {
    double ttc = kInf;
    for (const auto* m : members) ttc = std::min(ttc, lane_ttc(*o, *m, p.same_lane_dy));
    emit(*o, ttc);
  }
  for (int k = obs.object_rows; k < p.k_nearest; ++k) {
    const double row[kObsFields] = {p.sentinel_x, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, kInf};
    obs.values.insert(obs.values.end(), row, row + kObsFields);
  }
  return obs;
}

std::vector<double> observation_features(const Observation& obs) {
  static constexpr double kScale[kObsFields] = {100.0, 4.0, 40.0, 5.0, 5.0, 5.0, 50.0, 50.0, 1.0};
  std::vector<double> f;
  f.reserve(obs.values.size());
  for (int r = 0; r < obs.rows; ++r) {
    for (int c = 0; c < kObsFields; ++c) {
      double v = obs.at(r, c);
      if (c == kObsFields - 1) {
        v = std::isfinite(v) ? std::min(v, 20.0) / 20.0 : 1.0;
      } else {
        v = std::clamp(v / kScale[c], -5.0, 5.0);
      }
      f.push_back(v);
    }
  }
  return f;
}

}  // namespace platoon
