#include "platoon/risk_field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace platoon {

void RiskFieldParams::validate() const {
  if (!(grm > 0 && k1 > 0 && k2 > 0 && d_min > 0 && v_max > 0 && d_support > d_min && lateral_scale > 0)) {
    throw std::invalid_argument("risk field parameters must be positive with d_support > d_min");
  }
  if (grm / std::pow(d_support, k1) < 1.0 - 1e-12) {
    throw std::invalid_argument("risk field needs grm / d_support^k1 >= 1");
  }
}

double risk_value(double dx, double dy, double source_speed, const RiskFieldParams& p) {
  if (!std::isfinite(dx) || !std::isfinite(dy) || !std::isfinite(source_speed)) {
    throw std::invalid_argument("risk_value: non-finite input");
  }
  const double d_raw = std::hypot(dx, p.lateral_scale * dy);
  if (d_raw > p.d_support) return 0.0;
  const double d = std::max(d_raw, p.d_min);
  const double v = std::clamp(source_speed, 0.0, p.v_max);
  // Work in logs: base^(k2 v) / base_max^(k2 v_max).
  const double log_num = p.k2 * v * (std::log(p.grm) - p.k1 * std::log(d));
  const double log_den = p.k2 * p.v_max * (std::log(p.grm) - p.k1 * std::log(p.d_min));
  return std::clamp(std::exp(log_num - log_den), 0.0, 1.0);
}

double risk_reward(const VehicleState& ego, const std::vector<VehicleState>& others, const RiskFieldParams& p) {
  double best = 0.0;
  for (const auto& o : others) {
    if (o.id == ego.id) continue;
    best = std::max(best, risk_value(o.x - ego.x, o.y - ego.y, o.speed, p));
  }
  return best;
}

double risk_at_point(double x, double y, const std::vector<VehicleState>& sources, const RiskFieldParams& p) {
  double best = 0.0;
  for (const auto& s : sources) best = std::max(best, risk_value(s.x - x, s.y - y, s.speed, p));
  return best;
}

RiskGrid risk_grid(const std::vector<VehicleState>& scene, const RoadMap& road, double x_min, double x_max,
                   double resolution, const RiskFieldParams& p) {
  if (!(resolution > 0.0)) throw std::invalid_argument("risk_grid: resolution must be positive");
  if (!(x_max >= x_min)) throw std::invalid_argument("risk_grid: empty x range");
  RiskGrid grid;
  const double y_lo = road.y_min();
  const double y_hi = road.y_max();
  for (double x = x_min; x <= x_max + 1e-9; x += resolution) grid.xs.push_back(x);
  for (double y = y_lo; y <= y_hi + 1e-9; y += resolution) grid.ys.push_back(y);
  grid.values.reserve(grid.xs.size() * grid.ys.size());
  for (double y : grid.ys) {
    for (double x : grid.xs) grid.values.push_back(risk_at_point(x, y, scene, p));
  }
  return grid;
}

}  // namespace platoon
