#pragma once

#include <vector>

#include "platoon/world.hpp"

namespace platoon {

struct RiskFieldParams {
  double grm = 100.0;
  double k1 = 1.0;
  double k2 = 0.05;
  double d_min = 2.0;
  double v_max = 40.0;
  double d_support = 100.0;
  // Lateral offsets are stretched by this factor before taking the distance,
  // so same-lane proximity dominates.
  double lateral_scale = 3.0;

  // Requires positive constants and grm / d^k1 >= 1 for every d <= d_support,
  // which makes the field non-decreasing in the source speed.
  void validate() const;
};

// Normalized field strength at offset (dx, dy) from a source moving at
// source_speed. Zero beyond the support radius.
double risk_value(double dx, double dy, double source_speed, const RiskFieldParams& p);

// Max-over-others normalized risk seen by ego, in [0, 1]. Others with the same
// id as ego are skipped.
double risk_reward(const VehicleState& ego, const std::vector<VehicleState>& others, const RiskFieldParams& p);

// Risk seen by a zero-size probe at (x, y).
double risk_at_point(double x, double y, const std::vector<VehicleState>& sources, const RiskFieldParams& p);

struct RiskGrid {
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> values;  // row-major over (y, x)

  double at(size_t ix, size_t iy) const { return values[iy * xs.size() + ix]; }
};

// Samples the field over [x_min, x_max] and the road's lateral extent.
RiskGrid risk_grid(const std::vector<VehicleState>& scene, const RoadMap& road, double x_min, double x_max,
                   double resolution, const RiskFieldParams& p);

}  // namespace platoon
