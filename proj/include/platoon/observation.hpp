#pragma once

#include <array>
#include <random>
#include <vector>

#include "platoon/world.hpp"

namespace platoon {

inline constexpr int kObsFields = 9;  // x, y, vx, vy, ax, ay, jx, jy, ttc

struct ObservationParams {
  int k_nearest = 8;
  double sigma_pos = 0.1;
  double sigma_vel = 0.1;
  double sentinel_x = 200.0;  // relative x of padding rows
  double same_lane_dy = 2.0;

  void validate() const;
};

// Row-major table: platoon members first (front to back), then the K nearest
// other objects, then padding rows.
struct Observation {
  int rows = 0;
  int platoon_rows = 0;
  int object_rows = 0;  // real (non-padding) object rows
  std::vector<double> values;

  double at(int row, int field) const { return values[static_cast<size_t>(row * kObsFields + field)]; }
};

// frames[0] is the current scene, frames[1] one physics step earlier,
// frames[2] two steps earlier. Noise is drawn per frame; acceleration and jerk
// are backward differences of the noisy velocities. Positions are relative to
// the platoon leader's true position.
Observation observe(const std::array<std::vector<VehicleState>, 3>& frames, const std::vector<int>& platoon_ids,
                    double dt, const ObservationParams& p, std::mt19937_64& rng);

// Bounded network input built from an observation.
std::vector<double> observation_features(const Observation& obs);

inline int observation_size(int platoon_size, const ObservationParams& p) {
  return (platoon_size + p.k_nearest) * kObsFields;
}

}  // namespace platoon
