#pragma once

#include <vector>

#include "platoon/coalition.hpp"
#include "platoon/configuration.hpp"
#include "platoon/risk_field.hpp"
#include "platoon/world.hpp"

namespace platoon {

enum class BaselineKind { kSiplc, kSuplc, kRrl };

struct BaselineParams {
  double siplc_fore = 15.0;
  double siplc_aft = 15.0;
  double suplc_fore = 10.0;
  double suplc_aft = 10.0;
  double spacing = 10.0;         // nominal center-to-center spacing
  double trigger_ttc = 2.5;
  double trigger_risk = 0.5;
  double threat_window = 30.0;   // longitudinal reach of the cut-in test
  double threat_lateral_speed = 0.3;
  double settle_tolerance = 0.3; // lateral distance to lane center counted as done
};

struct Threat {
  bool triggered = false;
  int target_delta = 0;  // +1 left, -1 right, 0 no free side
  int at_risk = -1;      // first member under threat, front to back
};

// Looks for low TTC or high risk on any member, or an adjacent vehicle drifting
// toward the platoon lane alongside it. The target side is away from a drifting
// vehicle, otherwise left when it exists.
Threat assess_threat(const std::vector<VehicleState>& platoon, const std::vector<VehicleState>& background,
                     const RoadMap& road, const RiskFieldParams& risk, const BaselineParams& p);

// Required clear length for the whole formation to move at once.
double siplc_window(int n, double vehicle_length, const BaselineParams& p);
// Required clear length for one vehicle.
double suplc_window(double vehicle_length, const BaselineParams& p);

// No vehicle body in `lane` overlaps [x_lo, x_hi]; vehicles listed in `ignore_ids` are skipped.
bool window_clear(const RoadMap& road, int lane, double x_lo, double x_hi, const std::vector<VehicleState>& vehicles,
                  const std::vector<int>& ignore_ids = {});

// All members change together when the formation window is clear, else none.
std::vector<LateralAction> siplc_step(const std::vector<VehicleState>& platoon,
                                      const std::vector<VehicleState>& background, const RoadMap& road,
                                      const Threat& threat, const BaselineParams& p);

// Front-to-back sequence: a member goes once its predecessor has settled in the
// target lane and its own window is clear.
class SuplcController {
 public:
  explicit SuplcController(BaselineParams p = {}) : p_(p) {}

  std::vector<LateralAction> step(const std::vector<VehicleState>& platoon,
                                  const std::vector<VehicleState>& background, const RoadMap& road,
                                  const Threat& threat);
  int target_lane() const { return target_lane_; }
  bool active() const { return target_lane_ >= 0; }

 private:
  BaselineParams p_;
  int target_lane_ = -1;
};

// Vehicle-layer rules used with the learned configuration: an at-risk group
// moves away when its group window is clear; while merging, groups outside the
// leader's lane rejoin when a window behind the leader group opens.
std::vector<LateralAction> rrl_step(const std::vector<VehicleState>& platoon,
                                    const std::vector<VehicleState>& background, const RoadMap& road,
                                    const ConfigAction& config, const Threat& threat, const BaselineParams& p);

}  // namespace platoon
