#pragma once

#include <Eigen/Dense>

namespace platoon {

struct LqrGains {
  double q_gap = 1.0;
  double q_speed = 0.5;
  double r = 1.0;
  double dt = 0.1;
  double u_min = -4.0;
  double u_max = 2.0;

  void validate() const;
};

// Gap/speed-error regulator on the discrete double integrator
//   e' = e + ev dt - u dt^2/2,  ev' = ev - u dt
// with e = gap - gap_ref and ev = v_leader - v. K comes from the discrete
// algebraic Riccati equation, solved once at construction.
class LqrLongitudinal {
 public:
  explicit LqrLongitudinal(const LqrGains& g = {});

  double command(double gap_error, double speed_error, double feedforward = 0.0) const;
  const Eigen::RowVector2d& gain() const { return k_; }
  Eigen::Matrix2d closed_loop() const;
  double spectral_radius() const;
  const LqrGains& gains() const { return g_; }

 private:
  LqrGains g_;
  Eigen::Matrix2d a_;
  Eigen::Vector2d b_;
  Eigen::RowVector2d k_;
};

struct PidGains {
  double kp = 0.3;
  double ki = 0.01;
  double kd = 0.8;
  double preview = 0.5;        // s
  double max_rate = 0.3;       // rad/s
  double integral_limit = 5.0; // m s

  void validate() const;
};

// Lateral PID producing a heading-rate command. The error is the lateral offset
// predicted `preview` seconds ahead; the derivative channel damps the heading
// relative to the reference heading.
class PidSteering {
 public:
  explicit PidSteering(const PidGains& g = {});

  double command(double y, double heading, double speed, double y_ref, double vy_ref, double dt);
  void reset() { integral_ = 0.0; }
  double integral() const { return integral_; }

 private:
  PidGains g_;
  double integral_ = 0.0;
};

}  // namespace platoon
