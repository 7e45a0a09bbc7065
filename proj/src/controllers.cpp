#include "platoon/controllers.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace platoon {

void LqrGains::validate() const {
  if (q_gap < 0.0 || q_speed < 0.0) throw std::invalid_argument("LQR: Q must be positive semidefinite");
  if (!(r > 0.0)) throw std::invalid_argument("LQR: R must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("LQR: dt must be positive");
  if (!(u_min < 0.0 && u_max > 0.0)) throw std::invalid_argument("LQR: command bounds must straddle zero");
}

LqrLongitudinal::LqrLongitudinal(const LqrGains& g) : g_(g) {
  g.validate();
  a_ << 1.0, g.dt, 0.0, 1.0;
  b_ << -0.5 * g.dt * g.dt, -g.dt;
  Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
  q(0, 0) = g.q_gap;
  q(1, 1) = g.q_speed;
  Eigen::Matrix2d p = q;
  bool converged = false;
  for (int it = 0; it < 100000; ++it) {
    const double s = g.r + b_.dot(p * b_);
    const Eigen::RowVector2d k = (b_.transpose() * p * a_) / s;
    const Eigen::Matrix2d next = a_.transpose() * p * a_ - a_.transpose() * p * b_ * k + q;
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (change < 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff())) {
      converged = true;
      break;
    }
  }
  if (!converged || !p.allFinite()) throw std::runtime_error("LQR: Riccati iteration did not converge");
  k_ = (b_.transpose() * p * a_) / (g.r + b_.dot(p * b_));
  if (spectral_radius() >= 1.0) throw std::runtime_error("LQR: gain set is not stabilizing");
}

double LqrLongitudinal::command(double gap_error, double speed_error, double feedforward) const {
  const double u = -(k_(0) * gap_error + k_(1) * speed_error) + feedforward;
  return std::clamp(u, g_.u_min, g_.u_max);
}

Eigen::Matrix2d LqrLongitudinal::closed_loop() const { return a_ - b_ * k_; }

double LqrLongitudinal::spectral_radius() const {
  Eigen::EigenSolver<Eigen::Matrix2d> es(closed_loop());
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

void PidGains::validate() const {
  if (kp < 0.0 || ki < 0.0 || kd < 0.0) throw std::invalid_argument("PID gains must be non-negative");
  if (preview < 0.0 || !(max_rate > 0.0) || !(integral_limit > 0.0)) {
    throw std::invalid_argument("PID limits must be positive");
  }
}

PidSteering::PidSteering(const PidGains& g) : g_(g) { g.validate(); }

double PidSteering::command(double y, double heading, double speed, double y_ref, double vy_ref, double dt) {
  const double v = std::max(speed, 0.1);
  const double e = (y_ref + vy_ref * g_.preview) - (y + speed * std::sin(heading) * g_.preview);
  integral_ = std::clamp(integral_ + e * dt, -g_.integral_limit, g_.integral_limit);
  const double de = std::clamp(vy_ref / v, -1.0, 1.0) - std::sin(heading);
  const double u = g_.kp * e + g_.ki * integral_ + g_.kd * de;
  return std::clamp(u, -g_.max_rate, g_.max_rate);
}

}  // namespace platoon
