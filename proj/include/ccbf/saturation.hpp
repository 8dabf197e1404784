#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace ccbf {

/// C^2 scalar saturation: identity up to knee*cap, then a tanh shoulder that
/// stays strictly below cap. Keeps backup feedbacks continuously
/// differentiable where a hard clamp would introduce kinks.
inline double smooth_sat(double r, double cap, double knee = 0.9) {
  const double r0 = knee * cap;
  if (r <= r0) return r;
  const double span = cap - r0;
  return r0 + span * std::tanh((r - r0) / span);
}

inline double smooth_sat_slope(double r, double cap, double knee = 0.9) {
  const double r0 = knee * cap;
  if (r <= r0) return 1.0;
  const double t = std::tanh((r - r0) / (cap - r0));
  return 1.0 - t * t;
}

/// Radial saturation of a vector into the ball of radius cap.
inline Eigen::VectorXd sat_ball(const Eigen::VectorXd& u, double cap,
                                double knee = 0.9) {
  const double r = u.norm();
  if (r <= knee * cap || r == 0.0) return u;
  return u * (smooth_sat(r, cap, knee) / r);
}

/// Jacobian of sat_ball with respect to u.
inline Eigen::MatrixXd sat_ball_jacobian(const Eigen::VectorXd& u, double cap,
                                         double knee = 0.9) {
  const int m = static_cast<int>(u.size());
  const double r = u.norm();
  if (r <= knee * cap || r == 0.0) return Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd P = (u * u.transpose()) / (r * r);
  const double s = smooth_sat(r, cap, knee);
  const double sp = smooth_sat_slope(r, cap, knee);
  return (s / r) * (Eigen::MatrixXd::Identity(m, m) - P) + sp * P;
}

/// Componentwise saturation into the box [-cap, cap]^m.
inline Eigen::VectorXd sat_box(const Eigen::VectorXd& u, double cap,
                               double knee = 0.9) {
  Eigen::VectorXd out(u.size());
  for (int i = 0; i < u.size(); ++i) {
    out[i] = std::copysign(smooth_sat(std::abs(u[i]), cap, knee), u[i]);
  }
  return out;
}

/// Diagonal Jacobian of sat_box.
inline Eigen::MatrixXd sat_box_jacobian(const Eigen::VectorXd& u, double cap,
                                        double knee = 0.9) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(u.size(), u.size());
  for (int i = 0; i < u.size(); ++i) {
    J(i, i) = smooth_sat_slope(std::abs(u[i]), cap, knee);
  }
  return J;
}

}  // namespace ccbf
