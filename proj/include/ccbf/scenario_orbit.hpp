#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "ccbf/scenario.hpp"

namespace ccbf {
namespace orbit {

/// Planar satellite about asteroid 101955 Bennu, polar coordinates
/// (r, theta, rdot, thetadot). Parameters are dimensional (SI); the scenario
/// itself runs nondimensionalized with characteristic length L_c and
/// characteristic time t_c chosen so mu = 1.
struct OrbitParams {
  double grav_const = 6.674e-11;  // G, m^3 kg^-1 s^-2
  double asteroid_mass = 7.329e10;  // M, kg
  double u_max = 2.5e-4;          // m/s^2
  double horizon_T = 5.0e3;       // s
  int horizon_N = 50;
  double keepin_radius = 1.225e3; // R, m
  double p_out = 428.8;           // debris semi-latus rectum, m
  double e_out = 0.5;
  double p_des = 646.9;           // desired-orbit semi-latus rectum, m
  double e_des = 0.4375;
  double gamma = 0.05;            // nondimensional, all backup sets
  int num_backups = 4;
  double char_length = 245.03;    // L_c, m (mean asteroid radius)
  double radius_lo_factor = 1.1;  // innermost backup radius vs keep-out apoapsis
  double radius_hi_factor = 0.95; // outermost backup radius vs keep-in
  double sontag_eps_b = 1e-10;
  double sat_knee = 0.9;
  double tracker_kp = 1.0;
  double tracker_kv = 2.0;
  double tracker_kt = 1.0;
  double dt_ctrl = 10.0;          // s
  double duration = -1.0;         // s; negative selects 3 desired periods

  double mu() const { return grav_const * asteroid_mass; }
  double char_time() const;       // t_c = sqrt(L_c^3 / mu)
  double u_max_nd() const;
  double period_des() const;      // desired-orbit period, s
};

/// Derived nondimensional quantities shared by the scenario pieces.
struct OrbitScales {
  double length = 1.0;
  double time = 1.0;

  Eigen::VectorXd state_to_nd(const Eigen::VectorXd& x_si) const;
  Eigen::VectorXd state_to_si(const Eigen::VectorXd& x_nd) const;
  Eigen::VectorXd input_to_nd(const Eigen::VectorXd& u_si) const;
  Eigen::VectorXd input_to_si(const Eigen::VectorXd& u_nd) const;
  double time_to_nd(double t_si) const { return t_si / time; }
  double time_to_si(double t_nd) const { return t_nd * time; }
};

OrbitScales make_scales(const OrbitParams& params);

/// Feedback-linearized reduced pair used for the CARE Lyapunov matrices.
Eigen::Matrix3d care_A();
Eigen::Matrix<double, 3, 2> care_B();

/// Backup circular-orbit radii (nondimensional), geometrically spaced.
std::vector<double> backup_radii_nd(const OrbitParams& params);

/// Equilibrium (r*, 0, sqrt(mu/r*^3)) of the theta-free subsystem, mu = 1.
Eigen::Vector3d reduced_equilibrium(double r_star_nd);

/// Fully assembled scenario (nondimensional internals, SI logging).
Scenario make_scenario(const OrbitParams& params = {});

/// Sample a state (nondimensional) from backup set j: reduced state in the
/// ellipsoid V <= gamma (boundary only when boundary = true), theta uniform.
Eigen::VectorXd sample_backup_set(const Eigen::Vector3d& y_star,
                                  const Eigen::Matrix3d& P, double gamma,
                                  std::mt19937_64& rng, bool boundary = false);

/// Raw (unsaturated) Sontag input for Lyapunov V(y) = (y-y*)'P(y-y*), with
/// Lie derivatives taken against the full nonlinear dynamics.
Eigen::Vector2d sontag_raw(const Eigen::VectorXd& x_nd,
                           const Eigen::Vector3d& y_star,
                           const Eigen::Matrix3d& P, double eps_b);

}  // namespace orbit
}  // namespace ccbf
