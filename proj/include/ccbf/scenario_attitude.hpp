#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "ccbf/scenario.hpp"

namespace ccbf {
namespace attitude {

/// Rotating rigid satellite, axisymmetric about body e3, actuated on the two
/// transverse axes. State layout: x[0..8] = vec(R) column-major,
/// x[9..11] = body angular velocity.
struct AttitudeParams {
  double inertia_transverse = 0.5;  // lambda
  double inertia_axial = 1.0;       // lambda_hat
  double u_max = 0.5;
  double theta_safe_deg = 80.0;
  double horizon_T = 4.0;
  int horizon_N = 40;
  double pd_kp = 1.0;
  double pd_kd = 1.2;
  double spin_rate = 1.0;  // initial Omega_3
  int input_facets = 16;
  double sat_knee = 0.9;  // saturation onset as a fraction of the apothem

  // Boundary-circling nominal reference and its tracking gains.
  double ref_azimuth_rate = 0.2;
  double ref_osc_rate = 0.5;
  double ref_osc_amp_deg = 15.0;
  double nominal_kp = 3.0;
  double nominal_kd = 1.5;

  double dt_ctrl = 0.02;
  double duration = 60.0;

  // Backup sublevel scales; empty means calibrate at construction.
  std::vector<double> gammas;
  std::uint64_t calibration_seed = 2024;
  int calibration_samples = 10000;
};

/// Skew matrix with hat(v) w = v x w.
Eigen::Matrix3d hat(const Eigen::Vector3d& v);
/// Inverse of hat; rejects matrices that are not skew within 1e-9.
Eigen::Vector3d vee(const Eigen::Matrix3d& M);

Eigen::VectorXd pack_state(const Eigen::Matrix3d& R, const Eigen::Vector3d& omega);
Eigen::Matrix3d rotation_of(const Eigen::VectorXd& x);
Eigen::Vector3d omega_of(const Eigen::VectorXd& x);

/// Nearest rotation matrix (polar projection via SVD, det fixed positive).
Eigen::Matrix3d project_rotation(const Eigen::Matrix3d& R);
/// Exact derivative of the polar projection chained through a flow
/// sensitivity (columns treated as state perturbations).
Eigen::MatrixXd project_rotation_sensitivity(const Eigen::VectorXd& x_pre,
                                             const Eigen::MatrixXd& Q);

/// The five backup targets: e3 and R_x(+-theta_safe/2) e3, R_y(+-theta_safe/2) e3.
std::vector<Eigen::Vector3d> backup_targets(const AttitudeParams& params);

/// Fully assembled scenario. Calibrates gamma_j when params.gammas is empty.
Scenario make_scenario(const AttitudeParams& params = {});

/// Largest gamma for target j passing the Monte Carlo audit (non-saturation
/// of the raw PD law inside the knee plus containment in the safe cone).
double calibrate_gamma(const AttitudeParams& params,
                       const Eigen::Vector3d& target, std::uint64_t seed,
                       int samples);

/// Uniform-ish sample from the sublevel set {V_j <= gamma} of policy j,
/// with the given axial spin.
Eigen::VectorXd sample_backup_set(const AttitudeParams& params,
                                  const Eigen::Vector3d& target, double gamma,
                                  std::mt19937_64& rng);

/// Lyapunov value V_j for diagnostics/tests.
double lyapunov_value(const AttitudeParams& params,
                      const Eigen::Vector3d& target, const Eigen::VectorXd& x);

/// Reference sun-pointing direction of the boundary-circling trajectory.
Eigen::Vector3d reference_direction(const AttitudeParams& params, double t);

}  // namespace attitude
}  // namespace ccbf
