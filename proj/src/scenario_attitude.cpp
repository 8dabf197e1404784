#include "ccbf/scenario_attitude.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ccbf/saturation.hpp"

namespace ccbf {
namespace attitude {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

Eigen::Vector3d inertia_diag(const AttitudeParams& p) {
  return {p.inertia_transverse, p.inertia_transverse, p.inertia_axial};
}

double apothem(const AttitudeParams& p) {
  return p.u_max * std::cos(std::numbers::pi / p.input_facets);
}

// Rotation taking e3 to the unit vector v.
Eigen::Matrix3d frame_from_axis(const Eigen::Vector3d& v) {
  return Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), v)
      .toRotationMatrix();
}

// Raw transverse PD command toward `target` (before saturation):
// u_i = kp (e3 x R'target)_i - kd Omega_i, i = 1, 2.
Eigen::Vector2d raw_pd(const AttitudeParams& p, const Eigen::Vector3d& target,
                       const Eigen::VectorXd& x) {
  const Eigen::Matrix3d R = rotation_of(x);
  const Eigen::Vector3d omega = omega_of(x);
  const Eigen::Vector3d q = R.transpose() * target;
  return {p.pd_kp * (-q[1]) - p.pd_kd * omega[0],
          p.pd_kp * (q[0]) - p.pd_kd * omega[1]};
}

// Jacobian of raw_pd with respect to the 12-state: the target pulled back to
// the body frame contributes through columns 0 and 1 of R.
Eigen::Matrix<double, 2, 12> raw_pd_jacobian(const AttitudeParams& p,
                                             const Eigen::Vector3d& target) {
  Eigen::Matrix<double, 2, 12> J = Eigen::Matrix<double, 2, 12>::Zero();
  for (int a = 0; a < 3; ++a) {
    J(0, 3 + a) = -p.pd_kp * target[a];  // -kp q2, q2 = R(:,1)'target
    J(1, 0 + a) = p.pd_kp * target[a];   //  kp q1, q1 = R(:,0)'target
  }
  J(0, 9) = -p.pd_kd;
  J(1, 10) = -p.pd_kd;
  return J;
}

}  // namespace

Eigen::Matrix3d hat(const Eigen::Vector3d& v) {
  Eigen::Matrix3d M;
  M << 0, -v[2], v[1], v[2], 0, -v[0], -v[1], v[0], 0;
  return M;
}

Eigen::Vector3d vee(const Eigen::Matrix3d& M) {
  if ((M + M.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("vee: input is not skew-symmetric");
  }
  return {M(2, 1), M(0, 2), M(1, 0)};
}

Eigen::VectorXd pack_state(const Eigen::Matrix3d& R,
                           const Eigen::Vector3d& omega) {
  Eigen::VectorXd x(12);
  x.head<9>() = Eigen::Map<const Eigen::VectorXd>(R.data(), 9);
  x.tail<3>() = omega;
  return x;
}

Eigen::Matrix3d rotation_of(const Eigen::VectorXd& x) {
  return Eigen::Map<const Eigen::Matrix3d>(x.data());
}

Eigen::Vector3d omega_of(const Eigen::VectorXd& x) { return x.tail<3>(); }

Eigen::Matrix3d project_rotation(const Eigen::Matrix3d& R) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    out = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return out;
}

Eigen::MatrixXd project_rotation_sensitivity(const Eigen::VectorXd& x_pre,
                                             const Eigen::MatrixXd& Q) {
  // Differential of the polar factor U(A), A = U S: with M = U' dA the
  // perturbation dU = U W, where the skew matrix W solves the Sylvester
  // system W S + S W = M - M'.
  const Eigen::Matrix3d A = rotation_of(x_pre);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(A.transpose() * A);
  const Eigen::Matrix3d S = eig.operatorSqrt();
  const Eigen::Matrix3d U = A * S.inverse();

  auto vee3 = [](const Eigen::Matrix3d& K) {
    return Eigen::Vector3d(K(2, 1), K(0, 2), K(1, 0));
  };
  // linear map w -> vee(hat(w) S + S hat(w)) as a 3x3 matrix
  Eigen::Matrix3d L;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Matrix3d He = hat(Eigen::Vector3d::Unit(i));
    L.col(i) = vee3(He * S + S * He);
  }
  const Eigen::Matrix3d Linv = L.inverse();

  Eigen::MatrixXd out = Q;
  for (int c = 0; c < Q.cols(); ++c) {
    const Eigen::Matrix3d dA =
        Eigen::Map<const Eigen::Matrix3d>(Q.col(c).head<9>().data());
    const Eigen::Matrix3d M = U.transpose() * dA;
    const Eigen::Vector3d w = Linv * vee3(Eigen::Matrix3d(M - M.transpose()));
    const Eigen::Matrix3d dU = U * hat(w);
    out.col(c).head<9>() = Eigen::Map<const Eigen::VectorXd>(dU.data(), 9);
  }
  return out;
}

std::vector<Eigen::Vector3d> backup_targets(const AttitudeParams& params) {
  const double half = 0.5 * params.theta_safe_deg * kDegToRad;
  const Eigen::Vector3d e3 = Eigen::Vector3d::UnitZ();
  std::vector<Eigen::Vector3d> targets;
  targets.push_back(e3);
  targets.push_back(Eigen::AngleAxisd(half, Eigen::Vector3d::UnitX()) * e3);
  targets.push_back(Eigen::AngleAxisd(-half, Eigen::Vector3d::UnitX()) * e3);
  targets.push_back(Eigen::AngleAxisd(half, Eigen::Vector3d::UnitY()) * e3);
  targets.push_back(Eigen::AngleAxisd(-half, Eigen::Vector3d::UnitY()) * e3);
  return targets;
}

double lyapunov_value(const AttitudeParams& params,
                      const Eigen::Vector3d& target, const Eigen::VectorXd& x) {
  const Eigen::Matrix3d R = rotation_of(x);
  const Eigen::Vector3d omega = omega_of(x);
  const double align = target.dot(R.col(2));
  return params.pd_kp * (1.0 - align) +
         0.5 * params.inertia_transverse *
             (omega[0] * omega[0] + omega[1] * omega[1]);
}

Eigen::Vector3d reference_direction(const AttitudeParams& params, double t) {
  const double theta = (params.theta_safe_deg +
                        params.ref_osc_amp_deg * std::sin(params.ref_osc_rate * t)) *
                       kDegToRad;
  const double azim = params.ref_azimuth_rate * t;
  return Eigen::AngleAxisd(azim, Eigen::Vector3d::UnitZ()) *
         Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitX()) *
         Eigen::Vector3d::UnitZ();
}

Eigen::VectorXd sample_backup_set(const AttitudeParams& params,
                                  const Eigen::Vector3d& target, double gamma,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  // Split the budget gamma between the attitude term and the kinetic term by
  // rejection from the box.
  double pot = 0.0, kin = 0.0;
  do {
    pot = gamma * unit(rng);
    kin = gamma * unit(rng);
  } while (pot + kin > gamma);
  const double cos_err = 1.0 - pot / params.pd_kp;
  const double theta_err = std::acos(std::min(1.0, std::max(-1.0, cos_err)));
  const double omega_norm = std::sqrt(2.0 * kin / params.inertia_transverse);

  const double phi = angle(rng);
  const Eigen::Vector3d local(std::sin(theta_err) * std::cos(phi),
                              std::sin(theta_err) * std::sin(phi),
                              std::cos(theta_err));
  const Eigen::Vector3d gamma_dir = frame_from_axis(target) * local;
  const double spin = angle(rng);
  const Eigen::Matrix3d R = frame_from_axis(gamma_dir) *
                            Eigen::AngleAxisd(spin, Eigen::Vector3d::UnitZ())
                                .toRotationMatrix();
  const double psi_dir = angle(rng);
  const Eigen::Vector3d omega(omega_norm * std::cos(psi_dir),
                              omega_norm * std::sin(psi_dir),
                              params.spin_rate);
  return pack_state(R, omega);
}

double calibrate_gamma(const AttitudeParams& params,
                       const Eigen::Vector3d& target, std::uint64_t seed,
                       int samples) {
  const double cos_safe = std::cos(params.theta_safe_deg * kDegToRad);
  const double knee_cap = params.sat_knee * apothem(params);

  auto admissible = [&](double gamma) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < samples; ++i) {
      const Eigen::VectorXd x = sample_backup_set(params, target, gamma, rng);
      const Eigen::Matrix3d R = rotation_of(x);
      if (R(2, 2) - cos_safe < 0.0) return false;           // C_j subset of S
      if (raw_pd(params, target, x).norm() > knee_cap) return false;
    }
    return true;
  };

  double lo = 0.0;
  double hi = params.pd_kp;  // attitude term alone cannot exceed 2 kp
  if (!admissible(1e-4)) {
    throw std::runtime_error("calibrate_gamma: no admissible sublevel found");
  }
  lo = 1e-4;
  for (int iter = 0; iter < 40; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (admissible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.95 * lo;  // shave the Monte Carlo boundary
}

Scenario make_scenario(const AttitudeParams& params) {
  Scenario sc;
  sc.name = "attitude";

  const Eigen::Vector3d J = inertia_diag(params);
  const Eigen::Vector3d Jinv = J.cwiseInverse();
  const double cos_safe = std::cos(params.theta_safe_deg * kDegToRad);
  const double cap = apothem(params);
  const double knee = params.sat_knee;

  ControlAffineModel model;
  model.state_dim = 12;
  model.input_dim = 2;
  model.drift = [J, Jinv](const Eigen::VectorXd& x) {
    const Eigen::Matrix3d R = rotation_of(x);
    const Eigen::Vector3d omega = omega_of(x);
    const Eigen::Matrix3d Rdot = R * hat(omega);
    Eigen::VectorXd dx(12);
    dx.head<9>() = Eigen::Map<const Eigen::VectorXd>(Rdot.data(), 9);
    dx.tail<3>() = Jinv.cwiseProduct(-omega.cross(J.cwiseProduct(omega)));
    return dx;
  };
  model.input_matrix = [Jinv](const Eigen::VectorXd&) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(12, 2);
    g(9, 0) = Jinv[0];
    g(10, 1) = Jinv[1];
    return g;
  };
  model.drift_jacobian = [J, Jinv](const Eigen::VectorXd& x) {
    const Eigen::Matrix3d R = rotation_of(x);
    const Eigen::Vector3d omega = omega_of(x);
    Eigen::MatrixXd Df = Eigen::MatrixXd::Zero(12, 12);
    // d vec(R hat(w)) / d vec(R) = kron(hat(w)', I3)
    const Eigen::Matrix3d hw_t = hat(omega).transpose();
    for (int bc = 0; bc < 3; ++bc) {
      for (int br = 0; br < 3; ++br) {
        Df.block<3, 3>(3 * br, 3 * bc) =
            hw_t(br, bc) * Eigen::Matrix3d::Identity();
      }
    }
    // d vec(R hat(w)) / d w: columns vec(R hat(e_i))
    for (int i = 0; i < 3; ++i) {
      const Eigen::Matrix3d Rde = R * hat(Eigen::Vector3d::Unit(i));
      Df.block<9, 1>(0, 9 + i) = Eigen::Map<const Eigen::VectorXd>(Rde.data(), 9);
    }
    // Euler block: Jinv (hat(Jw) - hat(w) J)
    const Eigen::Matrix3d euler =
        Jinv.asDiagonal() *
        (hat(J.cwiseProduct(omega)) - hat(omega) * J.asDiagonal().toDenseMatrix());
    Df.block<3, 3>(9, 9) = euler;
    return Df;
  };
  model.project = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd out = x;
    const Eigen::Matrix3d R = project_rotation(rotation_of(x));
    out.head<9>() = Eigen::Map<const Eigen::VectorXd>(R.data(), 9);
    return out;
  };
  model.project_sensitivity = [](const Eigen::VectorXd& x_pre,
                                 const Eigen::MatrixXd& Q) {
    return project_rotation_sensitivity(x_pre, Q);
  };
  sc.model = model;

  Barrier psi;
  psi.value = [cos_safe](const Eigen::VectorXd& x) { return x[8] - cos_safe; };
  psi.gradient = [](const Eigen::VectorXd&) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(12);
    grad[8] = 1.0;  // e3' R e3 = R(2,2), column-major entry 8
    return grad;
  };
  sc.safety.push_back(psi);

  const std::vector<Eigen::Vector3d> targets = backup_targets(params);
  std::vector<double> gammas = params.gammas;
  if (gammas.empty()) {
    for (std::size_t j = 0; j < targets.size(); ++j) {
      gammas.push_back(calibrate_gamma(params, targets[j],
                                       params.calibration_seed + j,
                                       params.calibration_samples));
    }
  }
  if (gammas.size() != targets.size()) {
    throw std::invalid_argument("attitude: gammas size mismatch");
  }

  for (std::size_t j = 0; j < targets.size(); ++j) {
    const Eigen::Vector3d target = targets[j];
    const double gamma = gammas[j];
    BackupPolicy policy;
    policy.id = static_cast<int>(j);
    policy.gamma = gamma;
    policy.feedback = [params, target, cap, knee](const Eigen::VectorXd& x) {
      return sat_ball(raw_pd(params, target, x), cap, knee);
    };
    policy.feedback_jacobian = [params, target, cap,
                                knee](const Eigen::VectorXd& x) {
      const Eigen::Vector2d raw = raw_pd(params, target, x);
      return Eigen::MatrixXd(sat_ball_jacobian(raw, cap, knee) *
                             raw_pd_jacobian(params, target));
    };
    policy.terminal_barrier.value = [params, target,
                                     gamma](const Eigen::VectorXd& x) {
      return gamma - lyapunov_value(params, target, x);
    };
    policy.terminal_barrier.gradient = [params,
                                        target](const Eigen::VectorXd& x) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(12);
      // -dV: attitude part hits column 2 of R, kinetic part the body rates.
      for (int a = 0; a < 3; ++a) {
        grad[6 + a] = params.pd_kp * target[a];
      }
      grad[9] = -params.inertia_transverse * x[9];
      grad[10] = -params.inertia_transverse * x[10];
      return grad;
    };
    sc.policies.push_back(std::move(policy));
  }

  sc.nominal = [params, cap, knee](const Eigen::VectorXd& x, double t) {
    const Eigen::Vector3d ref = reference_direction(params, t);
    const Eigen::Matrix3d R = rotation_of(x);
    const Eigen::Vector3d omega = omega_of(x);
    const Eigen::Vector3d q = R.transpose() * ref;
    const Eigen::Vector2d raw(
        params.nominal_kp * (-q[1]) - params.nominal_kd * omega[0],
        params.nominal_kp * (q[0]) - params.nominal_kd * omega[1]);
    return Eigen::VectorXd(sat_ball(raw, cap, knee));
  };

  sc.input = polytope_from_ball(params.u_max, params.input_facets);
  sc.initial_state = pack_state(Eigen::Matrix3d::Identity(),
                                {0.0, 0.0, params.spin_rate});
  sc.horizon = {params.horizon_T, params.horizon_N};
  sc.dt_ctrl = params.dt_ctrl;
  sc.duration = params.duration;
  sc.default_single_policy = 0;  // the e3-centered set

  sc.state_columns = {"R11", "R21", "R31", "R12", "R22", "R32",
                      "R13", "R23", "R33", "w1",  "w2",  "w3"};
  sc.log_state = [](const Eigen::VectorXd& x) {
    return std::vector<double>(x.data(), x.data() + 12);
  };
  sc.log_time = [](double t) { return t; };
  sc.log_input = [](const Eigen::VectorXd& u) {
    return std::vector<double>(u.data(), u.data() + u.size());
  };
  sc.tracking_column = "track_err_deg";
  sc.tracking_error = [params](const Eigen::VectorXd& x, double t) {
    const Eigen::Vector3d gamma_dir = rotation_of(x).col(2);
    const Eigen::Vector3d ref = reference_direction(params, t);
    const double c = std::min(1.0, std::max(-1.0, gamma_dir.dot(ref)));
    return std::acos(c) / kDegToRad;
  };
  sc.extra_columns.emplace_back("angle_deg", [](const Eigen::VectorXd& x) {
    const double c = std::min(1.0, std::max(-1.0, x[8]));
    return std::acos(c) / kDegToRad;
  });

  sc.grid_params = {"tilt_rad", "azimuth_rad"};
  sc.grid_range = {0.0, std::numbers::pi / 2.0, 0.0, 2.0 * std::numbers::pi};
  sc.grid_state = [params](double tilt, double azim) {
    const Eigen::Vector3d gamma_dir(std::sin(tilt) * std::cos(azim),
                                    std::sin(tilt) * std::sin(azim),
                                    std::cos(tilt));
    return pack_state(frame_from_axis(gamma_dir), {0.0, 0.0, params.spin_rate});
  };
  return sc;
}

}  // namespace attitude
}  // namespace ccbf
