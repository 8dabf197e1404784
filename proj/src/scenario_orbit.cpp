#include "ccbf/scenario_orbit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ccbf/care.hpp"
#include "ccbf/saturation.hpp"

namespace ccbf {
namespace orbit {

namespace {

// Reduced-state selector y = (r, rdot, thetadot) out of x = (r, th, rdot, thd).
Eigen::Matrix<double, 3, 4> reduced_selector() {
  Eigen::Matrix<double, 3, 4> S = Eigen::Matrix<double, 3, 4>::Zero();
  S(0, 0) = 1.0;
  S(1, 2) = 1.0;
  S(2, 3) = 1.0;
  return S;
}

Eigen::VectorXd dynamics_nd(const Eigen::VectorXd& x, const Eigen::Vector2d& u) {
  const double r = x[0];
  if (r <= 0.0) {
    throw std::runtime_error("orbit dynamics: radius reached zero");
  }
  const double rdot = x[2];
  const double thd = x[3];
  Eigen::VectorXd dx(4);
  dx[0] = rdot;
  dx[1] = thd;
  dx[2] = r * thd * thd - 1.0 / (r * r) + u[0];
  dx[3] = -2.0 * rdot * thd / r + u[1] / r;
  return dx;
}

Eigen::Matrix4d drift_jacobian_nd(const Eigen::VectorXd& x) {
  const double r = x[0];
  const double rdot = x[2];
  const double thd = x[3];
  Eigen::Matrix4d Df = Eigen::Matrix4d::Zero();
  Df(0, 2) = 1.0;
  Df(1, 3) = 1.0;
  Df(2, 0) = thd * thd + 2.0 / (r * r * r);
  Df(2, 3) = 2.0 * r * thd;
  Df(3, 0) = 2.0 * rdot * thd / (r * r);
  Df(3, 2) = -2.0 * thd / r;
  Df(3, 3) = -2.0 * rdot / r;
  return Df;
}

struct SontagTerms {
  double a = 0.0;          // L_f V
  Eigen::Vector2d b;       // L_g V
  Eigen::Vector4d grad_a;
  Eigen::Matrix<double, 2, 4> jac_b;
};

SontagTerms sontag_terms(const Eigen::VectorXd& x, const Eigen::Vector3d& y_star,
                         const Eigen::Matrix3d& P) {
  const Eigen::Matrix<double, 3, 4> S = reduced_selector();
  const Eigen::Vector3d dy = S * x - y_star;
  const Eigen::Vector4d gradV = 2.0 * S.transpose() * P * dy;
  const Eigen::Matrix4d hessV = 2.0 * S.transpose() * P * S;

  const double r = x[0];
  const Eigen::VectorXd f = dynamics_nd(x, Eigen::Vector2d::Zero());
  const Eigen::Matrix4d Df = drift_jacobian_nd(x);

  SontagTerms t;
  t.a = gradV.dot(f);
  t.b = {gradV[2], gradV[3] / r};
  t.grad_a = hessV * f + Df.transpose() * gradV;
  t.jac_b.row(0) = hessV.row(2);
  t.jac_b.row(1) = hessV.row(3) / r;
  t.jac_b(1, 0) -= gradV[3] / (r * r);
  return t;
}

}  // namespace

double OrbitParams::char_time() const {
  return std::sqrt(char_length * char_length * char_length / mu());
}

double OrbitParams::u_max_nd() const {
  return u_max * char_time() * char_time() / char_length;
}

double OrbitParams::period_des() const {
  const double a = p_des / (1.0 - e_des * e_des);
  return 2.0 * std::numbers::pi * std::sqrt(a * a * a / mu());
}

OrbitScales make_scales(const OrbitParams& params) {
  return {params.char_length, params.char_time()};
}

Eigen::VectorXd OrbitScales::state_to_nd(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(4);
  out << x[0] / length, x[1], x[2] * time / length, x[3] * time;
  return out;
}

Eigen::VectorXd OrbitScales::state_to_si(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(4);
  out << x[0] * length, x[1], x[2] * length / time, x[3] / time;
  return out;
}

Eigen::VectorXd OrbitScales::input_to_nd(const Eigen::VectorXd& u) const {
  return u * (time * time / length);
}

Eigen::VectorXd OrbitScales::input_to_si(const Eigen::VectorXd& u) const {
  return u * (length / (time * time));
}

Eigen::Matrix3d care_A() {
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  A(0, 1) = 1.0;
  return A;
}

Eigen::Matrix<double, 3, 2> care_B() {
  Eigen::Matrix<double, 3, 2> B = Eigen::Matrix<double, 3, 2>::Zero();
  B(1, 0) = 1.0;
  B(2, 1) = 1.0;
  return B;
}

std::vector<double> backup_radii_nd(const OrbitParams& params) {
  const double keepout_apoapsis = params.p_out / (1.0 - params.e_out);
  const double lo = params.radius_lo_factor * keepout_apoapsis / params.char_length;
  const double hi = params.radius_hi_factor * params.keepin_radius / params.char_length;
  if (lo >= hi) {
    throw std::invalid_argument("backup_radii_nd: degenerate radius band");
  }
  std::vector<double> radii(params.num_backups);
  for (int j = 0; j < params.num_backups; ++j) {
    const double t = params.num_backups == 1
                         ? 0.0
                         : static_cast<double>(j) / (params.num_backups - 1);
    radii[j] = lo * std::pow(hi / lo, t);
  }
  return radii;
}

Eigen::Vector3d reduced_equilibrium(double r_star_nd) {
  return {r_star_nd, 0.0, std::sqrt(1.0 / (r_star_nd * r_star_nd * r_star_nd))};
}

Eigen::Vector2d sontag_raw(const Eigen::VectorXd& x_nd,
                           const Eigen::Vector3d& y_star,
                           const Eigen::Matrix3d& P, double eps_b) {
  const SontagTerms t = sontag_terms(x_nd, y_star, P);
  const double q = t.b.squaredNorm();
  if (std::sqrt(q) <= eps_b) {
    return Eigen::Vector2d::Zero();
  }
  const double s = std::sqrt(t.a * t.a + q * q);
  return -((t.a + s) / q) * t.b;
}

Eigen::VectorXd sample_backup_set(const Eigen::Vector3d& y_star,
                                  const Eigen::Matrix3d& P, double gamma,
                                  std::mt19937_64& rng, bool boundary) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::Vector3d z(gauss(rng), gauss(rng), gauss(rng));
  z.normalize();
  if (!boundary) {
    z *= std::cbrt(unit(rng));
  }
  const Eigen::Matrix3d L = Eigen::LLT<Eigen::Matrix3d>(P).matrixL();
  const Eigen::Vector3d y =
      y_star + std::sqrt(gamma) * L.transpose().triangularView<Eigen::Upper>().solve(z);
  Eigen::VectorXd x(4);
  x << y[0], 2.0 * std::numbers::pi * unit(rng), y[1], y[2];
  return x;
}

Scenario make_scenario(const OrbitParams& params) {
  Scenario sc;
  sc.name = "orbit";

  const OrbitScales scales = make_scales(params);
  const double u_max_nd = params.u_max_nd();
  const double knee = params.sat_knee;
  const double p_out_nd = params.p_out / params.char_length;
  const double keepin_nd = params.keepin_radius / params.char_length;
  const double p_des_nd = params.p_des / params.char_length;

  if (params.p_out > params.keepin_radius * (1.0 - params.e_out)) {
    throw std::invalid_argument(
        "orbit: keep-in radius violates p_o <= R (1 - e_o)");
  }

  ControlAffineModel model;
  model.state_dim = 4;
  model.input_dim = 2;
  model.drift = [](const Eigen::VectorXd& x) {
    return dynamics_nd(x, Eigen::Vector2d::Zero());
  };
  model.input_matrix = [](const Eigen::VectorXd& x) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4, 2);
    g(2, 0) = 1.0;
    g(3, 1) = 1.0 / x[0];
    return g;
  };
  model.drift_jacobian = [](const Eigen::VectorXd& x) {
    return Eigen::MatrixXd(drift_jacobian_nd(x));
  };
  model.input_matrix_jacobian = [](const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(4, 4);
    J(3, 0) = -u[1] / (x[0] * x[0]);
    return J;
  };
  sc.model = model;

  Barrier keepout;
  keepout.value = [p_out_nd, e = params.e_out](const Eigen::VectorXd& x) {
    return x[0] - p_out_nd / (1.0 + e * std::cos(x[1]));
  };
  keepout.gradient = [p_out_nd, e = params.e_out](const Eigen::VectorXd& x) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(4);
    const double denom = 1.0 + e * std::cos(x[1]);
    grad[0] = 1.0;
    grad[1] = -p_out_nd * e * std::sin(x[1]) / (denom * denom);
    return grad;
  };
  Barrier keepin;
  keepin.value = [keepin_nd](const Eigen::VectorXd& x) { return keepin_nd - x[0]; };
  keepin.gradient = [](const Eigen::VectorXd&) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(4);
    grad[0] = -1.0;
    return grad;
  };
  sc.safety = {keepout, keepin};

  const Eigen::Matrix3d P = solve_care(care_A(), care_B(),
                                       Eigen::Matrix3d::Identity(),
                                       Eigen::Matrix2d::Identity());
  const std::vector<double> radii = backup_radii_nd(params);
  const Eigen::Matrix<double, 3, 4> S = reduced_selector();

  for (int j = 0; j < params.num_backups; ++j) {
    const Eigen::Vector3d y_star = reduced_equilibrium(radii[j]);
    const double gamma = params.gamma;
    const double eps_b = params.sontag_eps_b;
    BackupPolicy policy;
    policy.id = j;
    policy.gamma = gamma;
    policy.feedback = [y_star, P, eps_b, u_max_nd,
                       knee](const Eigen::VectorXd& x) {
      return Eigen::VectorXd(
          sat_box(sontag_raw(x, y_star, P, eps_b), u_max_nd, knee));
    };
    policy.feedback_jacobian = [y_star, P, eps_b, u_max_nd,
                                knee](const Eigen::VectorXd& x) {
      const SontagTerms t = sontag_terms(x, y_star, P);
      const double q = t.b.squaredNorm();
      if (std::sqrt(q) <= eps_b) {
        return Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 4));
      }
      const double s = std::sqrt(t.a * t.a + q * q);
      const double kappa = (t.a + s) / q;
      const double dk_da = (1.0 + t.a / s) / q;
      const double dk_dq = -(t.a / s) * (t.a + s) / (q * q);
      const Eigen::Vector4d grad_q = 2.0 * t.jac_b.transpose() * t.b;
      const Eigen::Vector4d grad_kappa = dk_da * t.grad_a + dk_dq * grad_q;
      const Eigen::MatrixXd raw_jac =
          -(t.b * grad_kappa.transpose() + kappa * t.jac_b);
      const Eigen::Vector2d raw = -kappa * t.b;
      return Eigen::MatrixXd(sat_box_jacobian(raw, u_max_nd, knee) * raw_jac);
    };
    policy.terminal_barrier.value = [y_star, P, gamma,
                                     S](const Eigen::VectorXd& x) {
      const Eigen::Vector3d dy = S * x - y_star;
      return gamma - dy.dot(P * dy);
    };
    policy.terminal_barrier.gradient = [y_star, P, S](const Eigen::VectorXd& x) {
      const Eigen::Vector3d dy = S * x - y_star;
      return Eigen::VectorXd(-2.0 * S.transpose() * P * dy);
    };
    sc.policies.push_back(std::move(policy));
  }

  const double kp = params.tracker_kp;
  const double kv = params.tracker_kv;
  const double kt = params.tracker_kt;
  const double e_d = params.e_des;
  sc.nominal = [p_des_nd, e_d, kp, kv, kt, u_max_nd](const Eigen::VectorXd& x,
                                                     double) {
    const double r = x[0];
    const double th = x[1];
    const double rdot = x[2];
    const double thd = x[3];
    const double r_des = p_des_nd / (1.0 + e_d * std::cos(th));
    const double rdot_des = std::sqrt(1.0 / p_des_nd) * e_d * std::sin(th);
    const double rddot_ff = std::sqrt(1.0 / p_des_nd) * e_d * std::cos(th) * thd;
    const double thd_des = std::sqrt(p_des_nd) / (r * r);
    Eigen::VectorXd u(2);
    u[0] = 1.0 / (r * r) - r * thd * thd + rddot_ff - kv * (rdot - rdot_des) -
           kp * (r - r_des);
    u[1] = kt * r * (thd_des - thd);
    u[0] = std::clamp(u[0], -u_max_nd, u_max_nd);
    u[1] = std::clamp(u[1], -u_max_nd, u_max_nd);
    return u;
  };

  sc.input = box_input_rows(u_max_nd, 2);

  // Start on the boundary of the outermost backup set, displaced inward in r.
  {
    const Eigen::Vector3d y_star = reduced_equilibrium(radii.back());
    const double dr = std::sqrt(params.gamma / P(0, 0));
    Eigen::VectorXd x0(4);
    x0 << y_star[0] - 0.98 * dr, 0.0, 0.0, y_star[2];
    sc.initial_state = x0;
  }

  sc.horizon = {scales.time_to_nd(params.horizon_T), params.horizon_N};
  sc.dt_ctrl = scales.time_to_nd(params.dt_ctrl);
  sc.duration = scales.time_to_nd(
      params.duration >= 0.0 ? params.duration : 3.0 * params.period_des());
  sc.default_single_policy = params.num_backups - 1;  // outermost set

  sc.time_column = "t_s";
  sc.state_columns = {"r_m", "theta_rad", "rdot_mps", "thetadot_radps"};
  sc.log_state = [scales](const Eigen::VectorXd& x) {
    const Eigen::VectorXd si = scales.state_to_si(x);
    return std::vector<double>(si.data(), si.data() + 4);
  };
  sc.log_time = [scales](double t) { return scales.time_to_si(t); };
  sc.log_input = [scales](const Eigen::VectorXd& u) {
    const Eigen::VectorXd si = scales.input_to_si(u);
    return std::vector<double>(si.data(), si.data() + u.size());
  };
  sc.tracking_column = "track_err_m";
  sc.tracking_error = [p_des_nd, e_d, scales](const Eigen::VectorXd& x, double) {
    const double r_des = p_des_nd / (1.0 + e_d * std::cos(x[1]));
    return std::abs(x[0] - r_des) * scales.length;
  };

  sc.grid_params = {"r_nd", "theta_rad"};
  sc.grid_range = {p_out_nd * 0.9, keepin_nd * 1.05, 0.0, 2.0 * std::numbers::pi};
  sc.grid_state = [](double r, double th) {
    Eigen::VectorXd x(4);
    x << r, th, 0.0, std::sqrt(1.0 / (r * r * r));
    return x;
  };
  return sc;
}

}  // namespace orbit
}  // namespace ccbf
