#include <doctest.h>

#include <cmath>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "ccbf/ode_flow.hpp"

using namespace ccbf;

namespace {

VectorField zero_field(int n) {
  VectorField f;
  f.dim = n;
  f.eval = [n](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(n); };
  f.jacobian = [n](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(n, n);
  };
  return f;
}

VectorField scalar_decay() {
  VectorField f;
  f.dim = 1;
  f.eval = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(-x); };
  f.jacobian = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Constant(1, 1, -1.0);
  };
  return f;
}

VectorField linear_field(const Eigen::MatrixXd& A) {
  VectorField f;
  f.dim = static_cast<int>(A.rows());
  f.eval = [A](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x); };
  f.jacobian = [A](const Eigen::VectorXd&) { return Eigen::MatrixXd(A); };
  return f;
}

// Smooth nonlinear field with analytic Jacobian for convergence/oracle tests.
VectorField pendulum_like() {
  VectorField f;
  f.dim = 2;
  f.eval = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd dx(2);
    dx << x[1], -std::sin(x[0]) - 0.2 * x[1];
    return dx;
  };
  f.jacobian = [](const Eigen::VectorXd& x) {
    Eigen::MatrixXd J(2, 2);
    J << 0, 1, -std::cos(x[0]), -0.2;
    return J;
  };
  return f;
}

}  // namespace

TEST_SUITE_BEGIN("ode_flow");

TEST_CASE("rk4 stationary field") {
  const VectorField f = zero_field(3);
  const Eigen::Vector3d x(1.0, -2.0, 0.5);
  CHECK(rk4_step(f, x, 0.3) == x);
}

TEST_CASE("rk4 scalar decay matches closed form") {
  const VectorField f = scalar_decay();
  const Eigen::VectorXd out = rk4_step(f, Eigen::VectorXd::Ones(1), 0.1);
  CHECK(std::abs(out[0] - std::exp(-0.1)) < 1e-7);
}

TEST_CASE("rk4 planar rotation preserves norm to integrator order") {
  Eigen::Matrix2d A;
  A << 0, -1, 1, 0;
  const VectorField f = linear_field(A);
  const Eigen::Vector2d x(1.0, 0.0);
  const Eigen::VectorXd out = rk4_step(f, x, 0.05);
  CHECK(std::abs(out.norm() - 1.0) < 1e-9);
}

TEST_CASE("rk4 rejects bad dt and diverging states") {
  const VectorField f = scalar_decay();
  CHECK_THROWS_AS(rk4_step(f, Eigen::VectorXd::Ones(1), 0.0),
                  std::invalid_argument);
  VectorField blow;
  blow.dim = 1;
  blow.eval = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN());
  };
  CHECK_THROWS_AS(rk4_step(blow, Eigen::VectorXd::Ones(1), 0.1),
                  IntegrationError);
}

TEST_CASE("integrate_flow stationary field keeps identity sensitivity") {
  const VectorField f = zero_field(4);
  const Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(4, 1.0, 4.0);
  const auto samples = integrate_flow(f, x0, 2.0, 10);
  REQUIRE(samples.size() == 11);
  CHECK(samples[0].sensitivity == Eigen::MatrixXd::Identity(4, 4));
  for (const FlowSample& s : samples) {
    CHECK(s.state == x0);
    CHECK(s.sensitivity == Eigen::MatrixXd::Identity(4, 4));
  }
}

TEST_CASE("integrate_flow scalar decay: state and sensitivity closed form") {
  const auto samples =
      integrate_flow(scalar_decay(), Eigen::VectorXd::Ones(1), 1.0, 100);
  CHECK(std::abs(samples.back().state[0] - std::exp(-1.0)) < 1e-8);
  CHECK(std::abs(samples.back().sensitivity(0, 0) - std::exp(-1.0)) < 1e-8);
  CHECK(samples.back().tau == doctest::Approx(1.0));
}

TEST_CASE("integrate_flow sensitivity matches matrix exponential") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::Matrix3d M;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) M(i, j) = 0.5 * gauss(rng);
    const Eigen::Matrix3d A = M - 1.5 * Eigen::Matrix3d::Identity();
    const auto samples = integrate_flow(
        linear_field(A), Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)),
        1.0, 100);
    const Eigen::Matrix3d expA = A.exp();
    CHECK((samples.back().sensitivity - expA).norm() < 1e-6);
  }
}

TEST_CASE("finite_diff_sensitivity basics") {
  CHECK((finite_diff_sensitivity(zero_field(2), Eigen::Vector2d(1, 2), 1.0) -
         Eigen::Matrix2d::Identity())
            .norm() < 1e-9);
  const Eigen::MatrixXd J =
      finite_diff_sensitivity(scalar_decay(), Eigen::VectorXd::Ones(1), 0.7);
  CHECK(std::abs(J(0, 0) - std::exp(-0.7)) < 1e-8);
}

TEST_CASE("variational sensitivity vs finite differences on smooth fields") {
  const VectorField f = pendulum_like();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> span(-1.5, 1.5);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d x0(span(rng), span(rng));
    const auto samples = integrate_flow(f, x0, 2.0, 40);
    const Eigen::MatrixXd fd = finite_diff_sensitivity(f, x0, 2.0, 1e-5, 40);
    const double rel = (samples.back().sensitivity - fd).norm() /
                       std::max(1.0, fd.norm());
    CHECK(rel <= 1e-4);
  }
}

TEST_CASE("fourth-order convergence under step halving") {
  const VectorField f = pendulum_like();
  const Eigen::Vector2d x0(1.0, 0.3);
  const double T = 2.0;
  const Eigen::VectorXd ref = integrate_flow(f, x0, T, 320).back().state;
  const double err_coarse =
      (integrate_flow(f, x0, T, 20).back().state - ref).norm();
  const double err_fine =
      (integrate_flow(f, x0, T, 40).back().state - ref).norm();
  CHECK(err_coarse / err_fine >= 12.0);
}

TEST_CASE("integrate_flow argument validation") {
  CHECK_THROWS_AS(integrate_flow(scalar_decay(), Eigen::VectorXd::Ones(1), 1.0, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(integrate_flow(scalar_decay(), Eigen::VectorXd::Ones(1), -1.0, 5),
                  std::invalid_argument);
}

TEST_SUITE_END();
