#include <doctest.h>

#include <random>

#include "ccbf/care.hpp"
#include "ccbf/scenario_orbit.hpp"

using namespace ccbf;

namespace {

double spectral_abscissa(const Eigen::MatrixXd& A) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(A, false)
      .eigenvalues()
      .real()
      .maxCoeff();
}

}  // namespace

TEST_SUITE_BEGIN("care");

TEST_CASE("lyapunov solve against a random stable system") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::Matrix3d M;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) M(i, j) = gauss(rng);
    const Eigen::Matrix3d A = M - 2.5 * Eigen::Matrix3d::Identity();
    Eigen::Matrix3d C = M * M.transpose() + Eigen::Matrix3d::Identity();
    const Eigen::MatrixXd X = solve_lyapunov(A, C);
    CHECK((A.transpose() * X + X * A + C).norm() < 1e-10);
    CHECK((X - X.transpose()).norm() < 1e-12);
  }
}

TEST_CASE("scalar CARE has the stabilizing root") {
  // A = 0, B = 1, Q = 1, R = 1: -P^2 + 1 = 0 -> P = 1 (stabilizing).
  const Eigen::MatrixXd P = solve_care(
      Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Ones(1, 1),
      Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
  CHECK(std::abs(P(0, 0) - 1.0) <= 1e-10);
}

TEST_CASE("double integrator CARE matches the analytic solution") {
  Eigen::Matrix2d A;
  A << 0, 1, 0, 0;
  Eigen::MatrixXd B(2, 1);
  B << 0, 1;
  const Eigen::Matrix2d Q = Eigen::Matrix2d::Identity();
  const Eigen::MatrixXd R = Eigen::MatrixXd::Ones(1, 1);
  const Eigen::MatrixXd P = solve_care(A, B, Q, R);

  Eigen::Matrix2d expected;
  expected << std::sqrt(3.0), 1.0, 1.0, std::sqrt(3.0);
  CHECK((P - expected).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(care_residual(A, B, Q, R, P) <= 1e-10);
  const Eigen::MatrixXd Acl = A - B * R.inverse() * B.transpose() * P;
  CHECK(spectral_abscissa(Acl) < 0.0);
}

TEST_CASE("reduced-pair CARE: residual, spectrum and block structure") {
  const Eigen::Matrix3d A = orbit::care_A();
  const Eigen::Matrix<double, 3, 2> B = orbit::care_B();
  const Eigen::Matrix3d Q = Eigen::Matrix3d::Identity();
  const Eigen::Matrix2d R = Eigen::Matrix2d::Identity();
  const Eigen::MatrixXd P = solve_care(A, B, Q, R);

  CHECK(care_residual(A, B, Q, R, P) <= 1e-8);
  CHECK((P - P.transpose()).norm() <= 1e-12);
  CHECK(Eigen::LLT<Eigen::MatrixXd>(P).info() == Eigen::Success);
  const Eigen::MatrixXd Acl = A - B * R.inverse() * B.transpose() * P;
  CHECK(spectral_abscissa(Acl) < 0.0);

  // the pair decouples into a double integrator and a single integrator
  Eigen::Matrix3d expected;
  expected << std::sqrt(3.0), 1.0, 0.0, 1.0, std::sqrt(3.0), 0.0, 0.0, 0.0, 1.0;
  CHECK((P - expected).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("uncontrollable pairs are rejected") {
  // A = 1, B = 0: not stabilizable.
  CHECK_THROWS_AS(solve_care(Eigen::MatrixXd::Ones(1, 1),
                             Eigen::MatrixXd::Zero(1, 1),
                             Eigen::MatrixXd::Ones(1, 1),
                             Eigen::MatrixXd::Ones(1, 1)),
                  std::runtime_error);
}

TEST_CASE("dimension and definiteness validation") {
  CHECK_THROWS_AS(solve_care(Eigen::MatrixXd::Zero(2, 2),
                             Eigen::MatrixXd::Ones(1, 1),
                             Eigen::MatrixXd::Identity(2, 2),
                             Eigen::MatrixXd::Ones(1, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_care(Eigen::MatrixXd::Zero(1, 1),
                             Eigen::MatrixXd::Ones(1, 1),
                             Eigen::MatrixXd::Ones(1, 1),
                             -Eigen::MatrixXd::Ones(1, 1)),
                  std::invalid_argument);
}

TEST_SUITE_END();
