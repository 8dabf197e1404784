#include <doctest.h>

#include <cmath>
#include <random>

#include "ccbf/backup_cbf.hpp"
#include "ccbf/testing/oracles.hpp"

using namespace ccbf;

namespace {

// Trivial stationary model: f = 0, g = I2 on a 2-state.
ControlAffineModel stationary_2d() {
  ControlAffineModel m;
  m.state_dim = 2;
  m.input_dim = 2;
  m.drift = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(2); };
  m.input_matrix = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(2, 2);
  };
  m.drift_jacobian = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(2, 2);
  };
  return m;
}

BackupPolicy zero_policy(int dim, int input_dim, Barrier terminal) {
  BackupPolicy p;
  p.feedback = [input_dim](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(input_dim);
  };
  p.feedback_jacobian = [dim, input_dim](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(input_dim, dim);
  };
  p.terminal_barrier = std::move(terminal);
  return p;
}

// Scalar plant xdot = u with backup u = -x (closed loop xdot = -x).
ControlAffineModel scalar_plant() {
  ControlAffineModel m;
  m.state_dim = 1;
  m.input_dim = 1;
  m.drift = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1); };
  m.input_matrix = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Ones(1, 1);
  };
  m.drift_jacobian = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(1, 1);
  };
  return m;
}

BackupPolicy decay_policy() {
  BackupPolicy p;
  p.feedback = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(-x); };
  p.feedback_jacobian = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Constant(1, 1, -1.0);
  };
  p.terminal_barrier.value = [](const Eigen::VectorXd& x) {
    return x[0] - 0.1;
  };
  p.terminal_barrier.gradient = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Ones(1);
  };
  return p;
}

Barrier identity_barrier() {
  Barrier b;
  b.value = [](const Eigen::VectorXd& x) { return x[0]; };
  b.gradient = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Ones(1); };
  return b;
}

}  // namespace

TEST_SUITE_BEGIN("backup_cbf");

TEST_CASE("stationary model: all samples constant, implicit value is a min") {
  const ControlAffineModel m = stationary_2d();
  Barrier psi;
  psi.value = [](const Eigen::VectorXd& x) { return 1.0 - x.squaredNorm(); };
  psi.gradient = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(-2.0 * x);
  };
  Barrier terminal;
  terminal.value = [](const Eigen::VectorXd& x) { return 0.3 - x.squaredNorm(); };
  terminal.gradient = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(-2.0 * x);
  };
  const BackupPolicy policy = zero_policy(2, 2, terminal);

  const auto ev = eval_implicit_cbf(m, policy, {psi}, Eigen::Vector2d::Zero(),
                                    {2.0, 8});
  CHECK(ev.traj_values.size() == 8);  // k = 1..N
  for (double v : ev.traj_values) CHECK(v == doctest::Approx(1.0));
  CHECK(ev.terminal_value == doctest::Approx(0.3));
  CHECK(ev.implicit_value == doctest::Approx(0.3));  // min(1, h_j(0))
}

TEST_CASE("scalar exponential backup flow: closed-form implicit value") {
  const ControlAffineModel m = scalar_plant();
  const BackupPolicy policy = decay_policy();
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  const Horizon horizon{1.0, 10};
  const auto ev = eval_implicit_cbf(m, policy, {identity_barrier()}, x0, horizon);

  REQUIRE(ev.traj_values.size() == 10);
  for (int k = 1; k <= 10; ++k) {
    CHECK(ev.traj_values[k - 1] ==
          doctest::Approx(std::exp(-0.1 * k)).epsilon(1e-6));
  }
  CHECK(ev.terminal_value ==
        doctest::Approx(std::exp(-1.0) - 0.1).epsilon(1e-6));
  CHECK(ev.implicit_value ==
        doctest::Approx(std::exp(-1.0) - 0.1).epsilon(1e-6));  // ~0.2679
}

TEST_CASE("pullback gradients match finite differences of the composite") {
  const ControlAffineModel m = scalar_plant();
  const BackupPolicy policy = decay_policy();
  const Horizon horizon{1.0, 10};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> span(0.3, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, span(rng));
    const auto ev = eval_implicit_cbf(m, policy, {identity_barrier()}, x0, horizon);
    for (int k = 1; k <= 10; ++k) {
      // composite psi(phi(tau_k, .)) evaluated by re-integration
      const auto composite = [&](const Eigen::VectorXd& x) {
        const auto e = eval_implicit_cbf(m, policy, {identity_barrier()}, x, horizon);
        return e.traj_values[k - 1];
      };
      const Eigen::VectorXd fd = testing::fd_gradient(composite, x0, 1e-6);
      const double rel = (ev.traj_gradients[k - 1] - fd).norm() /
                         std::max(1.0, fd.norm());
      CHECK(rel <= 1e-4);
    }
  }
}

TEST_CASE("aggregated value and membership") {
  ImplicitCbfEval a, b, c;
  a.implicit_value = -0.2;
  b.implicit_value = 0.3;
  c.implicit_value = 0.2;
  CHECK(aggregated_value({a}) == doctest::Approx(-0.2));
  CHECK(aggregated_value({b, a, c}) == doctest::Approx(0.3));
  CHECK(aggregated_value({b, a, c}) ==
        doctest::Approx(order_statistic({-0.2, 0.3, 0.2}, 1)));
  CHECK_THROWS_AS(aggregated_value({}), std::invalid_argument);

  const auto [inside, margin] = membership({a, c});
  CHECK(inside);
  CHECK(margin == doctest::Approx(0.2));
  const auto [inside2, margin2] = membership({a});
  CHECK(!inside2);
  CHECK(margin2 == doctest::Approx(-0.2));
}

TEST_CASE("assembled rows: counts, gaps and the p = 1 degeneracy") {
  const ControlAffineModel m = scalar_plant();
  const BackupPolicy policy = decay_policy();
  const Horizon horizon{1.0, 10};
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  const ScaleFunction rho;

  auto ev = eval_implicit_cbf(m, policy, {identity_barrier()}, x0, horizon);
  const double h_agg = aggregated_value({ev});
  auto rows = assemble_implicit_constraints({ev}, h_agg, rho, m, x0);
  // one row per (policy, sample) pair plus one terminal row
  CHECK(rows.size() == 11);  // p (N + 1) with p = 1, N = 10

  // the minimizing row has zero gap; others are nonnegative
  int zero_gaps = 0;
  for (const auto& row : rows) {
    CHECK(row.gap >= 0.0);
    if (row.gap == 0.0) ++zero_gaps;
  }
  CHECK(zero_gaps >= 1);

  // with tau_0 included the count grows by one sample row per policy
  Horizon with_zero = horizon;
  with_zero.include_tau0 = true;
  auto ev0 = eval_implicit_cbf(m, policy, {identity_barrier()}, x0, with_zero);
  auto rows0 = assemble_implicit_constraints({ev0}, aggregated_value({ev0}),
                                             rho, m, x0);
  CHECK(rows0.size() == 12);  // p (N + 2)
}

TEST_CASE("two policies: the weaker policy's rows carry positive gaps") {
  const ControlAffineModel m = scalar_plant();
  const BackupPolicy strong = decay_policy();
  BackupPolicy weak = decay_policy();
  weak.id = 1;
  weak.terminal_barrier.value = [](const Eigen::VectorXd& x) {
    return x[0] - 0.5;  // smaller terminal set margin
  };
  const Horizon horizon{1.0, 10};
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  const ScaleFunction rho;

  auto e1 = eval_implicit_cbf(m, strong, {identity_barrier()}, x0, horizon);
  auto e2 = eval_implicit_cbf(m, weak, {identity_barrier()}, x0, horizon);
  REQUIRE(e1.implicit_value > e2.implicit_value);
  const double h_agg = aggregated_value({e1, e2});
  const auto rows = assemble_implicit_constraints({e1, e2}, h_agg, rho, m, x0);
  CHECK(rows.size() == 22);
  // rows of the weaker policy with value below h_agg must have gap > 0
  for (std::size_t i = 11; i < 22; ++i) {
    if (rows[i].value < h_agg) CHECK(rows[i].gap > 0.0);
  }
}

TEST_CASE("membership agrees with the per-policy brute-force check") {
  const ControlAffineModel m = scalar_plant();
  const BackupPolicy policy = decay_policy();
  const Horizon horizon{1.0, 10};
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> span(-0.5, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, span(rng));
    const auto ev = eval_implicit_cbf(m, policy, {identity_barrier()}, x0, horizon);
    // brute force: re-integrate and check every sampled condition
    const VectorField field = backup_field(m, policy);
    const auto flow = integrate_flow(field, x0, horizon.T, horizon.N);
    bool all_ok = flow.back().state[0] - 0.1 >= 0.0;
    for (int k = 1; k <= horizon.N; ++k) {
      all_ok = all_ok && flow[k].state[0] >= 0.0;
    }
    CHECK(membership({ev}).first == all_ok);
  }
}

TEST_CASE("backup field jacobian is consistent with finite differences") {
  const ControlAffineModel m = scalar_plant();
  const BackupPolicy policy = decay_policy();
  const VectorField field = backup_field(m, policy);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.7);
  const Eigen::MatrixXd fd = testing::fd_jacobian(field.eval, x, 1e-6);
  CHECK((field.jacobian(x) - fd).norm() <= 1e-6);
}

TEST_SUITE_END();
