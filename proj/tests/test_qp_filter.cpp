#include <doctest.h>

#include <cmath>
#include <random>

#include "ccbf/qp_filter.hpp"
#include "ccbf/testing/oracles.hpp"

using namespace ccbf;

namespace {

// 1D single integrator xdot = u.
ControlAffineModel integrator_1d() {
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

Barrier affine_barrier(double slope, double offset) {
  Barrier b;
  b.value = [slope, offset](const Eigen::VectorXd& x) {
    return slope * x[0] + offset;
  };
  b.gradient = [slope](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, slope);
  };
  return b;
}

// Exhaustive scan over a u-grid: is any u in [lo, hi] feasible for the rows
// hdot_j >= bound_j?
bool grid_feasible(const ControlAffineModel& m, const Eigen::VectorXd& x,
                   const std::vector<Barrier>& barriers,
                   const std::vector<double>& bounds, double lo, double hi) {
  const Eigen::VectorXd f = m.drift(x);
  const Eigen::MatrixXd g = m.input_matrix(x);
  for (double u = lo; u <= hi; u += (hi - lo) / 2000.0) {
    bool ok = true;
    for (std::size_t j = 0; j < barriers.size(); ++j) {
      const Eigen::VectorXd grad = barriers[j].gradient(x);
      const double hdot = grad.dot(f) + (g.transpose() * grad)[0] * u;
      if (hdot < bounds[j]) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE_BEGIN("qp_filter");

TEST_CASE("polytope_from_ball geometry") {
  const InputRows square = polytope_from_ball(1.0, 4);
  CHECK(square.count() == 4);
  // axis-aligned diamond with apothem cos(45 deg)
  CHECK(square.b[0] == doctest::Approx(std::cos(M_PI / 4)));
  CHECK(square.contains(Eigen::Vector2d(0.0, 0.0)));
  CHECK((square.A * Eigen::Vector2d(0.0, 0.0) - square.b).maxCoeff() < 0.0);

  CHECK_THROWS_AS(polytope_from_ball(1.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(polytope_from_ball(1.0, 5), std::invalid_argument);

  // Random boundary points of the polytope stay inside the ball.
  const InputRows poly = polytope_from_ball(0.5, 16);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
  for (int i = 0; i < 200; ++i) {
    Eigen::Vector2d dir(std::cos(angle(rng)), std::sin(angle(rng)));
    // scale dir to the polytope boundary: max t with A (t dir) <= b
    double t = std::numeric_limits<double>::infinity();
    for (int r = 0; r < poly.count(); ++r) {
      const double a = poly.A.row(r).dot(dir);
      if (a > 0) t = std::min(t, poly.b[r] / a);
    }
    CHECK((t * dir).norm() <= 0.5 + 1e-12);
  }
}

TEST_CASE("standard filter leaves a feasible nominal input untouched") {
  const ControlAffineModel m = integrator_1d();
  const std::vector<Barrier> barriers = {affine_barrier(1.0, 0.0)};
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2.0);
  const Eigen::VectorXd u_des = Eigen::VectorXd::Constant(1, 0.5);
  const auto res = filter_standard(m, x, u_des, barriers, ClassKappaE(1.0),
                                   box_input_rows(1.0, 1));
  REQUIRE(res.optimal());
  CHECK(res.u[0] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("standard filter clips against the barrier (hand KKT)") {
  // h(x) = x at x = 0: row u >= 0; nominal -2 projects to 0.
  const ControlAffineModel m = integrator_1d();
  const std::vector<Barrier> barriers = {affine_barrier(1.0, 0.0)};
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd u_des = Eigen::VectorXd::Constant(1, -2.0);
  const auto res = filter_standard(m, x, u_des, barriers, ClassKappaE(1.0),
                                   box_input_rows(1.0, 1));
  REQUIRE(res.optimal());
  CHECK(res.u[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(res.qp.kkt_residual <= 1e-8);
}

TEST_CASE("standard filter reports infeasible rows") {
  // at x = 0: h = -2, alpha(h) = -2 -> row u >= 2 with U = [-1, 1].
  const ControlAffineModel m = integrator_1d();
  const std::vector<Barrier> barriers = {affine_barrier(1.0, -2.0)};
  const auto res = filter_standard(m, Eigen::VectorXd::Zero(1),
                                   Eigen::VectorXd::Zero(1), barriers,
                                   ClassKappaE(1.0), box_input_rows(1.0, 1));
  CHECK(res.qp.status == QpStatus::Infeasible);
}

TEST_CASE("combinatorial filter reduces to standard for p = 1") {
  const ControlAffineModel m = integrator_1d();
  const std::vector<Barrier> barriers = {affine_barrier(1.0, 0.3)};
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.4);
  const Eigen::VectorXd u_des = Eigen::VectorXd::Constant(1, -3.0);
  const auto std_res = filter_standard(m, x, u_des, barriers, ClassKappaE(1.0),
                                       box_input_rows(1.0, 1));
  const auto comb_res =
      filter_combinatorial(m, x, u_des, barriers, CompositeSpec{},
                           ClassKappaE(1.0), box_input_rows(1.0, 1));
  REQUIRE(std_res.optimal());
  REQUIRE(comb_res.optimal());
  CHECK(std::abs(std_res.u[0] - comb_res.u[0]) <= 1e-12);
  CHECK((std_res.problem.G - comb_res.problem.G).cwiseAbs().maxCoeff() == 0.0);
  CHECK((std_res.problem.d - comb_res.problem.d).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("disjunction rescues an infeasible conjunction") {
  // Two barriers pulling in opposite directions; x inside C_1, far below C_2.
  const ControlAffineModel m = integrator_1d();
  const std::vector<Barrier> barriers = {affine_barrier(1.0, 0.0),
                                         affine_barrier(-1.0, -3.0)};
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.5);
  const Eigen::VectorXd u_des = Eigen::VectorXd::Zero(1);
  const ClassKappaE alpha(1.0);
  const InputRows box = box_input_rows(1.0, 1);

  // Standard (conjunctive) rows: h1 = 0.5 -> u >= -0.5; h2 = -3.5 ->
  // -u >= 3.5, i.e. u <= -3.5: infeasible within the box.
  const auto std_res = filter_standard(m, x, u_des, barriers, alpha, box);
  CHECK(std_res.qp.status == QpStatus::Infeasible);
  {
    std::vector<double> bounds = {-alpha(0.5), -alpha(-3.5)};
    CHECK(!grid_feasible(m, x, barriers, bounds, -1.0, 1.0));
  }

  // Combinatorial rows with h = max = 0.5: row j gets
  // -alpha(h + |h_j - h|): j=1 -> -0.5, j=2 -> -alpha(0.5 + 4) = -4.5.
  const auto comb_res = filter_combinatorial(m, x, u_des, barriers,
                                             CompositeSpec{}, alpha, box);
  REQUIRE(comb_res.optimal());
  {
    std::vector<double> bounds = {-alpha(0.5), -alpha(0.5 + 4.0)};
    CHECK(grid_feasible(m, x, barriers, bounds, -1.0, 1.0));
  }
  CHECK(comb_res.u[0] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("generalized combinatorial filter: tight barriers keep omega zero") {
  const ControlAffineModel m = integrator_1d();
  // identical barriers: all tight, rho terms vanish
  const std::vector<Barrier> barriers = {affine_barrier(1.0, 0.2),
                                         affine_barrier(1.0, 0.2)};
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd u_des = Eigen::VectorXd::Constant(1, -2.0);
  const auto gen = filter_gen_combinatorial(
      m, x, u_des, barriers, CompositeSpec{}, ClassKappaE(1.0),
      ScaleFunction(), 0.1, box_input_rows(1.0, 1));
  const auto std_res = filter_standard(m, x, u_des, barriers, ClassKappaE(1.0),
                                       box_input_rows(1.0, 1));
  REQUIRE(gen.optimal());
  REQUIRE(std_res.optimal());
  CHECK(gen.omega == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(gen.u[0] == doctest::Approx(std_res.u[0]).epsilon(1e-9));
}

TEST_CASE("generalized combinatorial filter relaxes far-outside rows") {
  const ControlAffineModel m = integrator_1d();
  const std::vector<Barrier> barriers = {affine_barrier(1.0, 0.0),
                                         affine_barrier(-1.0, -3.0)};
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.5);
  const Eigen::VectorXd u_des = Eigen::VectorXd::Zero(1);
  const ClassKappaE alpha(1.0);
  const ScaleFunction rho;
  const auto res = filter_gen_combinatorial(m, x, u_des, barriers,
                                            CompositeSpec{}, alpha, rho, 0.1,
                                            box_input_rows(1.0, 1));
  REQUIRE(res.optimal());
  CHECK(res.omega > 0.0);
  // Row 2 satisfied exactly through the relaxation: hdot_2 + alpha(h_2) +
  // omega rho(h_2 - h) >= 0 with h_2 = -3.5, h = 0.5.
  const double hdot2 = -res.u[0];
  const double slack = hdot2 + alpha(-3.5) + res.omega * rho(-3.5 - 0.5);
  CHECK(slack >= -1e-8);
  // and the relaxation is what makes it satisfiable:
  CHECK(hdot2 + alpha(-3.5) < 0.0);
}

TEST_CASE("feasibility status is invariant to the omega weight") {
  const ControlAffineModel m = integrator_1d();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> span(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const std::vector<Barrier> barriers = {affine_barrier(1.0, span(rng)),
                                           affine_barrier(-1.0, span(rng))};
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, span(rng));
    const Eigen::VectorXd u_des = Eigen::VectorXd::Constant(1, span(rng));
    const auto a = filter_gen_combinatorial(
        m, x, u_des, barriers, CompositeSpec{}, ClassKappaE(1.0),
        ScaleFunction(), 0.1, box_input_rows(1.0, 1));
    const auto b = filter_gen_combinatorial(
        m, x, u_des, barriers, CompositeSpec{}, ClassKappaE(1.0),
        ScaleFunction(), 1.0, box_input_rows(1.0, 1));
    CHECK(a.qp.status == b.qp.status);
  }
}

TEST_CASE("aggregated implicit filter: stationary model hand KKT") {
  // f = 0, g = I, psi linear: rows reduce to a single half-space on u and
  // the solution is the projection of the nominal onto it.
  std::vector<ConstraintRow> rows;
  ConstraintRow row;
  row.u_coeff = Eigen::Vector2d(1.0, 0.0);  // grad' g
  row.drift_term = 0.0;
  row.value = 0.25;  // psi at the stationary samples
  row.gap = 0.0;
  rows.push_back(row);

  const Eigen::Vector2d u_des(-2.0, 0.7);
  const auto res = filter_aggregated_implicit(u_des, rows, ClassKappaE(1.0),
                                              0.1, box_input_rows(5.0, 2));
  REQUIRE(res.optimal());
  // constraint: u_1 >= -alpha(0.25) = -0.25; projection of (-2, 0.7)
  CHECK(res.u[0] == doctest::Approx(-0.25).epsilon(1e-9));
  CHECK(res.u[1] == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(res.omega == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("aggregated implicit with p = 1 and zero gaps equals single-backup") {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < 100; ++i) {
    // stationary flows make every row value equal h_agg, so all gaps vanish
    std::vector<ConstraintRow> rows;
    const double v = gauss(rng);
    for (int k = 0; k < 6; ++k) {
      ConstraintRow row;
      row.u_coeff = Eigen::Vector2d(gauss(rng), gauss(rng));
      row.drift_term = gauss(rng);
      row.value = v;
      row.gap = 0.0;
      rows.push_back(row);
    }
    const Eigen::Vector2d u_des(gauss(rng), gauss(rng));
    const auto agg = filter_aggregated_implicit(u_des, rows, ClassKappaE(1.0),
                                                0.1, box_input_rows(3.0, 2));
    const auto single = filter_backup_single(u_des, rows, ClassKappaE(1.0),
                                             box_input_rows(3.0, 2));
    REQUIRE(agg.qp.status == single.qp.status);
    if (agg.optimal()) {
      CHECK((agg.u - single.u).norm() <= 1e-9);
      CHECK(agg.omega <= 1e-9);
    }
  }
}

TEST_CASE("omega stays zero iff no relaxable row is active") {
  // When the unrelaxed optimum only activates zero-gap rows, omega = 0; when
  // a positive-gap row is active there, the relaxed problem strictly
  // improves by lifting omega off zero.
  std::vector<ConstraintRow> rows(2);
  rows[0].u_coeff = Eigen::Vector2d(1.0, 0.0);
  rows[0].drift_term = 0.0;
  rows[0].value = 0.5;
  rows[0].gap = 0.0;  // the tight row
  rows[1].u_coeff = Eigen::Vector2d(0.0, 1.0);
  rows[1].drift_term = 0.0;
  rows[1].value = -1.0;
  rows[1].gap = 1.5;  // relaxable row

  const ClassKappaE alpha(1.0);
  const InputRows box = box_input_rows(5.0, 2);

  // nominal violating only the tight row: omega stays zero
  {
    const Eigen::Vector2d u_des(-3.0, 2.0);
    const auto res = filter_aggregated_implicit(u_des, rows, alpha, 0.5, box);
    REQUIRE(res.optimal());
    CHECK(res.omega <= 1e-9);
    CHECK(res.u[0] == doctest::Approx(-alpha(0.5)).epsilon(1e-9));
    CHECK(res.u[1] == doctest::Approx(2.0).epsilon(1e-9));
  }
  // nominal pressing on the relaxable row: omega lifts off zero even though
  // the unrelaxed rows are feasible
  {
    const Eigen::Vector2d u_des(0.0, -3.0);
    const auto unrelaxed = filter_backup_single(u_des, rows, alpha, box);
    REQUIRE(unrelaxed.optimal());
    const auto res = filter_aggregated_implicit(u_des, rows, alpha, 0.5, box);
    REQUIRE(res.optimal());
    CHECK(res.omega > 1e-6);
  }
}

TEST_CASE("filter QP solutions carry certified KKT residuals") {
  const ControlAffineModel m = integrator_1d();
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < 100; ++i) {
    const std::vector<Barrier> barriers = {affine_barrier(1.0, gauss(rng)),
                                           affine_barrier(-1.0, gauss(rng))};
    const auto res = filter_gen_combinatorial(
        m, Eigen::VectorXd::Constant(1, gauss(rng)),
        Eigen::VectorXd::Constant(1, gauss(rng)), barriers, CompositeSpec{},
        ClassKappaE(1.0), ScaleFunction(), 0.1, box_input_rows(1.0, 1));
    if (res.optimal()) {
      CHECK(res.qp.kkt_residual <= 1e-8);
    }
  }
}

TEST_SUITE_END();
