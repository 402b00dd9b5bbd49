#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "otube/oracle.hpp"

using namespace otube;

namespace {

MatrixXd random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  MatrixXd M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = unif(rng);
  return M;
}

VectorXd vec1(double a) {
  VectorXd v(1);
  v << a;
  return v;
}

}  // namespace

TEST_CASE("permutation oracle") {
  std::mt19937_64 rng(501);
  auto c = TransportationCostd::sq_euclidean(2);

  SUBCASE("a single pairing is its own optimum") {
    auto P = empirical(random_matrix(rng, 2, 1));
    auto Q = empirical(random_matrix(rng, 2, 1));
    const double expected = evaluate_cost(c, VectorXd(P.atom(0) - Q.atom(0)));
    CHECK(oracle::permutation_ot(c, P, Q) == doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("agrees with the LP on planar three-atom instances") {
    for (int trial = 0; trial < 25; ++trial) {
      auto P = empirical(random_matrix(rng, 2, 3));
      auto Q = empirical(random_matrix(rng, 2, 3));
      CHECK(oracle::permutation_ot(c, P, Q) ==
            doctest::Approx(ot_discrepancy(c, P, Q).first).epsilon(1e-9));
    }
  }

  SUBCASE("identical marginals cost nothing") {
    auto P = empirical(random_matrix(rng, 2, 4));
    CHECK(oracle::permutation_ot(c, P, P) == 0.0);
  }

  SUBCASE("non-uniform weights are rejected") {
    MatrixXd atoms = random_matrix(rng, 2, 2);
    VectorXd w(2);
    w << 0.7, 0.3;
    DiscreteDistributiond P(atoms, w);
    auto Q = empirical(random_matrix(rng, 2, 2));
    CHECK_THROWS_AS(oracle::permutation_ot(c, P, Q), std::invalid_argument);
  }
}

TEST_CASE("propagation trials") {
  std::mt19937_64 rng(503);

  SUBCASE("invertible maps preserve the discrepancy") {
    MatrixXd A(2, 2);
    A << 1.2, -0.3, 0.4, 0.9;
    auto P = empirical(random_matrix(rng, 2, 3));
    auto report = oracle::thm1_trial(P, A, 0.2, 40);
    CHECK(report.all_passed);
    CHECK(report.max_equality_gap <= 1e-6);
    CHECK(report.membership_mismatches == 0);
  }

  SUBCASE("the scalar doubling map") {
    MatrixXd A(1, 1);
    A << 2.0;
    auto P = dirac(vec1(0.0));
    auto report = oracle::thm1_trial(P, A, 0.3, 40);
    CHECK(report.all_passed);
  }

  SUBCASE("rank-deficient maps satisfy the one-sided inclusion") {
    MatrixXd A(2, 2);
    A << 1, 0, 0, 0;
    auto P = empirical(random_matrix(rng, 2, 3));
    auto report = oracle::thm1_trial(P, A, 0.2, 40);
    CHECK(report.max_inclusion_violation <= 1e-9);
    CHECK(report.all_passed);
  }
}

TEST_CASE("naive propagation foils") {
  SUBCASE("the zero map: the naive ball overestimates") {
    MatrixXd A(1, 1);
    A << 0.0;
    auto report = oracle::naive_foil(dirac(vec1(0.0)), A, 0.5);
    REQUIRE(report.overestimation.applicable);
    CHECK(report.true_set_checkable);
    CHECK(report.overestimation.in_approximation);
    CHECK(!report.overestimation.in_true_set);
  }

  SUBCASE("the doubling map: the naive ball underestimates") {
    MatrixXd A(1, 1);
    A << 2.0;
    auto report = oracle::naive_foil(dirac(vec1(0.0)), A, 0.5);
    CHECK(report.lipschitz_constant == doctest::Approx(2.0).epsilon(1e-14));
    REQUIRE(report.underestimation.applicable);
    CHECK(!report.underestimation.in_approximation);  // outside the naive ball
    CHECK(report.underestimation.in_true_set);        // inside the exact image
  }

  SUBCASE("the flattening diagonal map: the Lipschitz ball is conservative") {
    MatrixXd A = MatrixXd::Zero(3, 3);
    A(2, 2) = 4.0;
    auto report = oracle::naive_foil(dirac(VectorXd(VectorXd::Zero(3))), A, 0.5);
    CHECK(report.lipschitz_constant == doctest::Approx(4.0).epsilon(1e-14));
    REQUIRE(report.lipschitz_conservatism.applicable);
    CHECK(report.lipschitz_conservatism.in_approximation);  // inside the L-inflated ball
    CHECK(!report.lipschitz_conservatism.in_true_set);      // the map killed that direction
    // the same map also expands along its range
    REQUIRE(report.underestimation.applicable);
    CHECK(report.underestimation.in_true_set);
    CHECK(!report.underestimation.in_approximation);
  }
}

TEST_CASE("cvar grid certification") {
  std::mt19937_64 rng(509);

  auto make_ball = [&](double radius, Index n) {
    MatrixXd D = random_matrix(rng, 2, 4);
    auto cost = TransportationCostd::sq_euclidean_composed(pseudoinverse(D).pinv);
    return AmbiguitySetd(empirical(random_matrix(rng, 2, n)), cost, radius);
  };

  SUBCASE("radius zero reduces to the sample CVaR") {
    auto ball = make_ball(0.0, 5);
    Polytoped poly(random_matrix(rng, 3, 2), VectorXd(random_matrix(rng, 3, 1)));
    VectorXd losses(5);
    for (Index i = 0; i < 5; ++i) losses(i) = poly.loss(ball.center.atom(i));
    const double expected = cvar(losses, ball.center.weights(), 0.2);
    CHECK(std::abs(oracle::cvar_grid(ball, poly, 0.2, 200) - expected) <= 1e-6);
  }

  SUBCASE("brackets the golden-section optimum from above") {
    for (int trial = 0; trial < 6; ++trial) {
      auto ball = make_ball(0.1 + 0.15 * trial, 4);
      Polytoped poly(random_matrix(rng, 3, 2), VectorXd(random_matrix(rng, 3, 1)));
      const double grid = oracle::cvar_grid(ball, poly, 0.15, 200);
      const double golden = worst_case_cvar(ball, poly, 0.15);
      CHECK(grid >= golden - 1e-6);
      CHECK(grid - golden <= 1e-3);
    }
  }

  SUBCASE("monotone in the radius") {
    auto base = make_ball(0.0, 4);
    Polytoped poly(random_matrix(rng, 3, 2), VectorXd(random_matrix(rng, 3, 1)));
    double last = -std::numeric_limits<double>::infinity();
    for (double eps : {0.0, 0.1, 0.4, 1.0}) {
      const double value = oracle::cvar_grid(AmbiguitySetd(base.center, base.cost, eps), poly,
                                             0.2, 60);
      CHECK(value >= last - 1e-6);
      last = value;
    }
  }

  SUBCASE("resolution floor is enforced") {
    auto ball = make_ball(0.1, 3);
    Polytoped poly(random_matrix(rng, 2, 2), VectorXd(random_matrix(rng, 2, 1)));
    CHECK_THROWS_AS(oracle::cvar_grid(ball, poly, 0.2, 10), std::invalid_argument);
  }
}
