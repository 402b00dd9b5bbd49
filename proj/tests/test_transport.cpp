#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "otube/transport.hpp"

using namespace otube;

namespace {

VectorXd vec1(double a) {
  VectorXd v(1);
  v << a;
  return v;
}

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

MatrixXd random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  MatrixXd M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = unif(rng);
  return M;
}

DiscreteDistributiond random_distribution(std::mt19937_64& rng, Index d, Index n,
                                          bool uniform = false) {
  VectorXd w;
  if (uniform) {
    w = VectorXd::Constant(n, 1.0 / double(n));
  } else {
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    w.resize(n);
    for (Index i = 0; i < n; ++i) w(i) = unif(rng);
    w /= w.sum();
  }
  return DiscreteDistributiond(random_matrix(rng, d, n) * 2.0, w);
}

// Brute force over all permutation couplings; optimal for uniform marginals
// of equal size (a Birkhoff vertex attains the LP optimum).
double permutation_bruteforce(const TransportationCostd& c, const DiscreteDistributiond& P,
                              const DiscreteDistributiond& Q) {
  REQUIRE(P.size() == Q.size());
  std::vector<Index> perm(P.size());
  std::iota(perm.begin(), perm.end(), Index(0));
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Index i = 0; i < P.size(); ++i)
      total += evaluate_cost(c, VectorXd(P.atom(i) - Q.atom(perm[i])));
    best = std::min(best, total / double(P.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

void check_plan_marginal_consistency(const TransportPland& plan, const DiscreteDistributiond& P,
                                     const DiscreteDistributiond& Q) {
  CHECK((plan.coupling.rowwise().sum() - P.weights()).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((plan.coupling.colwise().sum().transpose() - Q.weights()).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(plan.coupling.minCoeff() >= 0.0);
}

}  // namespace

TEST_CASE("evaluate_cost by kind") {
  auto sq = TransportationCostd::sq_euclidean(2);
  CHECK(evaluate_cost(sq, vec2(3.0, 4.0)) == doctest::Approx(25.0).epsilon(1e-15));
  CHECK(evaluate_cost(sq, vec2(0.0, 0.0)) == 0.0);

  auto abs1 = TransportationCostd::power_norm(1.0);
  CHECK(evaluate_cost(abs1, vec1(-2.0)) == doctest::Approx(2.0).epsilon(1e-15));

  MatrixXd M(2, 2);
  M << 2.0, 1.0, 0.0, 3.0;
  auto composed = TransportationCostd::sq_euclidean_composed(M);
  VectorXd z = vec2(0.7, -0.4);
  CHECK(evaluate_cost(composed, z) == doctest::Approx((M * z).squaredNorm()).epsilon(1e-14));

  CHECK_THROWS_AS(evaluate_cost(sq, vec1(1.0)), std::invalid_argument);
  CHECK_THROWS_AS(TransportationCostd::power_norm(0.5), std::invalid_argument);
}

TEST_CASE("composed cost equals the singular-value expansion") {
  // |pinv(D) z|^2 = sum_i (1/sigma_i^2) |u_i' z|^2 for full row-rank D
  std::mt19937_64 rng(5);
  MatrixXd D = random_matrix(rng, 2, 6);
  Eigen::JacobiSVD<MatrixXd> svd(D, Eigen::ComputeThinU | Eigen::ComputeThinV);
  MatrixXd pinv = svd.matrixV() * svd.singularValues().cwiseInverse().asDiagonal() *
                  svd.matrixU().transpose();
  auto c = TransportationCostd::sq_euclidean_composed(pinv);
  for (int k = 0; k < 10; ++k) {
    VectorXd z = random_matrix(rng, 2, 1);
    double expansion = 0.0;
    for (Index i = 0; i < 2; ++i) {
      const double proj = svd.matrixU().col(i).dot(z);
      expansion += proj * proj / (svd.singularValues()(i) * svd.singularValues()(i));
    }
    CHECK(evaluate_cost(c, z) == doctest::Approx(expansion).epsilon(1e-10));
  }
}

TEST_CASE("discrepancy between nearby diracs in 1-D") {
  // T(delta_0, delta_sqrt(eps)) = eps under the squared scalar distance
  const double eps = 0.83;
  auto c = TransportationCostd::sq_euclidean(1);
  auto [value, plan] = ot_discrepancy(c, dirac(vec1(0.0)), dirac(vec1(std::sqrt(eps))));
  CHECK(value == doctest::Approx(eps).epsilon(1e-14));
  CHECK(plan.coupling(0, 0) == 1.0);
}

TEST_CASE("mass escaping to infinity keeps the discrepancy finite") {
  // T(delta_0, (eps/n^2) delta_n + (1 - eps/n^2) delta_0) = eps
  const double eps = 0.4;
  auto c = TransportationCostd::sq_euclidean(1);
  for (double n : {5.0, 50.0, 500.0}) {
    MatrixXd atoms(1, 2);
    atoms << n, 0.0;
    VectorXd w(2);
    w << eps / (n * n), 1.0 - eps / (n * n);
    auto Q = DiscreteDistributiond(atoms, w);
    CHECK(ot_discrepancy(c, dirac(vec1(0.0)), Q).first == doctest::Approx(eps).epsilon(1e-10));
  }
}

TEST_CASE("self-discrepancy vanishes with the identity coupling") {
  std::mt19937_64 rng(7);
  auto P = random_distribution(rng, 2, 4);
  auto [value, plan] = ot_discrepancy(TransportationCostd::sq_euclidean(2), P, P);
  CHECK(value <= 1e-12);
  CHECK((plan.coupling.diagonal() - P.weights()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("LP optimum matches permutation brute force on uniform instances") {
  std::mt19937_64 rng(13);
  auto c = TransportationCostd::sq_euclidean(2);
  for (int trial = 0; trial < 30; ++trial) {
    auto P = random_distribution(rng, 2, 3, /*uniform=*/true);
    auto Q = random_distribution(rng, 2, 3, /*uniform=*/true);
    auto [value, plan] = ot_discrepancy(c, P, Q);
    CHECK(value == doctest::Approx(permutation_bruteforce(c, P, Q)).epsilon(1e-11));
    check_plan_marginal_consistency(plan, P, Q);
  }
}

TEST_CASE("dirac closed form agrees with the simplex path") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = trial % 2 == 0 ? TransportationCostd::sq_euclidean(2)
                            : TransportationCostd::power_norm(1.0 + trial % 3);
    VectorXd x = random_matrix(rng, 2, 1);
    auto P = dirac(VectorXd(x));
    auto Q = random_distribution(rng, 2, 5);

    double closed_form = 0.0;
    MatrixXd row(1, Q.size());
    for (Index j = 0; j < Q.size(); ++j) {
      row(0, j) = evaluate_cost(c, VectorXd(x - Q.atom(j)));
      closed_form += Q.weight(j) * row(0, j);
    }
    // the public path takes the closed form; the raw simplex must agree
    CHECK(ot_discrepancy(c, P, Q).first == doctest::Approx(closed_form).epsilon(1e-13));
    auto lp = transport_simplex(row, P.weights(), Q.weights());
    CHECK(lp.objective == doctest::Approx(closed_form).epsilon(1e-11));
  }
}

TEST_CASE("plan marginals and objective are consistent on random pairs") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 25; ++trial) {
    const Index d = 1 + trial % 3;
    auto c = TransportationCostd::sq_euclidean(d);
    auto P = random_distribution(rng, d, 2 + trial % 5);
    auto Q = random_distribution(rng, d, 2 + (trial + 2) % 5);
    auto [value, plan] = ot_discrepancy(c, P, Q);
    check_plan_marginal_consistency(plan, P, Q);

    double recomputed = 0.0;
    for (Index i = 0; i < P.size(); ++i)
      for (Index j = 0; j < Q.size(); ++j)
        recomputed += plan.coupling(i, j) * evaluate_cost(c, VectorXd(P.atom(i) - Q.atom(j)));
    CHECK(value == doctest::Approx(recomputed).epsilon(1e-11));
  }
}

TEST_CASE("symmetric costs give a symmetric discrepancy") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    auto c = trial % 2 == 0 ? TransportationCostd::sq_euclidean(2)
                            : TransportationCostd::power_norm(1.0);
    auto P = random_distribution(rng, 2, 4);
    auto Q = random_distribution(rng, 2, 3);
    CHECK(ot_discrepancy(c, P, Q).first ==
          doctest::Approx(ot_discrepancy(c, Q, P).first).epsilon(1e-10));
  }
}

TEST_CASE("pointwise cost domination is inherited by the discrepancy") {
  // c2 = |2z|^2 >= c1 = |z|^2, so T_c1 <= T_c2 (Lemma on monotone costs)
  std::mt19937_64 rng(37);
  auto c1 = TransportationCostd::sq_euclidean(2);
  auto c2 = TransportationCostd::sq_euclidean_composed(MatrixXd(2.0 * MatrixXd::Identity(2, 2)));
  for (int trial = 0; trial < 10; ++trial) {
    auto P = random_distribution(rng, 2, 3);
    auto Q = random_distribution(rng, 2, 4);
    const double t1 = ot_discrepancy(c1, P, Q).first;
    const double t2 = ot_discrepancy(c2, P, Q).first;
    CHECK(t1 <= t2 + 1e-9);
    CHECK(t2 == doctest::Approx(4.0 * t1).epsilon(1e-10));
  }
}

TEST_CASE("ambiguity set membership") {
  std::mt19937_64 rng(41);
  auto c = TransportationCostd::sq_euclidean(2);

  SUBCASE("the center always belongs, even at radius zero") {
    auto P = random_distribution(rng, 2, 4);
    for (double eps : {0.0, 0.1, 2.0}) {
      AmbiguitySetd ball(P, c, eps);
      CHECK(contains(ball, P));
    }
  }

  SUBCASE("dirac membership reflects the cost geometry") {
    // delta_x1 in B_eps(delta_x0) iff c(x0 - x1) <= eps
    VectorXd x0 = vec2(0.2, -0.4), x1 = vec2(1.0, 0.5);
    const double d = evaluate_cost(c, VectorXd(x0 - x1));
    AmbiguitySetd tight(dirac(x0), c, d + 1e-6);
    AmbiguitySetd small(dirac(x0), c, d - 1e-3);
    CHECK(contains(tight, dirac(x1)));
    CHECK(!contains(small, dirac(x1)));
  }

  SUBCASE("membership matches the LP distance on random instances") {
    for (int trial = 0; trial < 20; ++trial) {
      auto P = random_distribution(rng, 2, 3);
      auto Q = random_distribution(rng, 2, 4);
      const double d = ot_discrepancy(c, P, Q).first;
      CHECK(contains(AmbiguitySetd(P, c, d + 1e-6), Q));
      CHECK(!contains(AmbiguitySetd(P, c, std::max(0.0, d - 1e-3)), Q, 1e-7));
    }
  }

  SUBCASE("radius monotonicity: growing the radius keeps members") {
    for (int trial = 0; trial < 10; ++trial) {
      auto P = random_distribution(rng, 2, 3);
      auto Q = random_distribution(rng, 2, 3);
      std::uniform_real_distribution<double> unif(0.0, 3.0);
      const double e1 = unif(rng), e2 = e1 + unif(rng);
      if (contains(AmbiguitySetd(P, c, e1), Q)) CHECK(contains(AmbiguitySetd(P, c, e2), Q));
    }
  }
}

TEST_CASE("gaussian moment identity via the dirac closed form") {
  // T(delta_0, N(0, eps)) = eps; checked in sample form within 3 standard errors
  const double eps = 0.6;
  std::mt19937_64 rng(43);
  std::normal_distribution<double> normal(0.0, std::sqrt(eps));
  const int n = 20000;
  MatrixXd samples(1, n);
  for (int i = 0; i < n; ++i) samples(0, i) = normal(rng);
  auto value = ot_discrepancy(TransportationCostd::sq_euclidean(1), dirac(vec1(0.0)),
                              empirical(samples))
                   .first;
  const double se = std::sqrt(2.0) * eps / std::sqrt(double(n));
  CHECK(std::abs(value - eps) <= 3.0 * se);
}

TEST_CASE("error paths") {
  auto c = TransportationCostd::sq_euclidean(2);
  auto P1 = dirac(vec1(0.0));
  auto P2 = dirac(vec2(0.0, 0.0));
  CHECK_THROWS_AS(ot_discrepancy(c, P1, P2), std::invalid_argument);

  MatrixXd cost(2, 2);
  cost.setOnes();
  VectorXd p(2), q(2);
  p << 0.5, 0.5;
  q << 0.9, 0.2;
  CHECK_THROWS_AS(transport_simplex(cost, p, q), std::invalid_argument);
  CHECK_THROWS_AS(AmbiguitySetd(P2, c, -0.5), std::invalid_argument);
}
