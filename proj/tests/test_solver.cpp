#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "otube/solver.hpp"

using namespace otube;

namespace {

MatrixXd random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  MatrixXd M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = unif(rng);
  return M;
}

// Exhaustive vertex enumeration: optimal basic solutions of a bounded LP lie
// on intersections of n active constraints.
double lp_bruteforce(const VectorXd& c, const MatrixXd& G, const VectorXd& h) {
  const int n = int(c.size()), m = int(G.rows());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(n);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      MatrixXd A(n, n);
      VectorXd b(n);
      for (int k = 0; k < n; ++k) {
        A.row(k) = G.row(pick[k]);
        b(k) = h(pick[k]);
      }
      Eigen::FullPivLU<MatrixXd> lu(A);
      if (!lu.isInvertible()) return;
      VectorXd x = lu.solve(b);
      if (((G * x - h).array() <= 1e-8).all()) best = std::min(best, c.dot(x));
      return;
    }
    for (int i = start; i < m; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

// Exhaustive active-set enumeration for small strictly convex QPs.
double qp_bruteforce(const MatrixXd& P, const VectorXd& q, const MatrixXd& G, const VectorXd& h) {
  const int n = int(q.size()), m = int(G.rows());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> active;
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i)) active.push_back(i);
    const int k = int(active.size());
    if (k > n) continue;
    MatrixXd kkt = MatrixXd::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n) = P;
    VectorXd rhs(n + k);
    rhs.head(n) = -q;
    for (int a = 0; a < k; ++a) {
      kkt.block(n + a, 0, 1, n) = G.row(active[a]);
      kkt.block(0, n + a, n, 1) = G.row(active[a]).transpose();
      rhs(n + a) = h(active[a]);
    }
    Eigen::FullPivLU<MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    VectorXd sol = lu.solve(rhs);
    VectorXd x = sol.head(n);
    bool ok = ((G * x - h).array() <= 1e-8).all();
    for (int a = 0; a < k && ok; ++a) ok = sol(n + a) >= -1e-8;
    if (ok) best = std::min(best, 0.5 * x.dot(P * x) + q.dot(x));
  }
  return best;
}

}  // namespace

TEST_CASE("lp textbook instance") {
  // max x + y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 -> (8/5, 6/5)
  VectorXd c(2);
  c << -1, -1;
  MatrixXd G(4, 2);
  G << 1, 2, 3, 1, -1, 0, 0, -1;
  VectorXd h(4);
  h << 4, 6, 0, 0;
  auto r = solve_lp(c, G, h);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == doctest::Approx(-2.8).epsilon(1e-10));
  CHECK(r.x(0) == doctest::Approx(1.6).epsilon(1e-9));
  CHECK(r.x(1) == doctest::Approx(1.2).epsilon(1e-9));
}

TEST_CASE("lp handles free variables and negative right-hand sides") {
  // min x s.t. -x <= -3 (x >= 3)
  VectorXd c(1);
  c << 1;
  MatrixXd G(1, 1);
  G << -1;
  VectorXd h(1);
  h << -3;
  auto r = solve_lp(c, G, h);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.x(0) == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("lp infeasibility and unboundedness are detected") {
  VectorXd c(1);
  c << 1;
  MatrixXd G(2, 1);
  G << 1, -1;
  VectorXd h(2);
  h << -1, -2;  // x <= -1 and x >= 2
  CHECK(solve_lp(c, G, h).status == SolveStatus::Infeasible);

  MatrixXd G2(1, 1);
  G2 << 1;
  VectorXd h2(1);
  h2 << 5;  // min x s.t. x <= 5 is unbounded below
  CHECK(solve_lp(c, G2, h2).status == SolveStatus::Unbounded);
}

TEST_CASE("lp agrees with vertex enumeration on random bounded instances") {
  std::mt19937_64 rng(301);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 2;
    const int m = 5 + trial % 3;
    MatrixXd G(m + 2 * n, n);
    VectorXd h(m + 2 * n);
    G.topRows(m) = random_matrix(rng, m, n);
    h.head(m) = random_matrix(rng, m, 1).cwiseAbs() + MatrixXd::Constant(m, 1, 0.2);
    // box to keep the polytope bounded
    G.middleRows(m, n) = MatrixXd::Identity(n, n);
    G.bottomRows(n) = -MatrixXd::Identity(n, n);
    h.segment(m, n).setConstant(10.0);
    h.tail(n).setConstant(10.0);
    VectorXd c = random_matrix(rng, n, 1);

    auto r = solve_lp(c, G, h);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.objective == doctest::Approx(lp_bruteforce(c, G, h)).epsilon(1e-8));
    CHECK(((G * r.x - h).array() <= 1e-8).all());
  }
}

TEST_CASE("qp projects onto a box") {
  // min |x - a|^2 with x <= b elementwise and -x <= b
  VectorXd a(3);
  a << 2.0, -3.0, 0.4;
  MatrixXd P = 2.0 * MatrixXd::Identity(3, 3);
  VectorXd q = -2.0 * a;
  MatrixXd G(6, 3);
  G << MatrixXd::Identity(3, 3), -MatrixXd::Identity(3, 3);
  VectorXd h = VectorXd::Constant(6, 1.0);
  auto r = solve_qp(P, q, G, h);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.x(1) == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(r.x(2) == doctest::Approx(0.4).epsilon(1e-7));
}

TEST_CASE("qp agrees with active-set enumeration on random instances") {
  std::mt19937_64 rng(303);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 3;
    const int m = 4 + trial % 4;
    MatrixXd root = random_matrix(rng, n, n);
    MatrixXd P = root * root.transpose() + 0.5 * MatrixXd::Identity(n, n);
    VectorXd q = random_matrix(rng, n, 1);
    MatrixXd G = random_matrix(rng, m, n);
    VectorXd h = random_matrix(rng, m, 1).cwiseAbs() + MatrixXd::Constant(m, 1, 0.1);

    auto r = solve_qp(P, q, G, h);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.objective == doctest::Approx(qp_bruteforce(P, q, G, h)).epsilon(1e-6));
    CHECK(((G * r.x - h).array() <= 1e-7).all());
  }
}

TEST_CASE("qp tolerates a singular quadratic term") {
  // only the second coordinate is penalized; the first is pinned by
  // constraints x0 <= 1, -x0 <= -1
  MatrixXd P = MatrixXd::Zero(2, 2);
  P(1, 1) = 2.0;
  VectorXd q(2);
  q << 0.0, -2.0;  // pulls x1 toward 1
  MatrixXd G(3, 2);
  G << 1, 0, -1, 0, 0, 1;
  VectorXd h(3);
  h << 1.0, -1.0, 0.25;  // x0 = 1, x1 <= 0.25
  auto r = solve_qp(P, q, G, h);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.x(1) == doctest::Approx(0.25).epsilon(1e-6));
}
