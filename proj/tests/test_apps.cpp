#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "otube/apps.hpp"

using namespace otube;

namespace {

LtiSystemd paper_system() {
  MatrixXd A(2, 2);
  A << 0.5, -0.5, 1.0, 0.5;
  MatrixXd I2 = MatrixXd::Identity(2, 2);
  auto K = lqr_gain(A, I2, I2, I2);
  return LtiSystemd(A, I2, MatrixXd(0.1 * I2), K, VectorXd::Zero(2));
}

MatrixXd octagon_directions() {
  MatrixXd dirs(8, 2);
  int row = 0;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j) {
      if (i == 0 && j == 0) continue;
      dirs(row, 0) = i;
      dirs(row, 1) = j;
      ++row;
    }
  return dirs;
}

Polytoped box_target() {
  MatrixXd dirs(4, 2);
  dirs << 1, 0, -1, 0, 0, 1, 0, -1;
  VectorXd offsets(4);
  offsets << -2.0, 1.0, -2.0, 1.0;  // [1,2] x [1,2]
  return Polytoped(dirs, offsets);
}

ExperimentConfigd paper_config(std::uint64_t seed = 7) {
  ExperimentConfigd config{paper_system()};
  config.horizon = 10;
  config.gamma = 0.05;
  config.directions = octagon_directions();
  config.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("gaussian sampling is deterministic per seed") {
  auto b1 = sample_noise_batch<double>(2, 5, 4, 42);
  auto b2 = sample_noise_batch<double>(2, 5, 4, 42);
  auto b3 = sample_noise_batch<double>(2, 5, 4, 43);
  CHECK((b1.trajectories() - b2.trajectories()).norm() == 0.0);
  CHECK((b1.trajectories() - b3.trajectories()).norm() != 0.0);

  // roughly standard normal
  std::mt19937_64 rng(7);
  MatrixXd big = gaussian_matrix<double>(rng, 200, 200);
  CHECK(std::abs(big.mean()) < 0.02);
  CHECK(std::abs(big.array().square().mean() - 1.0) < 0.02);
}

TEST_CASE("reachability on the benchmark experiment") {
  auto config = paper_config();
  auto results = reachability(config);
  REQUIRE(results.size() == 3);  // default statistical sweep

  SUBCASE("every radius solves and re-verifies") {
    for (const auto& r : results) {
      CHECK(r.report.status == SolveStatus::Optimal);
      CHECK(r.offsets.size() == 8);
      CHECK(r.post_hoc_worst_case <= 1e-6);
    }
  }

  SUBCASE("offset sums shrink as the radius grows") {
    for (size_t k = 0; k + 1 < results.size(); ++k) {
      CHECK(results[k].epsilon < results[k + 1].epsilon);
      CHECK(results[k + 1].offset_sum <= results[k].offset_sum + 1e-7);
    }
  }

  SUBCASE("results are reproducible for a fixed seed") {
    auto again = reachability(config);
    for (size_t k = 0; k < results.size(); ++k) {
      CHECK(results[k].offset_sum == again[k].offset_sum);
      CHECK((results[k].offsets - again[k].offsets).norm() == 0.0);
    }
  }
}

TEST_CASE("radius zero with one zero trajectory pins the halfspaces") {
  auto config = paper_config();
  config.epsilons = {0.0};
  config.training = TrajectoryBatchd(MatrixXd::Zero(20, 1), 10, 2);
  auto results = reachability(config);
  REQUIRE(results.size() == 1);
  REQUIRE(results[0].report.status == SolveStatus::Optimal);

  // deterministic rollout from x0 = 0 with v = 0 stays at the origin, so the
  // tightest offsets are b_j = -a_j'0 = 0
  for (Index j = 0; j < 8; ++j)
    CHECK(results[0].offsets(j) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("planning on the box target") {
  auto config = paper_config();
  config.target = box_target();
  config.epsilons = {0.0, 0.01, 0.02};
  auto plans = plan_trajectory(config);
  REQUIRE(plans.size() == 3);

  SUBCASE("all radii feasible with re-verified decisions") {
    for (const auto& p : plans) {
      CHECK(p.report.status == SolveStatus::Optimal);
      CHECK(p.feedforward.size() == 20);
      CHECK(std::isfinite(p.cost));
      CHECK(p.post_hoc_worst_case <= 1e-6);
    }
  }

  SUBCASE("steering into the target costs more as the radius grows") {
    for (size_t k = 0; k + 1 < plans.size(); ++k)
      CHECK(plans[k + 1].cost >= plans[k].cost - 1e-9);
    CHECK(plans[0].cost > 0.0);  // the target excludes the origin
  }

  SUBCASE("radius zero equals the sample-CVaR planning solution") {
    // the analytic branch is active: the worst-case CVaR at the decision
    // equals the in-sample CVaR of the steered losses
    const auto& p = plans[0];
    auto batch = sample_noise_batch<double>(2, 10, config.training_count, config.seed);
    auto oos = evaluate_out_of_sample(config.system, *config.target, p.feedforward, batch,
                                      config.gamma);
    CHECK(std::abs(oos.empirical_cvar - p.post_hoc_worst_case) <= 1e-7);
    CHECK(oos.empirical_cvar <= 1e-7);
  }
}

TEST_CASE("a target already containing the cloud needs no feedforward") {
  auto config = paper_config();
  MatrixXd dirs(4, 2);
  dirs << 1, 0, -1, 0, 0, 1, 0, -1;
  VectorXd offsets = VectorXd::Constant(4, -50.0);  // |x|_inf <= 50
  config.target = Polytoped(dirs, offsets);
  config.epsilons = {0.0, 0.01};
  auto plans = plan_trajectory(config);
  for (const auto& p : plans) {
    REQUIRE(p.report.status == SolveStatus::Optimal);
    CHECK(p.cost <= 1e-10);
  }
}

TEST_CASE("out-of-sample evaluation") {
  auto config = paper_config();

  SUBCASE("the training batch satisfies the radius-zero reachability set") {
    config.epsilons = {0.0};
    auto results = reachability(config);
    REQUIRE(results[0].report.status == SolveStatus::Optimal);
    auto batch = sample_noise_batch<double>(2, 10, config.training_count, config.seed);
    auto oos = evaluate_out_of_sample(config.system,
                                      Polytoped(config.directions, results[0].offsets),
                                      VectorXd(VectorXd::Zero(20)), batch, config.gamma);
    CHECK(oos.empirical_cvar <= 1e-6);
  }

  SUBCASE("violations fall as the radius grows") {
    auto results = reachability(config);
    auto test = sample_noise_batch<double>(2, 10, 1000, config.seed + 1);
    double first = -1, last = -1;
    for (size_t k = 0; k < results.size(); ++k) {
      auto oos = evaluate_out_of_sample(config.system,
                                        Polytoped(config.directions, results[k].offsets),
                                        VectorXd(VectorXd::Zero(20)), test, config.gamma);
      if (k == 0) first = oos.violation_fraction;
      last = oos.violation_fraction;
    }
    CHECK(last < first);
  }

  SUBCASE("a noiseless system violates all-or-nothing") {
    auto base = paper_system();
    LtiSystemd quiet(base.A, base.B, MatrixXd(0.0 * base.D), base.K, VectorXd::Ones(2));
    auto test = sample_noise_batch<double>(2, 10, 50, 3);
    for (double offset : {-10.0, 10.0}) {
      Polytoped poly(MatrixXd::Identity(1, 2), VectorXd(VectorXd::Constant(1, offset)));
      auto oos = evaluate_out_of_sample(quiet, poly, VectorXd(VectorXd::Zero(20)), test, 0.1);
      CHECK((oos.violation_fraction == 0.0 || oos.violation_fraction == 1.0));
    }
  }
}

TEST_CASE("product mode matches trajectory mode on tiny instances") {
  // one training trajectory: the product of the pooled per-step samples
  // explodes combinatorially, so keep t = 2 and n = 1
  MatrixXd A(1, 1), B(1, 1), D(1, 1), K(1, 1);
  A << 0.8;
  B << 1.0;
  D << 0.5;
  K << -0.3;
  VectorXd x0(1);
  x0 << 0.1;
  ExperimentConfigd config{LtiSystemd(A, B, D, K, x0)};
  config.horizon = 2;
  config.gamma = 0.2;
  config.epsilons = {0.05};
  config.directions = MatrixXd::Identity(1, 1);
  config.training = TrajectoryBatchd(MatrixXd(VectorXd::Ones(2)), 2, 1);

  config.mode = LiftMode::ProductEnumerate;
  auto product = reachability(config);
  config.mode = LiftMode::Trajectory;
  auto trajectory = reachability(config);
  REQUIRE(product[0].report.status == SolveStatus::Optimal);
  REQUIRE(trajectory[0].report.status == SolveStatus::Optimal);
  // identical centers here (the only trajectory is its own product), so the
  // programs coincide
  CHECK(product[0].offset_sum == doctest::Approx(trajectory[0].offset_sum).epsilon(1e-7));
}
