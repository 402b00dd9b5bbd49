// The two end-to-end applications: distributionally robust reachability
// analysis (grow the tightest polytope offsets certified by the robust CVaR
// constraint) and trajectory planning (cheapest feedforward steering into a
// target polytope), plus out-of-sample evaluation of the resulting decisions.
#pragma once

#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "otube/drcvar.hpp"
#include "otube/lti.hpp"
#include "otube/propagation.hpp"
#include "otube/types.hpp"

namespace otube {

enum class LiftMode { Trajectory, ProductEnumerate };

inline const char* to_string(LiftMode m) {
  return m == LiftMode::Trajectory ? "trajectory" : "product";
}

/// Deterministic standard Gaussian sampling (Box-Muller over mt19937_64, so
/// identical seeds give identical draws on every platform).
template <class Scalar>
MatrixX<Scalar> gaussian_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  MatrixX<Scalar> M(rows, cols);
  const double two_pi = 6.283185307179586;
  double spare = 0.0;
  bool has_spare = false;
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      if (has_spare) {
        M(i, j) = Scalar(spare);
        has_spare = false;
        continue;
      }
      const double u1 = (double(rng()) + 1.0) / (double(std::mt19937_64::max()) + 2.0);
      const double u2 = double(rng()) / (double(std::mt19937_64::max()) + 1.0);
      const double radius = std::sqrt(-2.0 * std::log(u1));
      M(i, j) = Scalar(radius * std::cos(two_pi * u2));
      spare = radius * std::sin(two_pi * u2);
      has_spare = true;
    }
  return M;
}

/// n standard Gaussian noise trajectories of horizon t (noise dimension r).
template <class Scalar>
TrajectoryBatch<Scalar> sample_noise_batch(Index r, int t, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return TrajectoryBatch<Scalar>(gaussian_matrix<Scalar>(rng, Index(t) * r, n), t, r);
}

template <class Scalar>
struct ExperimentConfig {
  LtiSystem<Scalar> system;
  int horizon = 1;
  Scalar gamma = Scalar(0.05);
  std::vector<Scalar> epsilons;              // empty: default statistical sweep
  MatrixX<Scalar> directions;                // J x d, reachability half-space normals
  VectorX<Scalar> offsets;                   // J, fixed offsets for cvar evaluation
  std::optional<Polytope<Scalar>> target;    // planning target
  std::optional<TrajectoryBatch<Scalar>> training;  // explicit training data
  Index training_count = 5;
  Index test_count = 1000;
  std::uint64_t seed = 0;
  VectorX<Scalar> feedforward;               // empty: zeros
  LiftMode mode = LiftMode::Trajectory;
  Index product_cap = 100000;
};

using ExperimentConfigd = ExperimentConfig<double>;

namespace detail {

template <class Scalar>
TrajectoryBatch<Scalar> training_batch(const ExperimentConfig<Scalar>& config) {
  if (config.training) return *config.training;
  return sample_noise_batch<Scalar>(config.system.noise_dim(), config.horizon,
                                    config.training_count, config.seed);
}

// per-step empirical distribution pooled over every step of every trajectory
template <class Scalar>
DiscreteDistribution<Scalar> pooled_step_samples(const TrajectoryBatch<Scalar>& batch) {
  const Index r = batch.noise_dim();
  MatrixX<Scalar> samples(r, batch.count() * batch.horizon());
  Index col = 0;
  for (Index i = 0; i < batch.count(); ++i)
    for (int k = 0; k < batch.horizon(); ++k) samples.col(col++) = batch.step(i, k);
  return empirical(samples);
}

template <class Scalar>
VectorX<Scalar> resolved_feedforward(const ExperimentConfig<Scalar>& config) {
  const Index len = Index(config.horizon) * config.system.input_dim();
  if (config.feedforward.size() == 0) return VectorX<Scalar>::Zero(len);
  if (config.feedforward.size() != len)
    throw std::invalid_argument("ExperimentConfig: feedforward must be stacked to length t*m");
  return config.feedforward;
}

template <class Scalar>
AmbiguitySet<Scalar> state_ball_for(const ExperimentConfig<Scalar>& config,
                                    const TrajectoryBatch<Scalar>& batch, Scalar eps,
                                    const VectorX<Scalar>& v) {
  AmbiguitySet<Scalar> noise_ball(
      pooled_step_samples(batch),
      TransportationCost<Scalar>::sq_euclidean(config.system.noise_dim()), eps);
  if (config.mode == LiftMode::Trajectory)
    return state_ambiguity(config.system, v, noise_ball, batch);
  return state_ambiguity(config.system, config.horizon, v, noise_ball, config.product_cap);
}

template <class Scalar>
std::vector<Scalar> resolved_epsilons(const ExperimentConfig<Scalar>& config) {
  if (!config.epsilons.empty()) return config.epsilons;
  const Index n = config.training ? config.training->count() : config.training_count;
  const Scalar rate = radius_rate(n, int(config.system.noise_dim()), Scalar(1));
  return {Scalar(0), rate / Scalar(2), rate};
}

}  // namespace detail

template <class Scalar>
struct ReachabilityResult {
  Scalar epsilon = Scalar(0);
  VectorX<Scalar> offsets;           // optimal b
  Scalar offset_sum = Scalar(0);
  Scalar post_hoc_worst_case = Scalar(0);
  SolveReport<Scalar> report;
};

using ReachabilityResultd = ReachabilityResult<double>;

/// For each radius in the sweep, the largest polytope offsets (maximal sum)
/// such that the robust CVaR constraint still certifies containment of the
/// horizon state. Solves run concurrently per radius; results are ordered as
/// the sweep. Each decision is re-verified post hoc against worst_case_cvar.
template <class Scalar>
std::vector<ReachabilityResult<Scalar>> reachability(const ExperimentConfig<Scalar>& config) {
  if (config.directions.rows() < 1)
    throw std::invalid_argument("reachability: no directions configured");
  const auto batch = detail::training_batch(config);
  const auto v = detail::resolved_feedforward(config);
  const auto epsilons = detail::resolved_epsilons(config);
  const Index J = config.directions.rows();

  auto solve_one = [&](Scalar eps) {
    ReachabilityResult<Scalar> result;
    result.epsilon = eps;
    const auto ball = detail::state_ball_for(config, batch, eps, v);
    Polytope<Scalar> poly(config.directions, VectorX<Scalar>::Zero(J));
    result.report = solve_outer(with_offset_decision(build_gamma(ball, poly, config.gamma)));
    if (result.report.status == SolveStatus::Optimal) {
      result.offsets = result.report.decision;
      result.offset_sum = result.report.objective;
      result.post_hoc_worst_case =
          worst_case_cvar(ball, Polytope<Scalar>(config.directions, result.offsets), config.gamma);
    }
    return result;
  };

  std::vector<std::future<ReachabilityResult<Scalar>>> futures;
  futures.reserve(epsilons.size());
  for (Scalar eps : epsilons)
    futures.push_back(std::async(std::launch::async, solve_one, eps));
  std::vector<ReachabilityResult<Scalar>> results;
  results.reserve(epsilons.size());
  for (auto& f : futures) results.push_back(f.get());
  return results;
}

template <class Scalar>
struct PlanningResult {
  Scalar epsilon = Scalar(0);
  VectorX<Scalar> feedforward;  // optimal stacked v, empty when infeasible
  Scalar cost = Scalar(0);      // |v|^2
  Scalar post_hoc_worst_case = Scalar(0);
  SolveReport<Scalar> report;
};

using PlanningResultd = PlanningResult<double>;

/// Cheapest stacked feedforward input steering the horizon state into the
/// target polytope under the robust CVaR constraint, per radius.
template <class Scalar>
std::vector<PlanningResult<Scalar>> plan_trajectory(const ExperimentConfig<Scalar>& config) {
  if (!config.target) throw std::invalid_argument("plan_trajectory: no target configured");
  const auto batch = detail::training_batch(config);
  const auto epsilons = detail::resolved_epsilons(config);
  const auto ops = lift(config.system, config.horizon);
  const VectorX<Scalar> zero_v =
      VectorX<Scalar>::Zero(Index(config.horizon) * config.system.input_dim());

  auto solve_one = [&](Scalar eps) {
    PlanningResult<Scalar> result;
    result.epsilon = eps;
    const auto base_ball = detail::state_ball_for(config, batch, eps, zero_v);
    auto prog = with_feedforward_decision(build_gamma(base_ball, *config.target, config.gamma),
                                          ops.input_map);
    result.report = solve_outer(prog);
    if (result.report.status == SolveStatus::Optimal) {
      result.feedforward = result.report.decision;
      result.cost = result.report.objective;
      const auto shifted = translate(base_ball, VectorX<Scalar>(ops.input_map * result.feedforward));
      result.post_hoc_worst_case = worst_case_cvar(shifted, *config.target, config.gamma);
    }
    return result;
  };

  std::vector<std::future<PlanningResult<Scalar>>> futures;
  futures.reserve(epsilons.size());
  for (Scalar eps : epsilons)
    futures.push_back(std::async(std::launch::async, solve_one, eps));
  std::vector<PlanningResult<Scalar>> results;
  results.reserve(epsilons.size());
  for (auto& f : futures) results.push_back(f.get());
  return results;
}

template <class Scalar>
struct OutOfSampleReport {
  MatrixX<Scalar> terminal_states;  // d x n
  Scalar empirical_cvar = Scalar(0);
  Scalar violation_fraction = Scalar(0);
};

using OutOfSampleReportd = OutOfSampleReport<double>;

/// Simulates fresh noise trajectories under the decided feedforward and
/// reports the empirical CVaR of the polytope loss at the horizon along with
/// the fraction of terminal states outside the polytope.
template <class Scalar>
OutOfSampleReport<Scalar> evaluate_out_of_sample(const LtiSystem<Scalar>& sys,
                                                 const Polytope<Scalar>& poly,
                                                 const VectorX<Scalar>& feedforward,
                                                 const TrajectoryBatch<Scalar>& test_batch,
                                                 Scalar gamma) {
  const auto paths = simulate(sys, feedforward, test_batch);
  OutOfSampleReport<Scalar> report;
  report.terminal_states.resize(sys.state_dim(), Index(paths.size()));
  VectorX<Scalar> losses(Index(paths.size()));
  Index violations = 0;
  for (Index i = 0; i < Index(paths.size()); ++i) {
    report.terminal_states.col(i) = paths[i].col(test_batch.horizon());
    losses(i) = poly.loss(report.terminal_states.col(i));
    if (losses(i) > Scalar(0)) ++violations;
  }
  const VectorX<Scalar> uniform =
      VectorX<Scalar>::Constant(losses.size(), Scalar(1) / Scalar(losses.size()));
  report.empirical_cvar = cvar(losses, uniform, gamma);
  report.violation_fraction = Scalar(violations) / Scalar(losses.size());
  return report;
}

}  // namespace otube
