// Stochastic LTI model x_{t+1} = A x_t + B u_t + D w_t with u_t = K x_t + v_t,
// horizon lifting, state ambiguity sets, LQR gain synthesis, and forward
// simulation.
#pragma once

#include <Eigen/Eigenvalues>
#include <stdexcept>
#include <vector>

#include "otube/distribution.hpp"
#include "otube/propagation.hpp"
#include "otube/transport.hpp"
#include "otube/types.hpp"

namespace otube {

template <class Scalar>
struct LtiSystem {
  LtiSystem(MatrixX<Scalar> A_, MatrixX<Scalar> B_, MatrixX<Scalar> D_, MatrixX<Scalar> K_,
            VectorX<Scalar> x0_)
      : A(std::move(A_)), B(std::move(B_)), D(std::move(D_)), K(std::move(K_)),
        x0(std::move(x0_)) {
    const Index d = A.rows();
    if (A.cols() != d || d < 1) throw std::invalid_argument("LtiSystem: A must be square");
    if (B.rows() != d || B.cols() < 1) throw std::invalid_argument("LtiSystem: B shape mismatch");
    if (D.rows() != d || D.cols() < 1) throw std::invalid_argument("LtiSystem: D shape mismatch");
    if (K.rows() != B.cols() || K.cols() != d)
      throw std::invalid_argument("LtiSystem: K must map states to inputs");
    if (x0.size() != d) throw std::invalid_argument("LtiSystem: x0 dimension mismatch");
    if (!A.allFinite() || !B.allFinite() || !D.allFinite() || !K.allFinite() || !x0.allFinite())
      throw std::invalid_argument("LtiSystem: non-finite entries");
  }

  Index state_dim() const { return A.rows(); }
  Index input_dim() const { return B.cols(); }
  Index noise_dim() const { return D.cols(); }
  MatrixX<Scalar> closed_loop() const { return A + B * K; }

  MatrixX<Scalar> A, B, D, K;
  VectorX<Scalar> x0;
};

using LtiSystemd = LtiSystem<double>;

/// Horizon-t block operators of the closed loop: block k (leftmost is k = 0)
/// equals (A+BK)^k B resp. (A+BK)^k D and multiplies the latest-time entry of
/// the stacked input/noise vector [v_{t-1}; ...; v_0].
template <class Scalar>
struct LiftedOperators {
  int horizon = 0;
  std::vector<MatrixX<Scalar>> closed_loop_powers;  // (A+BK)^k, k = 0..t
  MatrixX<Scalar> input_map;                        // d x (t*m)
  MatrixX<Scalar> noise_map;                        // d x (t*r)
  bool noise_map_full_row_rank = false;
};

using LiftedOperatorsd = LiftedOperators<double>;

template <class Scalar>
LiftedOperators<Scalar> lift(const LtiSystem<Scalar>& sys, int t) {
  if (t < 1) throw std::invalid_argument("lift: horizon must be >= 1");
  const Index d = sys.state_dim(), m = sys.input_dim(), r = sys.noise_dim();
  const MatrixX<Scalar> acl = sys.closed_loop();

  LiftedOperators<Scalar> ops;
  ops.horizon = t;
  ops.closed_loop_powers.reserve(t + 1);
  ops.closed_loop_powers.push_back(MatrixX<Scalar>::Identity(d, d));
  for (int k = 1; k <= t; ++k) ops.closed_loop_powers.push_back(ops.closed_loop_powers.back() * acl);

  ops.input_map.resize(d, t * m);
  ops.noise_map.resize(d, t * r);
  for (int k = 0; k < t; ++k) {
    ops.input_map.middleCols(Index(k) * m, m) = ops.closed_loop_powers[k] * sys.B;
    ops.noise_map.middleCols(Index(k) * r, r) = ops.closed_loop_powers[k] * sys.D;
  }
  ops.noise_map_full_row_rank = pseudoinverse(ops.noise_map).full_row_rank;
  return ops;
}

namespace detail {

template <class Scalar>
VectorX<Scalar> deterministic_shift(const LtiSystem<Scalar>& sys,
                                    const LiftedOperators<Scalar>& ops,
                                    const VectorX<Scalar>& feedforward) {
  if (feedforward.size() != ops.input_map.cols())
    throw std::invalid_argument("state_ambiguity: feedforward must be stacked to length t*m");
  return ops.closed_loop_powers[ops.horizon] * sys.x0 + ops.input_map * feedforward;
}

}  // namespace detail

/// The ambiguity set of x_t: the per-step noise ball is lifted to the
/// trajectory space (enumerated t-fold product), pushed through the noise map
/// and translated by the deterministic part (A+BK)^t x0 + B_{t-1} v.
template <class Scalar>
AmbiguitySet<Scalar> state_ambiguity(const LtiSystem<Scalar>& sys, int t,
                                     const VectorX<Scalar>& feedforward,
                                     const AmbiguitySet<Scalar>& noise_ball,
                                     Index cap = 100000) {
  if (noise_ball.center.dimension() != sys.noise_dim())
    throw std::invalid_argument("state_ambiguity: noise ball dimension mismatch");
  const LiftedOperators<Scalar> ops = lift(sys, t);
  return translate(propagate_linear(lift_product(noise_ball, t, cap), ops.noise_map),
                   detail::deterministic_shift(sys, ops, feedforward));
}

/// Trajectory-mode variant: the lifted center is the empirical distribution
/// of the observed noise trajectories; the atoms of the resulting center are
/// exactly the controlled state samples
///   (A+BK)^t x0 + B_{t-1} v + D_{t-1} w^(i).
template <class Scalar>
AmbiguitySet<Scalar> state_ambiguity(const LtiSystem<Scalar>& sys,
                                     const VectorX<Scalar>& feedforward,
                                     const AmbiguitySet<Scalar>& noise_ball,
                                     const TrajectoryBatch<Scalar>& batch) {
  if (noise_ball.center.dimension() != sys.noise_dim())
    throw std::invalid_argument("state_ambiguity: noise ball dimension mismatch");
  const LiftedOperators<Scalar> ops = lift(sys, batch.horizon());
  return translate(propagate_linear(lift_product(noise_ball, batch), ops.noise_map),
                   detail::deterministic_shift(sys, ops, feedforward));
}

/// Discrete-time LQR gain for u = K x with K stabilizing A + BK: the Riccati
/// fixed point is iterated until successive iterates differ by at most `tol`
/// in Frobenius norm, then K = -(R + B'PB)^{-1} B'PA.
template <class Scalar>
MatrixX<Scalar> lqr_gain(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B,
                         const MatrixX<Scalar>& Q, const MatrixX<Scalar>& R,
                         int max_iters = 10000, Scalar tol = Scalar(1e-10)) {
  const Index d = A.rows(), m = B.cols();
  if (A.cols() != d || B.rows() != d) throw std::invalid_argument("lqr_gain: shape mismatch");
  if (Q.rows() != d || Q.cols() != d || R.rows() != m || R.cols() != m)
    throw std::invalid_argument("lqr_gain: weight shape mismatch");
  if (!Q.isApprox(Q.transpose(), Scalar(1e-10)) || !R.isApprox(R.transpose(), Scalar(1e-10)))
    throw std::invalid_argument("lqr_gain: weights must be symmetric");
  if (Eigen::LLT<MatrixX<Scalar>>(Q).info() != Eigen::Success ||
      Eigen::LLT<MatrixX<Scalar>>(R).info() != Eigen::Success)
    throw std::invalid_argument("lqr_gain: weights must be positive definite");

  MatrixX<Scalar> P = Q;
  bool converged = false;
  for (int it = 0; it < max_iters; ++it) {
    const MatrixX<Scalar> BtP = B.transpose() * P;
    const MatrixX<Scalar> gain = (R + BtP * B).ldlt().solve(BtP * A);
    const MatrixX<Scalar> next = Q + A.transpose() * P * A - A.transpose() * P * B * gain;
    const Scalar delta = (next - P).norm();
    P = next;
    if (delta <= tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw std::runtime_error("lqr_gain: Riccati iteration did not converge (non-stabilizable?)");

  const MatrixX<Scalar> BtP = B.transpose() * P;
  MatrixX<Scalar> K = -(R + BtP * B).ldlt().solve(BtP * A);

  const Scalar rho =
      Eigen::EigenSolver<MatrixX<Scalar>>(A + B * K).eigenvalues().cwiseAbs().maxCoeff();
  if (!(rho < Scalar(1)))
    throw std::runtime_error("lqr_gain: closed loop is not asymptotically stable");
  return K;
}

/// Rolls the system forward under u_t = K x_t + v_t for every noise
/// trajectory in the batch. Returns one d x (t+1) state path per trajectory,
/// columns x_0 .. x_t.
template <class Scalar>
std::vector<MatrixX<Scalar>> simulate(const LtiSystem<Scalar>& sys,
                                      const VectorX<Scalar>& feedforward,
                                      const TrajectoryBatch<Scalar>& batch) {
  if (batch.noise_dim() != sys.noise_dim())
    throw std::invalid_argument("simulate: noise dimension mismatch");
  const int t = batch.horizon();
  const Index m = sys.input_dim();
  if (feedforward.size() != Index(t) * m)
    throw std::invalid_argument("simulate: feedforward must be stacked to length t*m");

  std::vector<MatrixX<Scalar>> paths;
  paths.reserve(batch.count());
  for (Index i = 0; i < batch.count(); ++i) {
    MatrixX<Scalar> path(sys.state_dim(), t + 1);
    path.col(0) = sys.x0;
    for (int k = 0; k < t; ++k) {
      // stacked latest-first: v_k sits in block t-1-k
      const VectorX<Scalar> v_k = feedforward.segment(Index(t - 1 - k) * m, m);
      const VectorX<Scalar> u = sys.K * path.col(k) + v_k;
      path.col(k + 1) = sys.A * path.col(k) + sys.B * u + sys.D * batch.step(i, k);
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

}  // namespace otube
