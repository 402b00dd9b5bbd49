// Ambiguity-set algebra: Moore-Penrose pseudoinverse machinery, exact
// propagation through linear maps, translation, product lifting over a
// horizon, the sample-complexity radius rule, singular-value cost analysis,
// and the plain-Euclidean bounding ball.
#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "otube/distribution.hpp"
#include "otube/transport.hpp"
#include "otube/types.hpp"

namespace otube {

/// SVD-backed pseudoinverse of a matrix. Singular values below
/// 1e-12 * sigma_max are treated as zero.
template <class Scalar>
struct PseudoInverse {
  MatrixX<Scalar> source;           // A, m x d
  MatrixX<Scalar> pinv;             // A^+, d x m
  MatrixX<Scalar> U;                // m x m
  MatrixX<Scalar> V;                // d x d
  VectorX<Scalar> singular_values;  // min(m, d), descending
  Index rank = 0;
  bool full_row_rank = false;
};

using PseudoInversed = PseudoInverse<double>;

template <class Scalar>
PseudoInverse<Scalar> pseudoinverse(const MatrixX<Scalar>& A) {
  if (!A.allFinite()) throw std::invalid_argument("pseudoinverse: non-finite entries");
  if (A.rows() < 1 || A.cols() < 1) throw std::invalid_argument("pseudoinverse: empty matrix");

  Eigen::JacobiSVD<MatrixX<Scalar>> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  PseudoInverse<Scalar> result;
  result.source = A;
  result.U = svd.matrixU();
  result.V = svd.matrixV();
  result.singular_values = svd.singularValues();

  const Scalar sigma_max = result.singular_values.size() ? result.singular_values(0) : Scalar(0);
  const Scalar threshold = Scalar(1e-12) * sigma_max;
  VectorX<Scalar> inv = VectorX<Scalar>::Zero(result.singular_values.size());
  for (Index i = 0; i < result.singular_values.size(); ++i) {
    if (result.singular_values(i) > threshold && result.singular_values(i) > Scalar(0)) {
      inv(i) = Scalar(1) / result.singular_values(i);
      ++result.rank;
    }
  }
  result.pinv = result.V.leftCols(inv.size()) * inv.asDiagonal() *
                result.U.leftCols(inv.size()).transpose();
  result.full_row_rank = result.rank == A.rows();
  return result;
}

/// Pushes an ambiguity set through the linear map x -> A x. The center is
/// pushed forward, the radius is unchanged, and the transportation cost is
/// composed with the pseudoinverse of A. The result is the exact image when A
/// is full row-rank, and an outer approximation otherwise.
///
/// Composed-cost balls require the incoming matrix M to be square and
/// invertible (identity included) so that M * A^+ carries the iterated
/// Theorem-1 semantics. The scalar PowerNorm family is also supported for
/// 1 x 1 maps: an invertible scalar folds |a|^p into the radius, and a = 0
/// yields the vacuous all-zero composed cost.
template <class Scalar>
AmbiguitySet<Scalar> propagate_linear(const AmbiguitySet<Scalar>& ball,
                                      const MatrixX<Scalar>& A) {
  if (A.cols() != ball.center.dimension())
    throw std::invalid_argument("propagate_linear: map columns do not match center dimension");

  const PseudoInverse<Scalar> pinv = pseudoinverse(A);
  // a surjective map propagates exactly; otherwise only the inclusion holds
  const Exactness exactness = pinv.full_row_rank ? ball.exactness : Exactness::Outer;
  DiscreteDistribution<Scalar> center = pushforward(A, ball.center);

  if (ball.cost.kind() == CostKind::SqEuclidComposed) {
    const MatrixX<Scalar>& M = ball.cost.matrix();
    if (M.rows() != M.cols())
      throw std::invalid_argument("propagate_linear: composed cost matrix must be square");
    if (!ball.cost.is_plain_sq_euclidean() && pseudoinverse(M).rank < M.cols())
      throw std::invalid_argument("propagate_linear: composed cost matrix must be invertible");
    auto cost = TransportationCost<Scalar>::sq_euclidean_composed(M * pinv.pinv);
    return AmbiguitySet<Scalar>(std::move(center), std::move(cost), ball.radius, exactness);
  }

  // PowerNorm: only scalar maps compose within the declared cost family.
  if (A.rows() != 1 || A.cols() != 1)
    throw std::invalid_argument("propagate_linear: PowerNorm costs support only scalar maps");
  const Scalar a = A(0, 0);
  if (a == Scalar(0)) {
    auto vacuous = TransportationCost<Scalar>::sq_euclidean_composed(MatrixX<Scalar>::Zero(1, 1));
    return AmbiguitySet<Scalar>(std::move(center), std::move(vacuous), ball.radius, exactness);
  }
  using std::abs;
  using std::pow;
  // c(z / a) = |z|^p / |a|^p, so the ball of radius eps under c o A^+ is the
  // ball of radius |a|^p eps under c itself.
  const Scalar scale = pow(abs(a), ball.cost.power());
  return AmbiguitySet<Scalar>(std::move(center), ball.cost, scale * ball.radius, exactness);
}

/// Shifts an ambiguity set by y: the center is convolved with delta_y, cost
/// and radius are untouched (the discrepancy is translation invariant).
template <class Scalar>
AmbiguitySet<Scalar> translate(const AmbiguitySet<Scalar>& ball, const VectorX<Scalar>& y) {
  return AmbiguitySet<Scalar>(convolve_delta(y, ball.center), ball.cost, ball.radius,
                              ball.exactness);
}

namespace detail {

template <class Scalar>
void require_plain_sq_euclidean(const AmbiguitySet<Scalar>& ball, const char* where) {
  if (!ball.cost.is_plain_sq_euclidean())
    throw std::invalid_argument(std::string(where) +
                                ": per-step ball must carry the plain squared Euclidean cost");
}

}  // namespace detail

/// Lifts a per-step ambiguity set to the space of t-step trajectories by
/// enumerating the t-fold product of the center. The radius grows linearly
/// to t * eps; the cost remains plain squared Euclidean.
template <class Scalar>
AmbiguitySet<Scalar> lift_product(const AmbiguitySet<Scalar>& ball, int t, Index cap = 100000) {
  detail::require_plain_sq_euclidean(ball, "lift_product");
  if (t < 1) throw std::invalid_argument("lift_product: horizon must be >= 1");
  auto center = product_power(ball.center, t, cap);
  auto cost = TransportationCost<Scalar>::sq_euclidean(center.dimension());
  return AmbiguitySet<Scalar>(std::move(center), std::move(cost), Scalar(t) * ball.radius,
                              ball.exactness);
}

/// Trajectory-mode lift: the center is the empirical distribution of the
/// observed noise trajectories instead of the enumerated product; the radius
/// is still t * eps. The product center is only outer-approximated, which the
/// exactness flag records.
template <class Scalar>
AmbiguitySet<Scalar> lift_product(const AmbiguitySet<Scalar>& ball,
                                  const TrajectoryBatch<Scalar>& batch) {
  detail::require_plain_sq_euclidean(ball, "lift_product");
  if (batch.noise_dim() != ball.center.dimension())
    throw std::invalid_argument("lift_product: trajectory noise dimension mismatch");
  auto center = empirical(batch.trajectories());
  auto cost = TransportationCost<Scalar>::sq_euclidean(center.dimension());
  return AmbiguitySet<Scalar>(std::move(center), std::move(cost),
                              Scalar(batch.horizon()) * ball.radius,
                              Exactness::OuterTrajectoryCenter);
}

/// Statistical radius rule: C * n^(-1 / max(2, r)) for n samples of
/// r-dimensional noise.
template <class Scalar>
Scalar radius_rate(long n, int r, Scalar C) {
  if (n < 1) throw std::invalid_argument("radius_rate: sample count must be >= 1");
  if (r < 1) throw std::invalid_argument("radius_rate: noise dimension must be >= 1");
  if (!(C > Scalar(0))) throw std::invalid_argument("radius_rate: scale must be > 0");
  using std::pow;
  return C * pow(Scalar(n), Scalar(-1) / Scalar(std::max(2, r)));
}

/// Singular values of M (descending) paired with the left singular vectors:
/// the directions u_i along which a composed cost |M z|^2 prices mass
/// movement as sigma_i^2 per unit squared displacement.
template <class Scalar>
std::vector<std::pair<Scalar, VectorX<Scalar>>> cost_spectrum(const MatrixX<Scalar>& M) {
  if (!M.allFinite()) throw std::invalid_argument("cost_spectrum: non-finite entries");
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  std::vector<std::pair<Scalar, VectorX<Scalar>>> spectrum;
  spectrum.reserve(svd.singularValues().size());
  for (Index i = 0; i < svd.singularValues().size(); ++i)
    spectrum.emplace_back(svd.singularValues()(i), svd.matrixU().col(i));
  return spectrum;
}

/// Replaces a composed cost |pinv(D) z|^2 by the plain squared Euclidean cost
/// at the price of inflating the radius by sigma_max(D)^2. Requires the
/// stored matrix to have full column rank (i.e. D full row-rank); otherwise
/// no finite plain-cost ball contains the composed-cost ball.
template <class Scalar>
AmbiguitySet<Scalar> bounding_ball(const AmbiguitySet<Scalar>& ball) {
  if (ball.cost.kind() != CostKind::SqEuclidComposed)
    throw std::invalid_argument("bounding_ball: requires a composed squared Euclidean cost");
  const MatrixX<Scalar>& M = ball.cost.matrix();
  const PseudoInverse<Scalar> dec = pseudoinverse(M);
  if (dec.rank < M.cols())
    throw std::invalid_argument("bounding_ball: composed cost matrix is column rank-deficient");
  // smallest nonzero singular value of M = pinv(D) is 1 / sigma_max(D)
  const Scalar sigma_min = dec.singular_values(dec.rank - 1);
  const Scalar factor = Scalar(1) / (sigma_min * sigma_min);
  auto cost = TransportationCost<Scalar>::sq_euclidean(ball.center.dimension());
  return AmbiguitySet<Scalar>(ball.center, std::move(cost), factor * ball.radius,
                              Exactness::Outer);
}

}  // namespace otube
