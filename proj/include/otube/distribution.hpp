// Finitely supported probability distributions and their primitive
// transformations: pushforward via a linear map, convolution with a delta
// distribution, and t-fold product lifting.
#pragma once

#include <stdexcept>
#include <string>

#include "otube/types.hpp"

namespace otube {

/// A probability distribution with finitely many atoms. Atoms are stored as
/// columns of a d x N matrix, in insertion order; weights are nonnegative and
/// sum to one. Values are immutable after construction.
template <class Scalar>
class DiscreteDistribution {
 public:
  DiscreteDistribution(MatrixX<Scalar> atoms, VectorX<Scalar> weights)
      : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.rows() < 1)
      throw std::invalid_argument("DiscreteDistribution: atom dimension must be >= 1");
    if (atoms_.cols() < 1)
      throw std::invalid_argument("DiscreteDistribution: need at least one atom");
    if (weights_.size() != atoms_.cols())
      throw std::invalid_argument("DiscreteDistribution: weight count does not match atom count");
    if (!atoms_.allFinite() || !weights_.allFinite())
      throw std::invalid_argument("DiscreteDistribution: non-finite entries");
    if ((weights_.array() < Scalar(0)).any())
      throw std::invalid_argument("DiscreteDistribution: negative weight");
    using std::abs;
    if (abs(weights_.sum() - Scalar(1)) > Scalar(1e-12))
      throw std::invalid_argument("DiscreteDistribution: weights must sum to 1 within 1e-12");
  }

  Index dimension() const { return atoms_.rows(); }
  Index size() const { return atoms_.cols(); }

  const MatrixX<Scalar>& atoms() const { return atoms_; }
  const VectorX<Scalar>& weights() const { return weights_; }

  VectorX<Scalar> atom(Index i) const { return atoms_.col(i); }
  Scalar weight(Index i) const { return weights_(i); }

 private:
  MatrixX<Scalar> atoms_;    // d x N, column per atom
  VectorX<Scalar> weights_;  // N
};

using DiscreteDistributiond = DiscreteDistribution<double>;

/// The delta distribution at x.
template <class Scalar>
DiscreteDistribution<Scalar> dirac(const VectorX<Scalar>& x) {
  if (x.size() == 0) throw std::invalid_argument("dirac: point must have dimension >= 1");
  VectorX<Scalar> w(1);
  w(0) = Scalar(1);
  return DiscreteDistribution<Scalar>(x, w);
}

/// The empirical distribution of the given samples (one column per sample),
/// with uniform weights 1/n.
template <class Scalar>
DiscreteDistribution<Scalar> empirical(const MatrixX<Scalar>& samples) {
  if (samples.cols() < 1) throw std::invalid_argument("empirical: no samples");
  const Index n = samples.cols();
  return DiscreteDistribution<Scalar>(
      samples, VectorX<Scalar>::Constant(n, Scalar(1) / Scalar(n)));
}

/// The pushforward of P via the linear map x -> A x. Atoms whose images
/// coincide within Euclidean distance 1e-10 are merged by summing weights;
/// the zero map and rank-deficient maps otherwise inflate downstream LP sizes
/// with duplicate atoms. Atom order is the insertion order of first images.
template <class Scalar>
DiscreteDistribution<Scalar> pushforward(const MatrixX<Scalar>& A,
                                         const DiscreteDistribution<Scalar>& P) {
  if (A.cols() != P.dimension())
    throw std::invalid_argument("pushforward: matrix columns (" + std::to_string(A.cols()) +
                                ") do not match atom dimension (" +
                                std::to_string(P.dimension()) + ")");
  const MatrixX<Scalar> images = A * P.atoms();
  const Scalar merge_tol = Scalar(1e-10);

  MatrixX<Scalar> merged(images.rows(), images.cols());
  VectorX<Scalar> weights = VectorX<Scalar>::Zero(images.cols());
  Index kept = 0;
  for (Index i = 0; i < images.cols(); ++i) {
    Index hit = -1;
    for (Index k = 0; k < kept; ++k) {
      if ((images.col(i) - merged.col(k)).norm() <= merge_tol) {
        hit = k;
        break;
      }
    }
    if (hit >= 0) {
      weights(hit) += P.weight(i);
    } else {
      merged.col(kept) = images.col(i);
      weights(kept) = P.weight(i);
      ++kept;
    }
  }
  return DiscreteDistribution<Scalar>(merged.leftCols(kept), weights.head(kept));
}

/// The convolution delta_y * P, i.e. the distribution of x + y for x ~ P.
template <class Scalar>
DiscreteDistribution<Scalar> convolve_delta(const VectorX<Scalar>& y,
                                            const DiscreteDistribution<Scalar>& P) {
  if (y.size() != P.dimension())
    throw std::invalid_argument("convolve_delta: shift dimension does not match atoms");
  return DiscreteDistribution<Scalar>(P.atoms().colwise() + y, P.weights());
}

/// The t-fold product distribution P^{x t}. Its N^t atoms are stacked tuples
/// [x_{i1}; ...; x_{it}] with the leading index i1 varying slowest, and weight
/// equal to the product of the component weights. Full enumeration is a
/// testing device; refuses to materialize more than `cap` atoms.
template <class Scalar>
DiscreteDistribution<Scalar> product_power(const DiscreteDistribution<Scalar>& P, int t,
                                           Index cap = 100000) {
  if (t < 1) throw std::invalid_argument("product_power: t must be >= 1");
  if (cap < 1) throw std::invalid_argument("product_power: cap must be >= 1");
  const Index n = P.size();
  Index count = 1;
  for (int k = 0; k < t; ++k) {
    if (count > cap / n + 1) count = cap + 1;  // avoid overflow, already too big
    else count *= n;
    if (count > cap)
      throw std::invalid_argument(
          "product_power: N^t exceeds cap; use trajectory mode instead");
  }

  const Index d = P.dimension();
  MatrixX<Scalar> atoms(d * t, count);
  VectorX<Scalar> weights(count);
  for (Index linear = 0; linear < count; ++linear) {
    Index rest = linear;
    Scalar w = Scalar(1);
    // decode indices, i1 in the highest-order digit
    for (int k = t - 1; k >= 0; --k) {
      const Index ik = rest % n;
      rest /= n;
      atoms.col(linear).segment(k * d, d) = P.atom(ik);
      w *= P.weight(ik);
    }
    weights(linear) = w;
  }
  return DiscreteDistribution<Scalar>(std::move(atoms), std::move(weights));
}

/// A batch of stacked noise trajectories. Each trajectory is a (t*r)-vector
/// ordered latest-first, [w_{t-1}; ...; w_0], matching the block order of the
/// lifted operators.
template <class Scalar>
class TrajectoryBatch {
 public:
  TrajectoryBatch(MatrixX<Scalar> trajectories, int horizon, Index noise_dim)
      : trajectories_(std::move(trajectories)), horizon_(horizon), noise_dim_(noise_dim) {
    if (horizon_ < 1) throw std::invalid_argument("TrajectoryBatch: horizon must be >= 1");
    if (noise_dim_ < 1) throw std::invalid_argument("TrajectoryBatch: noise dimension must be >= 1");
    if (trajectories_.rows() != Index(horizon_) * noise_dim_)
      throw std::invalid_argument("TrajectoryBatch: each trajectory must have length t*r");
    if (trajectories_.cols() < 1)
      throw std::invalid_argument("TrajectoryBatch: need at least one trajectory");
    if (!trajectories_.allFinite())
      throw std::invalid_argument("TrajectoryBatch: non-finite entries");
  }

  int horizon() const { return horizon_; }
  Index noise_dim() const { return noise_dim_; }
  Index count() const { return trajectories_.cols(); }
  const MatrixX<Scalar>& trajectories() const { return trajectories_; }

  /// Noise vector w_k of trajectory i (k = 0 is the earliest step).
  VectorX<Scalar> step(Index i, int k) const {
    if (k < 0 || k >= horizon_) throw std::out_of_range("TrajectoryBatch::step: bad time index");
    return trajectories_.col(i).segment(Index(horizon_ - 1 - k) * noise_dim_, noise_dim_);
  }

 private:
  MatrixX<Scalar> trajectories_;  // (t*r) x N
  int horizon_;
  Index noise_dim_;
};

using TrajectoryBatchd = TrajectoryBatch<double>;

}  // namespace otube
