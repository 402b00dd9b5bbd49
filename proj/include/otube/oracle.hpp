// Independent brute-force verifiers used by the test and acceptance suites:
// exhaustive permutation OT, linear-propagation trials, the naive-propagation
// foils, and (tau, lambda) grid certification of the worst-case CVaR. These
// deliberately rebuild their quantities from scratch instead of reusing the
// code paths they certify.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "otube/drcvar.hpp"
#include "otube/propagation.hpp"
#include "otube/transport.hpp"
#include "otube/types.hpp"

namespace otube::oracle {

/// Exhaustive optimum over all permutation couplings. Valid (and equal to the
/// transportation LP) for uniform marginals of equal size, where a Birkhoff
/// vertex is optimal. Limited to n <= 8.
template <class Scalar>
Scalar permutation_ot(const TransportationCost<Scalar>& c, const DiscreteDistribution<Scalar>& P,
                      const DiscreteDistribution<Scalar>& Q) {
  const Index n = P.size();
  if (Q.size() != n) throw std::invalid_argument("permutation_ot: atom counts differ");
  if (n > 8) throw std::invalid_argument("permutation_ot: limited to 8 atoms");
  const Scalar uniform = Scalar(1) / Scalar(n);
  using std::abs;
  for (Index i = 0; i < n; ++i)
    if (abs(P.weight(i) - uniform) > Scalar(1e-12) || abs(Q.weight(i) - uniform) > Scalar(1e-12))
      throw std::invalid_argument("permutation_ot: marginals must be uniform");

  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index(0));
  Scalar best = std::numeric_limits<Scalar>::infinity();
  do {
    Scalar total = Scalar(0);
    for (Index i = 0; i < n; ++i)
      total += c(VectorX<Scalar>(P.atom(i) - Q.atom(perm[i])));
    best = std::min(best, total * uniform);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

namespace detail {

// raw transportation-LP value under the displacement map z -> T z (plain
// squared Euclidean on the mapped displacements); T empty means identity
template <class Scalar>
Scalar lp_value(const MatrixX<Scalar>& X, const VectorX<Scalar>& wx, const MatrixX<Scalar>& Y,
                const VectorX<Scalar>& wy, const MatrixX<Scalar>& T) {
  MatrixX<Scalar> C(X.cols(), Y.cols());
  for (Index i = 0; i < X.cols(); ++i)
    for (Index j = 0; j < Y.cols(); ++j) {
      const VectorX<Scalar> z = X.col(i) - Y.col(j);
      C(i, j) = T.size() ? (T * z).squaredNorm() : z.squaredNorm();
    }
  return transport_simplex(C, wx, wy).objective;
}

}  // namespace detail

template <class Scalar>
struct PropagationTrialReport {
  int trials = 0;
  Scalar max_equality_gap = Scalar(0);      // full row-rank: |T - T_pushed|
  Scalar max_inclusion_violation = Scalar(0);  // any A: max(0, T_pushed - T)
  int membership_mismatches = 0;               // radius-eps membership flips
  bool all_passed = false;
};

/// Randomized check of linear propagation under the plain squared Euclidean
/// cost: for perturbed distributions Q near P, the composed-cost discrepancy
/// of the images must equal the original discrepancy when A is full row-rank
/// and can only shrink otherwise. Both discrepancies are raw LP solves on
/// hand-built cost matrices.
template <class Scalar>
PropagationTrialReport<Scalar> thm1_trial(const DiscreteDistribution<Scalar>& P,
                                          const MatrixX<Scalar>& A, Scalar eps, int trials,
                                          std::uint64_t seed = 99) {
  PropagationTrialReport<Scalar> report;
  report.trials = trials;
  const PseudoInverse<Scalar> dec = pseudoinverse(A);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  using std::sqrt;
  const Scalar scale = sqrt(std::max(eps, Scalar(1e-6)));

  for (int trial = 0; trial < trials; ++trial) {
    MatrixX<Scalar> atoms(P.dimension(), P.size());
    for (Index i = 0; i < atoms.size(); ++i)
      atoms(i) = Scalar(normal(rng)) * scale * Scalar(trial % 3 + 1) / Scalar(2);
    atoms += P.atoms();
    const auto Q = empirical(atoms);

    const Scalar before = detail::lp_value(P.atoms(), P.weights(), Q.atoms(), Q.weights(),
                                           MatrixX<Scalar>());
    const Scalar after = detail::lp_value(MatrixX<Scalar>(A * P.atoms()), P.weights(),
                                          MatrixX<Scalar>(A * Q.atoms()), Q.weights(), dec.pinv);

    using std::abs;
    if (dec.full_row_rank) {
      report.max_equality_gap = std::max(report.max_equality_gap, abs(after - before));
      const bool in_before = before <= eps - Scalar(1e-9);
      const bool out_before = before > eps + Scalar(1e-9);
      const bool in_after = after <= eps - Scalar(1e-9);
      const bool out_after = after > eps + Scalar(1e-9);
      if ((in_before && out_after) || (out_before && in_after)) ++report.membership_mismatches;
    }
    report.max_inclusion_violation =
        std::max(report.max_inclusion_violation, std::max(Scalar(0), after - before));
  }
  report.all_passed = report.max_inclusion_violation <= Scalar(1e-9) &&
                      report.membership_mismatches == 0 &&
                      (!dec.full_row_rank || report.max_equality_gap <= Scalar(1e-6));
  return report;
}

template <class Scalar>
struct FoilWitness {
  bool applicable = false;
  VectorX<Scalar> shift;    // displacement of the witness from the pushed center
  bool in_approximation = false;  // member of the naive / Lipschitz ball
  bool in_true_set = false;       // member of the exact pushforward image
};

template <class Scalar>
struct NaiveFoilReport {
  Scalar lipschitz_constant = Scalar(0);
  bool true_set_checkable = false;           // requires supp(P) in rowspace(A)
  FoilWitness<Scalar> overestimation;        // in the naive ball, outside the true set
  FoilWitness<Scalar> underestimation;       // in the true set, outside the naive ball
  FoilWitness<Scalar> lipschitz_conservatism;  // in the Lipschitz ball, outside the true set
};

/// Exhibits the failure modes of center-only and Lipschitz-based uncertainty
/// propagation under the norm cost c = |.|: witnesses that the naive ball
/// B_eps(A#P) over- or under-estimates the exact image of B_eps(P), and that
/// the Lipschitz ball B_{L eps}(A#P) retains uncertainty the map destroys.
/// Membership verdicts are measured with raw transportation LPs. The exact
/// image is decidable here when P is supported on the row space of A.
template <class Scalar>
NaiveFoilReport<Scalar> naive_foil(const DiscreteDistribution<Scalar>& P,
                                   const MatrixX<Scalar>& A, Scalar eps) {
  if (!(eps > Scalar(0))) throw std::invalid_argument("naive_foil: radius must be positive");
  NaiveFoilReport<Scalar> report;
  const PseudoInverse<Scalar> dec = pseudoinverse(A);
  report.lipschitz_constant = dec.singular_values.size() ? dec.singular_values(0) : Scalar(0);
  const Scalar L = report.lipschitz_constant;

  report.true_set_checkable = true;
  for (Index i = 0; i < P.size(); ++i)
    if ((P.atom(i) - dec.pinv * A * P.atom(i)).norm() > Scalar(1e-9))
      report.true_set_checkable = false;

  const MatrixX<Scalar> pushed = A * P.atoms();
  auto c = TransportationCost<Scalar>::power_norm(Scalar(1));

  auto norm_distance = [&](const MatrixX<Scalar>& target_atoms, const MatrixX<Scalar>& map) {
    MatrixX<Scalar> C(pushed.cols(), target_atoms.cols());
    for (Index i = 0; i < pushed.cols(); ++i)
      for (Index j = 0; j < target_atoms.cols(); ++j) {
        const VectorX<Scalar> z = pushed.col(i) - target_atoms.col(j);
        C(i, j) = map.size() ? (map * z).norm() : z.norm();
      }
    return transport_simplex(C, P.weights(), P.weights()).objective;
  };

  auto in_true_set = [&](const MatrixX<Scalar>& target_atoms) {
    if (!report.true_set_checkable) return false;
    for (Index j = 0; j < target_atoms.cols(); ++j) {
      const VectorX<Scalar> y = target_atoms.col(j);
      if ((y - A * (dec.pinv * y)).norm() > Scalar(1e-9)) return false;  // off range(A)
    }
    return norm_distance(target_atoms, dec.pinv) <= eps + Scalar(1e-9);
  };

  auto witness_for_shift = [&](const VectorX<Scalar>& shift, Scalar ball_radius) {
    FoilWitness<Scalar> w;
    w.applicable = true;
    w.shift = shift;
    const MatrixX<Scalar> target = pushed.colwise() + shift;
    w.in_approximation = norm_distance(target, MatrixX<Scalar>()) <= ball_radius + Scalar(1e-9);
    w.in_true_set = in_true_set(target);
    return w;
  };

  // overestimation: shift off range(A), cheap for the naive ball
  if (dec.rank < A.rows()) {
    const VectorX<Scalar> off_range = dec.U.col(A.rows() - 1);
    report.overestimation = witness_for_shift(VectorX<Scalar>(Scalar(0.5) * eps * off_range), eps);
  }

  // underestimation: an expanding direction reaches beyond the naive radius
  if (dec.rank > 0 && L > Scalar(1)) {
    using std::sqrt;
    const Scalar s = eps * sqrt(L);  // between eps and L * eps
    report.underestimation = witness_for_shift(VectorX<Scalar>(s * dec.U.col(0)), eps);
  }

  // Lipschitz conservatism: the inflated ball keeps mass in directions the
  // map annihilates
  if (dec.rank < A.rows() && L > Scalar(0)) {
    const VectorX<Scalar> off_range = dec.U.col(A.rows() - 1);
    report.lipschitz_conservatism =
        witness_for_shift(VectorX<Scalar>(Scalar(0.5) * L * eps * off_range), L * eps);
  }
  return report;
}

/// Grid certification of the worst-case CVaR: minimizes the dual objective
/// over a log-lambda x tau grid (with zoom refinement), rebuilding every
/// quantity from the ball and polytope directly. Upper-bounds the true
/// infimum within the final grid gap.
template <class Scalar>
Scalar cvar_grid(const AmbiguitySet<Scalar>& state_ball, const Polytope<Scalar>& poly,
                 Scalar gamma, int resolution) {
  if (resolution < 50) throw std::invalid_argument("cvar_grid: resolution must be >= 50");
  if (state_ball.cost.kind() != CostKind::SqEuclidComposed)
    throw std::invalid_argument("cvar_grid: composed cost required");

  const MatrixX<Scalar>& M = state_ball.cost.matrix();
  const MatrixX<Scalar> gram = M.transpose() * M;
  const Eigen::LDLT<MatrixX<Scalar>> gram_solver(gram);
  const Index J = poly.count(), N = state_ball.center.size();
  const Scalar eps_t = state_ball.radius;

  MatrixX<Scalar> base(N, J);
  VectorX<Scalar> q(J);
  for (Index j = 0; j < J; ++j) {
    const VectorX<Scalar> alpha = poly.directions.row(j).transpose() / gamma;
    q(j) = alpha.dot(gram_solver.solve(alpha));
    for (Index i = 0; i < N; ++i)
      base(i, j) = alpha.dot(state_ball.center.atom(i)) + poly.offsets(j) / gamma;
  }
  const VectorX<Scalar>& w = state_ball.center.weights();
  const Scalar slope = (gamma - Scalar(1)) / gamma;

  auto objective = [&](Scalar tau, Scalar lambda) {
    Scalar total = Scalar(0);
    for (Index i = 0; i < N; ++i) {
      Scalar best = tau;  // closing row
      for (Index j = 0; j < J; ++j)
        best = std::max(best, base(i, j) + slope * tau + q(j) / (Scalar(4) * lambda));
      total += w(i) * best;
    }
    return lambda * eps_t + total;
  };

  auto tau_scan = [&](Scalar lambda, Scalar& best_tau) {
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    Scalar hi = -std::numeric_limits<Scalar>::infinity();
    for (Index i = 0; i < N; ++i)
      for (Index j = 0; j < J; ++j) {
        const Scalar crossing = gamma * (base(i, j) + q(j) / (Scalar(4) * lambda));
        lo = std::min(lo, crossing);
        hi = std::max(hi, crossing);
      }
    Scalar best = std::numeric_limits<Scalar>::infinity();
    Scalar center = (lo + hi) / Scalar(2), half = (hi - lo) / Scalar(2) + Scalar(1);
    for (int stage = 0; stage < 4; ++stage) {
      Scalar stage_best_tau = center;
      for (int k = 0; k < resolution; ++k) {
        const Scalar tau =
            center - half + Scalar(2) * half * Scalar(k) / Scalar(resolution - 1);
        const Scalar value = objective(tau, lambda);
        if (value < best) {
          best = value;
          stage_best_tau = tau;
        }
      }
      center = stage_best_tau;
      half = Scalar(4) * half / Scalar(resolution);
    }
    best_tau = center;
    return best;
  };

  if (eps_t == Scalar(0)) {
    // lambda -> infinity: the hyperbolic terms vanish and lambda eps_t = 0
    Scalar tau;
    return tau_scan(Scalar(1e30), tau);
  }
  if (q.maxCoeff() <= Scalar(0)) {
    // lambda -> 0: only the lambda eps_t term depends on lambda
    Scalar tau;
    return tau_scan(Scalar(1), tau) - eps_t;
  }

  using std::exp;
  using std::log;
  Scalar u_center = Scalar(0), u_half = log(Scalar(1e6));
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (int stage = 0; stage < 4; ++stage) {
    Scalar stage_best_u = u_center;
    for (int k = 0; k < resolution; ++k) {
      const Scalar u = u_center - u_half + Scalar(2) * u_half * Scalar(k) / Scalar(resolution - 1);
      const Scalar lambda =
          std::min(Scalar(1e6), std::max(Scalar(1e-6), exp(u)));
      Scalar tau;
      const Scalar value = tau_scan(lambda, tau);
      if (value < best) {
        best = value;
        stage_best_u = u;
      }
    }
    u_center = stage_best_u;
    u_half = Scalar(4) * u_half / Scalar(resolution);
  }
  return best;
}

}  // namespace otube::oracle
