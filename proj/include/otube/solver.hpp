// Small dense convex solver backends: a two-phase primal simplex for linear
// programs and an ADMM operator-splitting method with active-set polish for
// convex quadratic programs. Both work on inequality form
//     min f(x)  s.t.  G x <= h,   x free.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "otube/types.hpp"

namespace otube {

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::MaxIter: return "max-iter";
  }
  return "?";
}

template <class Scalar>
struct SolverResult {
  SolveStatus status = SolveStatus::MaxIter;
  VectorX<Scalar> x;
  Scalar objective = Scalar(0);
  int iterations = 0;
};

namespace detail {

// Dense tableau simplex over equality form A z = b, z >= 0, b >= 0, with
// Bland's smallest-index rule. Minimizes cost'z starting from the given
// basis; only the first `price_cols` columns may enter (the right-hand side
// lives in column `rhs_col`). Returns false when the iteration limit is hit.
template <class Scalar>
bool simplex_tableau(MatrixX<Scalar>& T, std::vector<int>& basis, int price_cols, int rhs_col,
                     int max_iters, bool& unbounded) {
  using std::abs;
  const int rows = int(T.rows()) - 1;
  const Scalar tol = Scalar(1e-11);
  unbounded = false;
  for (int iter = 0; iter < max_iters; ++iter) {
    int enter = -1;
    for (int j = 0; j < price_cols; ++j) {
      if (T(rows, j) < -tol) {
        enter = j;
        break;  // Bland: smallest index
      }
    }
    if (enter < 0) return true;  // optimal

    int leave = -1;
    Scalar best_ratio = Scalar(0);
    for (int i = 0; i < rows; ++i) {
      if (T(i, enter) > tol) {
        const Scalar ratio = T(i, rhs_col) / T(i, enter);
        if (leave < 0 || ratio < best_ratio - tol ||
            (ratio < best_ratio + tol && basis[i] < basis[leave])) {
          leave = i;
          best_ratio = ratio;
        }
      }
    }
    if (leave < 0) {
      unbounded = true;
      return true;
    }

    // pivot
    T.row(leave) /= T(leave, enter);
    for (int i = 0; i <= rows; ++i) {
      if (i == leave) continue;
      const Scalar factor = T(i, enter);
      if (factor != Scalar(0)) T.row(i) -= factor * T.row(leave);
    }
    basis[leave] = enter;
  }
  return false;
}

}  // namespace detail

/// Two-phase dense simplex for min c'x s.t. G x <= h with free x.
template <class Scalar>
SolverResult<Scalar> solve_lp(const VectorX<Scalar>& c, const MatrixX<Scalar>& G,
                              const VectorX<Scalar>& h, int max_iters = 50000) {
  const int n = int(c.size());
  const int m = int(G.rows());
  if (G.cols() != n || h.size() != m) throw std::invalid_argument("solve_lp: shape mismatch");
  if (!c.allFinite() || !G.allFinite() || !h.allFinite())
    throw std::invalid_argument("solve_lp: non-finite data");

  // equality form: G (x+ - x-) + s = h with x+, x-, s >= 0, then b >= 0.
  const int n_struct = 2 * n + m;
  const int n_total = n_struct + m;  // + artificials
  MatrixX<Scalar> T = MatrixX<Scalar>::Zero(m + 1, n_total + 1);
  for (int i = 0; i < m; ++i) {
    const Scalar sign = h(i) < Scalar(0) ? Scalar(-1) : Scalar(1);
    T.block(i, 0, 1, n) = sign * G.row(i);
    T.block(i, n, 1, n) = -sign * G.row(i);
    T(i, 2 * n + i) = sign;
    T(i, n_struct + i) = Scalar(1);
    T(i, n_total) = sign * h(i);
  }

  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n_struct + i;

  // phase 1: minimize the sum of artificials
  for (int i = 0; i < m; ++i) T(m, n_struct + i) = Scalar(1);
  for (int i = 0; i < m; ++i) T.row(m) -= T.row(i);

  SolverResult<Scalar> result;
  bool unbounded = false;
  if (!detail::simplex_tableau(T, basis, n_total, n_total, max_iters, unbounded)) {
    result.status = SolveStatus::MaxIter;
    return result;
  }
  const Scalar h_scale = m ? h.cwiseAbs().maxCoeff() : Scalar(0);
  if (-T(m, n_total) > Scalar(1e-8) * (Scalar(1) + h_scale)) {
    result.status = SolveStatus::Infeasible;
    return result;
  }

  // drive any artificial still in the basis out of it (or drop its row)
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n_struct) continue;
    int pivot = -1;
    for (int j = 0; j < n_struct; ++j) {
      if (std::abs(T(i, j)) > Scalar(1e-9)) {
        pivot = j;
        break;
      }
    }
    if (pivot < 0) continue;  // redundant row, harmless with a zero artificial
    T.row(i) /= T(i, pivot);
    for (int k = 0; k <= m; ++k) {
      if (k == i) continue;
      const Scalar factor = T(k, pivot);
      if (factor != Scalar(0)) T.row(k) -= factor * T.row(i);
    }
    basis[i] = pivot;
  }

  // phase 2: real objective, artificials excluded from pricing
  T.row(m).setZero();
  for (int j = 0; j < n; ++j) {
    T(m, j) = c(j);
    T(m, n + j) = -c(j);
  }
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n_struct && T(m, basis[i]) != Scalar(0))
      T.row(m) -= T(m, basis[i]) * T.row(i);
  }

  if (!detail::simplex_tableau(T, basis, n_struct, n_total, max_iters, unbounded)) {
    result.status = SolveStatus::MaxIter;
    return result;
  }
  if (unbounded) {
    result.status = SolveStatus::Unbounded;
    return result;
  }

  VectorX<Scalar> z = VectorX<Scalar>::Zero(n_total);
  for (int i = 0; i < m; ++i) z(basis[i]) = T(i, n_total);
  result.x = z.head(n) - z.segment(n, n);
  result.objective = c.dot(result.x);
  result.status = SolveStatus::Optimal;
  return result;
}

template <class Scalar>
struct QpOptions {
  Scalar rho = Scalar(0.1);
  Scalar sigma = Scalar(1e-6);
  Scalar alpha = Scalar(1.6);
  Scalar eps_abs = Scalar(1e-8);
  int max_iters = 100000;
  int check_every = 25;
};

/// ADMM for min 0.5 x'P x + q'x s.t. G x <= h (P symmetric positive
/// semidefinite). Iterates to absolute primal/dual residuals eps_abs, then
/// attempts an active-set polish to recover a high-accuracy solution.
/// Feasibility is the caller's concern (pre-check with solve_lp).
template <class Scalar>
SolverResult<Scalar> solve_qp(const MatrixX<Scalar>& P, const VectorX<Scalar>& q,
                              const MatrixX<Scalar>& G, const VectorX<Scalar>& h,
                              QpOptions<Scalar> opts = {}) {
  using std::abs;
  const int n = int(q.size());
  const int m = int(G.rows());
  if (P.rows() != n || P.cols() != n || G.cols() != n || h.size() != m)
    throw std::invalid_argument("solve_qp: shape mismatch");

  Scalar rho = opts.rho;
  auto factorize = [&](Scalar r) {
    return Eigen::LDLT<MatrixX<Scalar>>(P + opts.sigma * MatrixX<Scalar>::Identity(n, n) +
                                        r * G.transpose() * G);
  };
  Eigen::LDLT<MatrixX<Scalar>> kkt = factorize(rho);

  VectorX<Scalar> x = VectorX<Scalar>::Zero(n);
  VectorX<Scalar> z = VectorX<Scalar>::Zero(m);
  VectorX<Scalar> y = VectorX<Scalar>::Zero(m);

  SolverResult<Scalar> result;
  auto residuals = [&](Scalar& r_prim, Scalar& r_dual) {
    r_prim = m ? (G * x - z).template lpNorm<Eigen::Infinity>() : Scalar(0);
    r_dual = (P * x + q + G.transpose() * y).template lpNorm<Eigen::Infinity>();
  };

  int it = 0;
  for (; it < opts.max_iters; ++it) {
    const VectorX<Scalar> rhs = opts.sigma * x - q + G.transpose() * (rho * z - y);
    const VectorX<Scalar> x_tilde = kkt.solve(rhs);
    const VectorX<Scalar> z_tilde = G * x_tilde;
    const VectorX<Scalar> x_next = opts.alpha * x_tilde + (Scalar(1) - opts.alpha) * x;
    const VectorX<Scalar> z_mix = opts.alpha * z_tilde + (Scalar(1) - opts.alpha) * z;
    const VectorX<Scalar> z_next = (z_mix + y / rho).cwiseMin(h);
    y += rho * (z_mix - z_next);
    x = x_next;
    z = z_next;

    if ((it + 1) % opts.check_every == 0) {
      Scalar r_prim, r_dual;
      residuals(r_prim, r_dual);
      if (r_prim <= opts.eps_abs && r_dual <= opts.eps_abs) break;
      // crude rho balancing
      if ((it + 1) % 200 == 0 && r_prim > 10 * r_dual && rho < Scalar(1e5)) {
        rho *= Scalar(5);
        kkt = factorize(rho);
      } else if ((it + 1) % 200 == 0 && r_dual > 10 * r_prim && rho > Scalar(1e-5)) {
        rho /= Scalar(5);
        kkt = factorize(rho);
      }
    }

    // active-set polish once the iterates are roughly settled
    if ((it + 1) % 250 == 0 || it == 0) {
      std::vector<int> active;
      for (int i = 0; i < m; ++i)
        if (y(i) > Scalar(1e-10) || h(i) - z(i) <= Scalar(1e-9)) active.push_back(i);
      const int k = int(active.size());
      MatrixX<Scalar> kkt_eq = MatrixX<Scalar>::Zero(n + k, n + k);
      kkt_eq.topLeftCorner(n, n) = P + Scalar(1e-12) * MatrixX<Scalar>::Identity(n, n);
      VectorX<Scalar> rhs_eq(n + k);
      rhs_eq.head(n) = -q;
      for (int a = 0; a < k; ++a) {
        kkt_eq.block(n + a, 0, 1, n) = G.row(active[a]);
        kkt_eq.block(0, n + a, n, 1) = G.row(active[a]).transpose();
        rhs_eq(n + a) = h(active[a]);
      }
      Eigen::CompleteOrthogonalDecomposition<MatrixX<Scalar>> cod(kkt_eq);
      const VectorX<Scalar> sol = cod.solve(rhs_eq);
      const VectorX<Scalar> x_pol = sol.head(n);
      VectorX<Scalar> y_pol = VectorX<Scalar>::Zero(m);
      bool dual_ok = true;
      for (int a = 0; a < k; ++a) {
        y_pol(active[a]) = sol(n + a);
        if (sol(n + a) < Scalar(-1e-9)) dual_ok = false;
      }
      const Scalar prim_violation =
          m ? (G * x_pol - h).cwiseMax(Scalar(0)).template lpNorm<Eigen::Infinity>() : Scalar(0);
      const Scalar dual_res =
          (P * x_pol + q + G.transpose() * y_pol).template lpNorm<Eigen::Infinity>();
      if (dual_ok && prim_violation <= Scalar(1e-9) && dual_res <= Scalar(1e-9)) {
        result.status = SolveStatus::Optimal;
        result.x = x_pol;
        result.objective = Scalar(0.5) * x_pol.dot(P * x_pol) + q.dot(x_pol);
        result.iterations = it + 1;
        return result;
      }
    }
  }

  Scalar r_prim, r_dual;
  residuals(r_prim, r_dual);
  result.x = x;
  result.objective = Scalar(0.5) * x.dot(P * x) + q.dot(x);
  result.iterations = it;
  result.status = (r_prim <= opts.eps_abs && r_dual <= opts.eps_abs) ? SolveStatus::Optimal
                                                                     : SolveStatus::MaxIter;
  return result;
}

}  // namespace otube
