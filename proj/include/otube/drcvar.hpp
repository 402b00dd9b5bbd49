// Distributionally robust CVaR machinery: CVaR of a discrete loss, the
// deterministic constraint system equivalent to the robust CVaR constraint
// over a state ambiguity set, worst-case CVaR evaluation, and the outer
// lambda search wrapping the LP/QP backends.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "otube/propagation.hpp"
#include "otube/solver.hpp"
#include "otube/transport.hpp"
#include "otube/types.hpp"

namespace otube {

/// Polyhedral constraint set {x : max_j a_j'x + b_j <= 0}.
template <class Scalar>
struct Polytope {
  Polytope(MatrixX<Scalar> directions_, VectorX<Scalar> offsets_)
      : directions(std::move(directions_)), offsets(std::move(offsets_)) {
    if (directions.rows() < 1) throw std::invalid_argument("Polytope: need at least one halfspace");
    if (offsets.size() != directions.rows())
      throw std::invalid_argument("Polytope: offsets do not match directions");
    if (!directions.allFinite() || !offsets.allFinite())
      throw std::invalid_argument("Polytope: non-finite entries");
  }

  Index count() const { return directions.rows(); }
  Index dimension() const { return directions.cols(); }

  /// max_j a_j'x + b_j; the set contains x iff the loss is <= 0.
  Scalar loss(const VectorX<Scalar>& x) const {
    return (directions * x + offsets).maxCoeff();
  }

  MatrixX<Scalar> directions;  // J x d
  VectorX<Scalar> offsets;     // J
};

using Polytoped = Polytope<double>;

/// CVaR at level 1-gamma of a discrete random loss: the exact minimizer of
/// tau + E[max(0, f - tau)] / gamma, i.e. the mean of the worst gamma-tail.
template <class Scalar>
Scalar cvar(const VectorX<Scalar>& values, const VectorX<Scalar>& weights, Scalar gamma) {
  if (!(gamma > Scalar(0) && gamma < Scalar(1)))
    throw std::invalid_argument("cvar: level must lie in (0, 1)");
  if (values.size() != weights.size() || values.size() < 1)
    throw std::invalid_argument("cvar: values and weights must align");
  using std::abs;
  if ((weights.array() < Scalar(0)).any() || abs(weights.sum() - Scalar(1)) > Scalar(1e-9))
    throw std::invalid_argument("cvar: weights must form a probability vector");

  std::vector<Index> order(values.size());
  std::iota(order.begin(), order.end(), Index(0));
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return values(a) > values(b); });

  Scalar tail = Scalar(0), mass = Scalar(0);
  for (Index k : order) {
    const Scalar take = std::min(weights(k), gamma - mass);
    if (take <= Scalar(0)) break;
    tail += take * values(k);
    mass += take;
    if (mass >= gamma) break;
  }
  return tail / gamma;
}

enum class GammaObjective { Feasibility, MaximizeOffsetSum, MinimizeSquaredNorm };

/// The deterministic constraint system equivalent to the robust CVaR
/// constraint over a composed-cost ambiguity set, in variables
/// (tau, lambda >= 0, s_1..s_N) plus an optional affine decision block:
///     lambda * radius * N + sum_i rho_i s_i <= 0                (risk_budget)
///     alpha_j'x_i + beta_j(tau) + q_j/(4 lambda) + g_j'dec <= s_i  (cell[i][j])
/// with alpha_j = a_j/gamma, beta_j(tau) = b_j/gamma + tau (gamma-1)/gamma for
/// j in [J], the closing row alpha_{J+1} = 0, beta_{J+1}(tau) = tau, and
/// rho_i = N w_i (all one for a uniform center).
template <class Scalar>
struct GammaProgram {
  MatrixX<Scalar> state_atoms;       // d x N
  VectorX<Scalar> atom_weights;      // N, probabilities
  MatrixX<Scalar> alphas;            // (J+1) x d, last row zero
  VectorX<Scalar> beta_offsets;      // (J+1), last entry zero
  VectorX<Scalar> beta_slopes;       // (J+1), last entry one
  VectorX<Scalar> q;                 // (J+1), alpha_j' Q_c alpha_j, last zero
  MatrixX<Scalar> cost_quadratic;    // Q_c = (M'M)^{-1}
  Scalar radius = Scalar(0);         // eps_t
  Scalar gamma = Scalar(0);
  GammaObjective objective = GammaObjective::Feasibility;
  MatrixX<Scalar> decision_coupling; // (J+1) x k, row j = g_j'

  Index atom_count() const { return state_atoms.cols(); }
  Index halfspace_count() const { return alphas.rows() - 1; }
  Index decision_dim() const { return decision_coupling.cols(); }

  /// alpha_j'x_i + b_j/gamma, the tau- and lambda-free part of cell[i][j].
  MatrixX<Scalar> base_terms() const {
    return (alphas * state_atoms).transpose().rowwise() + beta_offsets.transpose();
  }
};

using GammaProgramd = GammaProgram<double>;

template <class Scalar>
GammaProgram<Scalar> build_gamma(const AmbiguitySet<Scalar>& state_ball,
                                 const Polytope<Scalar>& poly, Scalar gamma) {
  if (!(gamma > Scalar(0) && gamma < Scalar(1)))
    throw std::invalid_argument("build_gamma: level must lie in (0, 1)");
  if (state_ball.cost.kind() != CostKind::SqEuclidComposed)
    throw std::invalid_argument("build_gamma: state ball must carry a composed cost");
  if (poly.dimension() != state_ball.center.dimension())
    throw std::invalid_argument("build_gamma: polytope dimension mismatch");

  const MatrixX<Scalar>& M = state_ball.cost.matrix();
  const PseudoInverse<Scalar> dec = pseudoinverse(M);
  if (dec.rank < M.cols())
    throw std::invalid_argument(
        "build_gamma: cost matrix is column rank-deficient (noise map must be full row-rank)");

  const Index d = M.cols(), J = poly.count();
  // (M'M)^{-1} = V diag(1/sigma^2) V'; equals D D' when M = pinv(D)
  const VectorX<Scalar> inv_sq =
      dec.singular_values.head(dec.rank).array().square().inverse();
  MatrixX<Scalar> qc = dec.V.leftCols(dec.rank) * inv_sq.asDiagonal() *
                       dec.V.leftCols(dec.rank).transpose();

  GammaProgram<Scalar> prog;
  prog.state_atoms = state_ball.center.atoms();
  prog.atom_weights = state_ball.center.weights();
  prog.cost_quadratic = std::move(qc);
  prog.radius = state_ball.radius;
  prog.gamma = gamma;

  prog.alphas = MatrixX<Scalar>::Zero(J + 1, d);
  prog.alphas.topRows(J) = poly.directions / gamma;
  prog.beta_offsets = VectorX<Scalar>::Zero(J + 1);
  prog.beta_offsets.head(J) = poly.offsets / gamma;
  prog.beta_slopes = VectorX<Scalar>::Constant(J + 1, (gamma - Scalar(1)) / gamma);
  prog.beta_slopes(J) = Scalar(1);

  prog.q = VectorX<Scalar>::Zero(J + 1);
  for (Index j = 0; j < J; ++j) {
    const Scalar qj = prog.alphas.row(j) * prog.cost_quadratic * prog.alphas.row(j).transpose();
    prog.q(j) = std::max(qj, Scalar(0));
  }
  prog.decision_coupling = MatrixX<Scalar>::Zero(J + 1, 0);
  return prog;
}

/// Turns the polytope offsets b into decision variables (objective: maximize
/// their sum). The fixed offsets are absorbed into the decision block, so the
/// beta offsets of the returned program are zero.
template <class Scalar>
GammaProgram<Scalar> with_offset_decision(GammaProgram<Scalar> prog) {
  const Index J = prog.halfspace_count();
  prog.beta_offsets.head(J).setZero();
  prog.decision_coupling = MatrixX<Scalar>::Zero(J + 1, J);
  prog.decision_coupling.topLeftCorner(J, J) =
      MatrixX<Scalar>::Identity(J, J) / prog.gamma;
  prog.objective = GammaObjective::MaximizeOffsetSum;
  return prog;
}

/// Adds a stacked feedforward decision entering the state atoms through the
/// lifted input map (objective: minimize its squared norm). The stored atoms
/// must be the zero-feedforward states.
template <class Scalar>
GammaProgram<Scalar> with_feedforward_decision(GammaProgram<Scalar> prog,
                                               const MatrixX<Scalar>& input_map) {
  if (input_map.rows() != prog.state_atoms.rows())
    throw std::invalid_argument("with_feedforward_decision: input map rows mismatch");
  prog.decision_coupling = prog.alphas * input_map;
  prog.objective = GammaObjective::MinimizeSquaredNorm;
  return prog;
}

namespace detail {

// dual objective g(tau, lambda) = lambda eps_t + sum_i w_i max_j
// [base(i,j) + slope_j tau + q_j / (4 lambda)]; `hyper` carries q/(4 lambda).
template <class Scalar>
Scalar dual_objective(const GammaProgram<Scalar>& prog, const MatrixX<Scalar>& base,
                      const VectorX<Scalar>& hyper, Scalar tau, Scalar lambda_times_radius) {
  Scalar total = Scalar(0);
  for (Index i = 0; i < base.rows(); ++i) {
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < base.cols(); ++j)
      best = std::max(best, base(i, j) + prog.beta_slopes(j) * tau + hyper(j));
    total += prog.atom_weights(i) * best;
  }
  return lambda_times_radius + total;
}

// golden-section minimization of a unimodal function on [lo, hi]
template <class Scalar, class F>
std::pair<Scalar, Scalar> golden_minimize(F&& f, Scalar lo, Scalar hi, Scalar width_tol,
                                          int max_iters = 200) {
  const Scalar inv_phi = Scalar(0.6180339887498949);
  Scalar a = lo, b = hi;
  Scalar x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  Scalar f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < max_iters && b - a > width_tol; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  const Scalar x = f1 <= f2 ? x1 : x2;
  return {x, std::min(f1, f2)};
}

// minimizes g(., lambda); returns (tau*, value)
template <class Scalar>
std::pair<Scalar, Scalar> minimize_over_tau(const GammaProgram<Scalar>& prog,
                                            const MatrixX<Scalar>& base,
                                            const VectorX<Scalar>& hyper,
                                            Scalar lambda_times_radius) {
  // tau* lies among the crossings of row j and the closing row:
  // tau_ij = gamma * (base(i,j) + q_j/(4 lambda))
  Scalar lo = std::numeric_limits<Scalar>::infinity();
  Scalar hi = -std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < base.rows(); ++i)
    for (Index j = 0; j + 1 < base.cols(); ++j) {
      const Scalar crossing = prog.gamma * (base(i, j) + hyper(j));
      lo = std::min(lo, crossing);
      hi = std::max(hi, crossing);
    }
  if (!(lo <= hi)) {
    lo = Scalar(-1);
    hi = Scalar(1);
  }
  lo -= Scalar(1);
  hi += Scalar(1);
  auto g = [&](Scalar tau) {
    return dual_objective(prog, base, hyper, tau, lambda_times_radius);
  };
  auto [tau, value] = golden_minimize(g, lo, hi, Scalar(1e-9) * (Scalar(1) + hi - lo));
  return {tau, value};
}

constexpr double kLambdaMin = 1e-6;
constexpr double kLambdaMax = 1e6;

}  // namespace detail

/// Worst-case CVaR of the polytope loss over the state ambiguity set:
///     inf_{tau, lambda > 0} lambda eps_t
///        + sum_i w_i max_j [alpha_j'x_i + beta_j(tau) + q_j/(4 lambda)],
/// solved by nested golden-section (outer lambda on a log scale, inner tau).
/// The radius-zero and all-q-zero instances reduce analytically to the sample
/// CVaR of the loss (the lambda -> infinity resp. lambda -> 0 branches).
/// The constraint holds iff the returned value is <= 0.
template <class Scalar>
Scalar worst_case_cvar(const GammaProgram<Scalar>& prog) {
  const Index J = prog.halfspace_count();
  const MatrixX<Scalar> base = prog.base_terms();

  if (prog.radius == Scalar(0) || prog.q.maxCoeff() == Scalar(0)) {
    VectorX<Scalar> losses(prog.atom_count());
    for (Index i = 0; i < prog.atom_count(); ++i)
      losses(i) = prog.gamma * base.row(i).head(J).maxCoeff();
    return cvar(losses, prog.atom_weights, prog.gamma);
  }

  auto phi = [&](Scalar log_lambda) {
    using std::exp;
    const Scalar lambda = exp(log_lambda);
    const VectorX<Scalar> hyper = prog.q / (Scalar(4) * lambda);
    return detail::minimize_over_tau(prog, base, hyper, lambda * prog.radius).second;
  };

  using std::log;
  const Scalar lo = log(Scalar(detail::kLambdaMin)), hi = log(Scalar(detail::kLambdaMax));
  const int grid = 49;
  int best = 0;
  Scalar best_value = std::numeric_limits<Scalar>::infinity();
  for (int k = 0; k < grid; ++k) {
    const Scalar u = lo + (hi - lo) * Scalar(k) / Scalar(grid - 1);
    const Scalar value = phi(u);
    if (value < best_value) {
      best_value = value;
      best = k;
    }
  }
  const Scalar step = (hi - lo) / Scalar(grid - 1);
  const Scalar a = lo + step * Scalar(std::max(0, best - 1));
  const Scalar b = lo + step * Scalar(std::min(grid - 1, best + 1));
  auto [u_star, value] = detail::golden_minimize(phi, a, b, Scalar(1e-9));

  using std::exp;
  const Scalar lambda_star = exp(u_star);
  if (lambda_star < Scalar(detail::kLambdaMin) * Scalar(1.05) ||
      lambda_star > Scalar(detail::kLambdaMax) / Scalar(1.05))
    throw std::runtime_error("worst_case_cvar: lambda search pinned a clamp");
  return value;
}

template <class Scalar>
Scalar worst_case_cvar(const AmbiguitySet<Scalar>& state_ball, const Polytope<Scalar>& poly,
                       Scalar gamma) {
  return worst_case_cvar(build_gamma(state_ball, poly, gamma));
}

/// Outcome of a fixed-lambda or outer solve over the constraint system.
template <class Scalar>
struct SolveReport {
  SolveStatus status = SolveStatus::MaxIter;
  Scalar objective = Scalar(0);  // margin | sum of offsets | squared norm
  Scalar tau = Scalar(0);
  Scalar lambda = Scalar(0);
  VectorX<Scalar> s;
  VectorX<Scalar> decision;
  std::vector<std::pair<Scalar, Scalar>> outer_trace;  // (lambda, objective)
  double wall_time_ms = 0;
};

using SolveReportd = SolveReport<double>;

namespace detail {

// lambda sentinels for the analytic branches
template <class Scalar>
bool lambda_is_analytic(const GammaProgram<Scalar>& prog, Scalar lambda) {
  using std::isinf;
  if (isinf(lambda)) return prog.radius == Scalar(0);
  if (lambda == Scalar(0)) return prog.q.maxCoeff() == Scalar(0);
  return false;
}

}  // namespace detail

/// Solves the constraint system at a fixed lambda. All rows are affine in
/// (tau, s, decision): an LP for the feasibility and offset objectives, a
/// convex QP (ADMM) for the squared-norm objective. lambda = infinity is the
/// radius-zero analytic branch (the hyperbolic terms vanish); lambda = 0 is
/// the all-q-zero branch.
template <class Scalar>
SolveReport<Scalar> solve_fixed_lambda(const GammaProgram<Scalar>& prog, Scalar lambda) {
  using std::isinf;
  const auto t0 = std::chrono::steady_clock::now();
  if (!(lambda > Scalar(0)) && !detail::lambda_is_analytic(prog, lambda))
    throw std::invalid_argument("solve_fixed_lambda: lambda must be positive");
  if (isinf(lambda) && !detail::lambda_is_analytic(prog, lambda))
    throw std::invalid_argument("solve_fixed_lambda: infinite lambda requires radius zero");

  const Index N = prog.atom_count(), J1 = prog.halfspace_count() + 1;
  const Index k = prog.decision_dim();
  const Index nv = 1 + N + k;  // [tau; s; dec]
  const MatrixX<Scalar> base = prog.base_terms();
  const VectorX<Scalar> hyper =
      (isinf(lambda) || lambda == Scalar(0)) ? VectorX<Scalar>::Zero(J1).eval()
                                             : (prog.q / (Scalar(4) * lambda)).eval();
  const Scalar risk_constant =
      (isinf(lambda) || lambda == Scalar(0)) ? Scalar(0) : lambda * prog.radius * Scalar(N);
  const VectorX<Scalar> rho = Scalar(N) * prog.atom_weights;

  const bool feasibility = prog.objective == GammaObjective::Feasibility;
  const Index rows = N * J1 + (feasibility ? 0 : 1);
  MatrixX<Scalar> G = MatrixX<Scalar>::Zero(rows, nv);
  VectorX<Scalar> h(rows);
  Index row = 0;
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j < J1; ++j, ++row) {
      G(row, 0) = prog.beta_slopes(j);
      G(row, 1 + i) = Scalar(-1);
      if (k) G.block(row, 1 + N, 1, k) = prog.decision_coupling.row(j);
      h(row) = -(base(i, j) + hyper(j));
    }
  if (!feasibility) {
    G.block(row, 1, 1, N) = rho.transpose();
    h(row) = -risk_constant;
  }

  SolveReport<Scalar> report;
  report.lambda = lambda;

  auto finish = [&](SolveStatus status, const VectorX<Scalar>& x) {
    report.status = status;
    if (status == SolveStatus::Optimal) {
      report.tau = x(0);
      report.s = x.segment(1, N);
      report.decision = x.tail(k);
      switch (prog.objective) {
        case GammaObjective::Feasibility:
          report.objective = risk_constant + rho.dot(report.s);
          break;
        case GammaObjective::MaximizeOffsetSum:
          report.objective = report.decision.sum();
          break;
        case GammaObjective::MinimizeSquaredNorm:
          report.objective = report.decision.squaredNorm();
          break;
      }
    }
    report.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return report;
  };

  if (prog.objective == GammaObjective::MinimizeSquaredNorm) {
    // certify feasibility with a phase-1 LP, then run the QP
    auto probe = solve_lp(VectorX<Scalar>(VectorX<Scalar>::Zero(nv)), G, h);
    if (probe.status != SolveStatus::Optimal) return finish(probe.status, VectorX<Scalar>());
    MatrixX<Scalar> P = MatrixX<Scalar>::Zero(nv, nv);
    P.bottomRightCorner(k, k) = Scalar(2) * MatrixX<Scalar>::Identity(k, k);
    auto qp = solve_qp(P, VectorX<Scalar>(VectorX<Scalar>::Zero(nv)), G, h);
    return finish(qp.status, qp.x);
  }

  VectorX<Scalar> c = VectorX<Scalar>::Zero(nv);
  if (prog.objective == GammaObjective::Feasibility) {
    c.segment(1, N) = rho;
  } else {
    c.tail(k).setConstant(Scalar(-1));  // maximize the offset sum
  }
  auto lp = solve_lp(c, G, h);
  if (lp.status == SolveStatus::Unbounded)
    throw std::runtime_error("solve_fixed_lambda: unexpected unbounded program");
  return finish(lp.status, lp.x);
}

/// Golden-section search over lambda in [1e-6, 1e6] on a log scale, wrapping
/// solve_fixed_lambda. The composite problem is jointly convex and its value
/// is unimodal in lambda along the partial-minimization path; the bracket is
/// refined until the relative objective change drops below 1e-6. Fails loudly
/// when the optimum pins a clamp.
template <class Scalar>
SolveReport<Scalar> solve_outer(const GammaProgram<Scalar>& prog) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::pair<Scalar, Scalar>> trace;

  auto stamp = [&](SolveReport<Scalar> report) {
    report.outer_trace = trace;
    report.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return report;
  };

  if (prog.radius == Scalar(0))
    return stamp(solve_fixed_lambda(prog, std::numeric_limits<Scalar>::infinity()));
  if (prog.q.maxCoeff() == Scalar(0)) return stamp(solve_fixed_lambda(prog, Scalar(0)));

  // minimize phi(log lambda); infeasible inner solves count as +infinity
  auto phi = [&](Scalar u) {
    using std::exp;
    const Scalar lambda = exp(u);
    auto report = solve_fixed_lambda(prog, lambda);
    Scalar value = std::numeric_limits<Scalar>::infinity();
    if (report.status == SolveStatus::Optimal)
      value = prog.objective == GammaObjective::MaximizeOffsetSum ? -report.objective
                                                                  : report.objective;
    trace.emplace_back(lambda, value);
    return value;
  };

  using std::exp;
  using std::log;
  const Scalar lo = log(Scalar(detail::kLambdaMin)), hi = log(Scalar(detail::kLambdaMax));
  const int grid = 49;
  const Scalar step = (hi - lo) / Scalar(grid - 1);
  int best = -1;
  Scalar best_value = std::numeric_limits<Scalar>::infinity();
  for (int kk = 0; kk < grid; ++kk) {
    const Scalar value = phi(lo + step * Scalar(kk));
    if (value < best_value) {
      best_value = value;
      best = kk;
    }
  }
  if (best < 0) {
    SolveReport<Scalar> report;
    report.status = SolveStatus::Infeasible;
    return stamp(report);
  }

  Scalar a = lo + step * Scalar(std::max(0, best - 1));
  Scalar b = lo + step * Scalar(std::min(grid - 1, best + 1));
  const Scalar inv_phi = Scalar(0.6180339887498949);
  Scalar x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  Scalar f1 = phi(x1), f2 = phi(x2);
  Scalar previous = std::min(std::min(f1, f2), best_value);
  for (int it = 0; it < 200 && b - a > Scalar(1e-7); ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = phi(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = phi(x2);
    }
    using std::abs;
    const Scalar current = std::min(f1, f2);
    if (b - a <= Scalar(1e-3) &&
        abs(previous - current) <= Scalar(1e-6) * std::max(Scalar(1), abs(current)))
      break;
    previous = std::min(previous, current);
  }

  const Scalar u_star = f1 <= f2 ? x1 : x2;
  const Scalar lambda_star = exp(u_star);
  if (lambda_star < Scalar(detail::kLambdaMin) * Scalar(1.05) ||
      lambda_star > Scalar(detail::kLambdaMax) / Scalar(1.05))
    throw std::runtime_error("solve_outer: lambda search pinned a clamp; check the model scale");

  return stamp(solve_fixed_lambda(prog, lambda_star));
}

namespace detail {

inline std::string format_coefficient(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

}  // namespace detail

/// Deterministic textual dump of the constraint system at a given lambda,
/// with 17-significant-digit coefficients. Intended for debugging and
/// regression diffs.
template <class Scalar>
std::string dump_program(const GammaProgram<Scalar>& prog, Scalar lambda) {
  using detail::format_coefficient;
  const Index N = prog.atom_count(), J1 = prog.halfspace_count() + 1;
  const MatrixX<Scalar> base = prog.base_terms();
  const bool analytic = detail::lambda_is_analytic(prog, lambda);
  const VectorX<Scalar> hyper =
      analytic ? VectorX<Scalar>::Zero(J1).eval() : (prog.q / (Scalar(4) * lambda)).eval();
  const Scalar risk_constant = analytic ? Scalar(0) : lambda * prog.radius * Scalar(N);
  const VectorX<Scalar> rho = Scalar(N) * prog.atom_weights;

  std::string out;
  out += "gamma_program N=" + std::to_string(N) + " J=" + std::to_string(J1 - 1) +
         " decision_dim=" + std::to_string(prog.decision_dim()) +
         " radius=" + format_coefficient(double(prog.radius)) +
         " gamma=" + format_coefficient(double(prog.gamma)) +
         " lambda=" + format_coefficient(double(lambda)) + "\n";
  out += "risk_budget:";
  for (Index i = 0; i < N; ++i)
    out += " + " + format_coefficient(double(rho(i))) + "*s[" + std::to_string(i) + "]";
  out += " <= " + format_coefficient(double(-risk_constant)) + "\n";
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j < J1; ++j) {
      out += "cell[" + std::to_string(i) + "][" + std::to_string(j) + "]: " +
             format_coefficient(double(prog.beta_slopes(j))) + "*tau - s[" + std::to_string(i) +
             "]";
      for (Index l = 0; l < prog.decision_dim(); ++l)
        out += " + " + format_coefficient(double(prog.decision_coupling(j, l))) + "*dec[" +
               std::to_string(l) + "]";
      out += " <= " + format_coefficient(double(-(base(i, j) + hyper(j)))) + "\n";
    }
  return out;
}

}  // namespace otube
