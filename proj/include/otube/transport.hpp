// Transportation costs, exact discrete optimal-transport discrepancy via a
// transportation simplex, and optimal-transport ambiguity sets.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "otube/distribution.hpp"
#include "otube/types.hpp"

namespace otube {

enum class CostKind { SqEuclidComposed, PowerNorm };

/// Transportation cost c(z) for moving one unit of mass across a displacement
/// z. Two families:
///   SqEuclidComposed(M):  c(z) = |M z|^2  (plain squared Euclidean for M = I)
///   PowerNorm(p):         c(z) = |z|^p    (1-D / low-D test family)
/// Both are orthomonotone: c(x1 + x2) >= c(x1) whenever x1'x2 = 0.
template <class Scalar>
class TransportationCost {
 public:
  static TransportationCost sq_euclidean(Index d) {
    return sq_euclidean_composed(MatrixX<Scalar>::Identity(d, d));
  }

  static TransportationCost sq_euclidean_composed(MatrixX<Scalar> M) {
    if (M.rows() < 1 || M.cols() < 1)
      throw std::invalid_argument("TransportationCost: empty matrix");
    if (!M.allFinite()) throw std::invalid_argument("TransportationCost: non-finite matrix");
    TransportationCost c;
    c.kind_ = CostKind::SqEuclidComposed;
    c.matrix_ = std::move(M);
    return c;
  }

  static TransportationCost power_norm(Scalar p) {
    if (!(p >= Scalar(1))) throw std::invalid_argument("TransportationCost: power must be >= 1");
    TransportationCost c;
    c.kind_ = CostKind::PowerNorm;
    c.power_ = p;
    return c;
  }

  CostKind kind() const { return kind_; }
  const MatrixX<Scalar>& matrix() const { return matrix_; }
  Scalar power() const { return power_; }

  /// Displacement dimension the cost accepts; -1 means any (PowerNorm).
  Index dimension() const {
    return kind_ == CostKind::SqEuclidComposed ? matrix_.cols() : Index(-1);
  }

  bool accepts_dimension(Index d) const { return dimension() == -1 || dimension() == d; }

  bool is_plain_sq_euclidean() const {
    return kind_ == CostKind::SqEuclidComposed && matrix_.rows() == matrix_.cols() &&
           matrix_.isIdentity(Scalar(1e-12));
  }

  Scalar operator()(const VectorX<Scalar>& z) const {
    if (!accepts_dimension(z.size()))
      throw std::invalid_argument("TransportationCost: displacement dimension mismatch");
    if (kind_ == CostKind::SqEuclidComposed) return (matrix_ * z).squaredNorm();
    using std::pow;
    return pow(z.norm(), power_);
  }

 private:
  TransportationCost() = default;
  CostKind kind_ = CostKind::PowerNorm;
  MatrixX<Scalar> matrix_;
  Scalar power_ = Scalar(1);
};

using TransportationCostd = TransportationCost<double>;

template <class Scalar>
Scalar evaluate_cost(const TransportationCost<Scalar>& c, const VectorX<Scalar>& z) {
  return c(z);
}

/// An optimal coupling between two discrete distributions: gamma(i, j) is the
/// mass moved from atom i of P to atom j of Q. Row sums reproduce the weights
/// of P and column sums the weights of Q within 1e-9.
template <class Scalar>
struct TransportPlan {
  MatrixX<Scalar> coupling;
  Scalar objective = Scalar(0);
};

using TransportPland = TransportPlan<double>;

namespace detail {

// Computes the basic solution carried by a spanning-tree basis for the given
// marginals by leaf elimination. Exact for any tree basis.
template <class Scalar>
void tree_solve(const std::vector<std::pair<int, int>>& basis, const VectorX<Scalar>& p,
                const VectorX<Scalar>& q, std::vector<Scalar>& flows) {
  const int m = int(p.size()), n = int(q.size());
  std::vector<Scalar> row_left(m), col_left(n);
  for (int i = 0; i < m; ++i) row_left[i] = p(i);
  for (int j = 0; j < n; ++j) col_left[j] = q(j);

  std::vector<std::vector<int>> by_row(m), by_col(n);
  for (int e = 0; e < int(basis.size()); ++e) {
    by_row[basis[e].first].push_back(e);
    by_col[basis[e].second].push_back(e);
  }
  std::vector<int> row_deg(m), col_deg(n);
  for (int i = 0; i < m; ++i) row_deg[i] = int(by_row[i].size());
  for (int j = 0; j < n; ++j) col_deg[j] = int(by_col[j].size());
  std::vector<bool> done(basis.size(), false);
  flows.assign(basis.size(), Scalar(0));

  // peel leaves: a row/col incident to exactly one undetermined basic cell
  std::vector<int> stack;
  for (int i = 0; i < m; ++i)
    if (row_deg[i] == 1) stack.push_back(i);  // rows encoded [0, m)
  for (int j = 0; j < n; ++j)
    if (col_deg[j] == 1) stack.push_back(m + j);  // cols encoded [m, m+n)

  std::size_t resolved = 0;
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    int edge = -1;
    if (node < m) {
      if (row_deg[node] != 1) continue;
      for (int e : by_row[node])
        if (!done[e]) edge = e;
    } else {
      if (col_deg[node - m] != 1) continue;
      for (int e : by_col[node - m])
        if (!done[e]) edge = e;
    }
    if (edge < 0) continue;
    const int i = basis[edge].first, j = basis[edge].second;
    const Scalar x = (node < m) ? row_left[i] : col_left[j];
    flows[edge] = x;
    done[edge] = true;
    ++resolved;
    row_left[i] -= x;
    col_left[j] -= x;
    if (--row_deg[i] == 1) stack.push_back(i);
    if (--col_deg[j] == 1) stack.push_back(m + j);
  }
  if (resolved != basis.size())
    throw std::runtime_error("transport_simplex: basis is not a spanning tree");
}

}  // namespace detail

/// Solves the balanced transportation problem
///     min sum_ij gamma_ij cost(i, j)   s.t.  gamma 1 = p, gamma' 1 = q, gamma >= 0
/// exactly, with a primal transportation simplex: north-west-corner start,
/// MODI (u-v) pivoting, Bland's smallest-index rule, and a lexicographic
/// weight perturbation (i * 1e-13) that is subtracted at extraction.
template <class Scalar>
TransportPlan<Scalar> transport_simplex(const MatrixX<Scalar>& cost, const VectorX<Scalar>& p,
                                        const VectorX<Scalar>& q) {
  using std::abs;
  const int m = int(p.size()), n = int(q.size());
  if (cost.rows() != m || cost.cols() != n)
    throw std::invalid_argument("transport_simplex: cost matrix shape mismatch");
  if (m < 1 || n < 1) throw std::invalid_argument("transport_simplex: empty marginals");
  if ((p.array() < Scalar(0)).any() || (q.array() < Scalar(0)).any())
    throw std::invalid_argument("transport_simplex: negative marginal");
  if (abs(p.sum() - q.sum()) > Scalar(1e-9))
    throw std::invalid_argument("transport_simplex: marginals are not balanced");
  if (!cost.allFinite()) throw std::invalid_argument("transport_simplex: non-finite costs");

  // Perturbed marginals; the perturbation keeps the north-west corner start
  // non-degenerate and is removed again by re-solving on the final basis.
  const Scalar eps = Scalar(1e-13);
  VectorX<Scalar> pp = p, qq = q;
  for (int i = 0; i < m; ++i) pp(i) += Scalar(i + 1) * eps;
  qq(n - 1) += Scalar(m) * Scalar(m + 1) / Scalar(2) * eps;

  // North-west corner initial basis (m + n - 1 cells, spanning tree).
  std::vector<std::pair<int, int>> basis;
  std::vector<Scalar> flow;
  basis.reserve(m + n - 1);
  {
    VectorX<Scalar> a = pp, b = qq;
    int i = 0, j = 0;
    for (int step = 0; step < m + n - 1; ++step) {
      const Scalar x = std::min(a(i), b(j));
      basis.emplace_back(i, j);
      flow.push_back(x);
      a(i) -= x;
      b(j) -= x;
      if (step == m + n - 2) break;
      if (i < m - 1 && (a(i) <= b(j) || j == n - 1))
        ++i;
      else
        ++j;
    }
  }

  std::vector<int> cell_to_edge(std::size_t(m) * n, -1);
  auto cell_id = [n](int i, int j) { return std::size_t(i) * n + j; };
  for (int e = 0; e < int(basis.size()); ++e) cell_to_edge[cell_id(basis[e].first, basis[e].second)] = e;

  const Scalar cost_scale = cost.cwiseAbs().maxCoeff();
  const Scalar opt_tol = Scalar(1e-12) * (Scalar(1) + cost_scale);
  const long max_iters = 200L * (m + n) * (m + n) + 1000;

  std::vector<Scalar> u(m), v(n);
  std::vector<char> u_set(m), v_set(n);
  std::vector<std::vector<int>> row_edges(m), col_edges(n);

  for (long iter = 0;; ++iter) {
    if (iter >= max_iters)
      throw std::runtime_error("transport_simplex: pivot limit exceeded (LP non-convergence)");

    // MODI duals: solve u_i + v_j = c_ij over the basis tree.
    for (int i = 0; i < m; ++i) row_edges[i].clear();
    for (int j = 0; j < n; ++j) col_edges[j].clear();
    for (int e = 0; e < int(basis.size()); ++e) {
      row_edges[basis[e].first].push_back(e);
      col_edges[basis[e].second].push_back(e);
    }
    std::fill(u_set.begin(), u_set.end(), 0);
    std::fill(v_set.begin(), v_set.end(), 0);
    u[0] = Scalar(0);
    u_set[0] = 1;
    std::vector<int> frontier{0};  // node encoding: rows [0, m), cols [m, m+n)
    while (!frontier.empty()) {
      const int node = frontier.back();
      frontier.pop_back();
      if (node < m) {
        for (int e : row_edges[node]) {
          const int j = basis[e].second;
          if (!v_set[j]) {
            v[j] = cost(node, j) - u[node];
            v_set[j] = 1;
            frontier.push_back(m + j);
          }
        }
      } else {
        const int j = node - m;
        for (int e : col_edges[j]) {
          const int i = basis[e].first;
          if (!u_set[i]) {
            u[i] = cost(i, j) - v[j];
            u_set[i] = 1;
            frontier.push_back(i);
          }
        }
      }
    }
    for (int i = 0; i < m; ++i)
      if (!u_set[i]) throw std::runtime_error("transport_simplex: disconnected basis");
    for (int j = 0; j < n; ++j)
      if (!v_set[j]) throw std::runtime_error("transport_simplex: disconnected basis");

    // Entering cell: Bland's rule, smallest linear index with negative
    // reduced cost.
    int enter_i = -1, enter_j = -1;
    for (int i = 0; i < m && enter_i < 0; ++i)
      for (int j = 0; j < n; ++j) {
        if (cell_to_edge[cell_id(i, j)] >= 0) continue;
        if (cost(i, j) - u[i] - v[j] < -opt_tol) {
          enter_i = i;
          enter_j = j;
          break;
        }
      }
    if (enter_i < 0) break;  // optimal

    // Unique tree path from row node enter_i to column node enter_j.
    const int nodes = m + n;
    std::vector<int> parent_node(nodes, -2), parent_edge(nodes, -1);
    parent_node[enter_i] = -1;
    std::vector<int> queue{enter_i};
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int node = queue[head];
      if (node == m + enter_j) break;
      const auto& edges = node < m ? row_edges[node] : col_edges[node - m];
      for (int e : edges) {
        const int next = node < m ? m + basis[e].second : basis[e].first;
        if (parent_node[next] == -2) {
          parent_node[next] = node;
          parent_edge[next] = e;
          queue.push_back(next);
        }
      }
    }
    if (parent_node[m + enter_j] == -2)
      throw std::runtime_error("transport_simplex: disconnected basis");

    // Alternating cycle: entering cell gets +theta, path edges alternate.
    std::vector<int> path_edges;
    for (int node = m + enter_j; parent_node[node] != -1; node = parent_node[node])
      path_edges.push_back(parent_edge[node]);
    // path_edges runs col(enter_j) -> ... -> row(enter_i); the edge adjacent
    // to the entering column is a "-" edge, then signs alternate.
    Scalar theta = Scalar(-1);
    int leave_pos = -1;
    for (int k = 0; k < int(path_edges.size()); k += 2) {
      const Scalar f = flow[path_edges[k]];
      if (theta < Scalar(0) || f < theta ||
          (f == theta && path_edges[k] < path_edges[leave_pos])) {
        theta = f;
        leave_pos = k;
      }
    }
    if (leave_pos < 0) throw std::runtime_error("transport_simplex: malformed cycle");

    for (int k = 0; k < int(path_edges.size()); ++k)
      flow[path_edges[k]] += (k % 2 == 0) ? -theta : theta;

    const int leave_edge = path_edges[leave_pos];
    cell_to_edge[cell_id(basis[leave_edge].first, basis[leave_edge].second)] = -1;
    basis[leave_edge] = {enter_i, enter_j};
    flow[leave_edge] = theta;
    cell_to_edge[cell_id(enter_i, enter_j)] = leave_edge;
  }

  // Subtract the perturbation: re-solve the final (optimal) basis against the
  // unperturbed marginals.
  std::vector<Scalar> exact_flow;
  detail::tree_solve(basis, p, q, exact_flow);

  TransportPlan<Scalar> plan;
  plan.coupling = MatrixX<Scalar>::Zero(m, n);
  Scalar objective = Scalar(0);
  for (int e = 0; e < int(basis.size()); ++e) {
    Scalar x = exact_flow[e];
    if (x < Scalar(0)) {
      if (x < Scalar(-1e-9)) throw std::runtime_error("transport_simplex: negative basic flow");
      x = Scalar(0);
    }
    plan.coupling(basis[e].first, basis[e].second) += x;
    objective += x * cost(basis[e].first, basis[e].second);
  }
  plan.objective = objective;
  return plan;
}

namespace detail {

template <class Scalar>
MatrixX<Scalar> pairwise_cost_matrix(const TransportationCost<Scalar>& c,
                                     const MatrixX<Scalar>& X, const MatrixX<Scalar>& Y) {
  MatrixX<Scalar> C(X.cols(), Y.cols());
  if (c.kind() == CostKind::SqEuclidComposed) {
    const MatrixX<Scalar> MX = c.matrix() * X;
    const MatrixX<Scalar> MY = c.matrix() * Y;
    for (Index i = 0; i < MX.cols(); ++i)
      for (Index j = 0; j < MY.cols(); ++j) C(i, j) = (MX.col(i) - MY.col(j)).squaredNorm();
  } else {
    using std::pow;
    for (Index i = 0; i < X.cols(); ++i)
      for (Index j = 0; j < Y.cols(); ++j) C(i, j) = pow((X.col(i) - Y.col(j)).norm(), c.power());
  }
  return C;
}

}  // namespace detail

/// The OT discrepancy T_c(P, Q): the minimum cost of transporting P onto Q,
/// together with an optimal transport plan. Exact (transportation LP); when P
/// is a single Dirac the closed form E_Q[c(x - .)] is used, which the LP path
/// reproduces.
template <class Scalar>
std::pair<Scalar, TransportPlan<Scalar>> ot_discrepancy(const TransportationCost<Scalar>& c,
                                                        const DiscreteDistribution<Scalar>& P,
                                                        const DiscreteDistribution<Scalar>& Q) {
  if (P.dimension() != Q.dimension())
    throw std::invalid_argument("ot_discrepancy: distributions have different dimensions");
  if (!c.accepts_dimension(P.dimension()))
    throw std::invalid_argument("ot_discrepancy: cost dimension mismatch");

  const MatrixX<Scalar> C = detail::pairwise_cost_matrix(c, P.atoms(), Q.atoms());
  if (P.size() == 1) {
    TransportPlan<Scalar> plan;
    plan.coupling = Q.weights().transpose();
    plan.objective = C.row(0).dot(Q.weights());
    return {plan.objective, std::move(plan)};
  }
  TransportPlan<Scalar> plan = transport_simplex(C, P.weights(), Q.weights());
  return {plan.objective, std::move(plan)};
}

/// How an ambiguity set relates to the exact set it represents.
enum class Exactness {
  Exact,                  // the set is exactly the advertised family
  Outer,                  // a superset (e.g. non-surjective propagation)
  OuterTrajectoryCenter,  // outer, with the center built from observed trajectories
};

inline const char* to_string(Exactness e) {
  switch (e) {
    case Exactness::Exact: return "exact";
    case Exactness::Outer: return "outer-approximation";
    case Exactness::OuterTrajectoryCenter: return "outer-approximation/trajectory-center";
  }
  return "?";
}

inline bool is_exact(Exactness e) { return e == Exactness::Exact; }

/// The OT ambiguity set: all distributions onto which the center can be
/// transported with budget at most `radius` under the given cost.
template <class Scalar>
struct AmbiguitySet {
  AmbiguitySet(DiscreteDistribution<Scalar> center_, TransportationCost<Scalar> cost_,
               Scalar radius_, Exactness exactness_ = Exactness::Exact)
      : center(std::move(center_)), cost(std::move(cost_)), radius(radius_),
        exactness(exactness_) {
    if (!(radius >= Scalar(0))) throw std::invalid_argument("AmbiguitySet: radius must be >= 0");
    if (!cost.accepts_dimension(center.dimension()))
      throw std::invalid_argument("AmbiguitySet: cost dimension does not match center");
  }

  DiscreteDistribution<Scalar> center;
  TransportationCost<Scalar> cost;
  Scalar radius;
  Exactness exactness;
};

using AmbiguitySetd = AmbiguitySet<double>;

/// Membership test: T_cost(center, Q) <= radius + tol.
template <class Scalar>
bool contains(const AmbiguitySet<Scalar>& ball, const DiscreteDistribution<Scalar>& Q,
              Scalar tol = Scalar(1e-7)) {
  return ot_discrepancy(ball.cost, ball.center, Q).first <= ball.radius + tol;
}

}  // namespace otube
