#pragma once

#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "aot/core.hpp"
#include "aot/feature_space.hpp"

namespace aot {

enum class CostKind { squared_euclidean, euclidean };

struct CostMatrix {
  Matrix entries;
  CostKind kind = CostKind::squared_euclidean;

  std::size_t rows() const { return entries.rows; }
  std::size_t cols() const { return entries.cols; }
  double operator()(std::size_t i, std::size_t j) const { return entries(i, j); }
};

struct TransportPlan {
  Matrix coupling;
  double row_marginal_error = 0.0;  // L1
  double col_marginal_error = 0.0;  // L1
  int iterations_used = 0;
  bool converged = true;
};

inline CostMatrix cost_matrix(const WeightedPointCloud& a, const WeightedPointCloud& b,
                              CostKind kind = CostKind::squared_euclidean) {
  require(a.dim() == b.dim(), "cost_matrix: point dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                                  std::to_string(b.dim()) + ")");
  CostMatrix c{Matrix(a.size(), b.size()), kind};
  parallel_for(a.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double s = detail::sq_dist(a.points.row(i), b.points.row(j), a.dim());
      c.entries(i, j) = kind == CostKind::squared_euclidean ? s : std::sqrt(s);
    }
  });
  return c;
}

inline double plan_cost(const TransportPlan& plan, const CostMatrix& c) {
  require(plan.coupling.rows == c.rows() && plan.coupling.cols == c.cols(), "plan_cost: shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < c.entries.data.size(); ++k) s += plan.coupling.data[k] * c.entries.data[k];
  return s;
}

namespace detail {

inline void check_distribution(std::span<const double> w, std::size_t expected, const char* name) {
  require(w.size() == expected, std::string(name) + " length does not match the cost matrix");
  double total = 0.0;
  for (double x : w) {
    require(std::isfinite(x) && x >= 0.0, std::string(name) + " must be finite and nonnegative");
    total += x;
  }
  require(std::abs(total - 1.0) <= 1e-9, std::string(name) + " must sum to 1");
}

inline void fill_marginal_errors(TransportPlan& plan, std::span<const double> a, std::span<const double> b) {
  const auto& p = plan.coupling;
  plan.row_marginal_error = 0.0;
  plan.col_marginal_error = 0.0;
  std::vector<double> col(p.cols, 0.0);
  for (std::size_t i = 0; i < p.rows; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) {
      r += p(i, j);
      col[j] += p(i, j);
    }
    plan.row_marginal_error += std::abs(r - a[i]);
  }
  for (std::size_t j = 0; j < p.cols; ++j) plan.col_marginal_error += std::abs(col[j] - b[j]);
}

inline double log_sum_exp(const double* v, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) m = std::max(m, v[k]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += std::exp(v[k] - m);
  return m + std::log(s);
}

inline TransportPlan sinkhorn_scaling(const CostMatrix& c, std::span<const double> a, std::span<const double> b, double eps,
                                      int max_iter, double tol) {
  const std::size_t n = c.rows(), m = c.cols();
  Matrix kernel(n, m);
  for (std::size_t k = 0; k < kernel.data.size(); ++k) kernel.data[k] = std::exp(-c.entries.data[k] / eps);
  std::vector<double> u(n, 1.0), v(m, 1.0), kv(n), ktu(m);

  TransportPlan plan;
  plan.converged = false;
  for (int it = 1; it <= max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += kernel(i, j) * v[j];
      kv[i] = s;
      u[i] = a[i] / s;
    }
    std::fill(ktu.begin(), ktu.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) ktu[j] += kernel(i, j) * u[i];
    for (std::size_t j = 0; j < m; ++j) v[j] = b[j] / ktu[j];
    for (std::size_t k = 0; k < n; ++k)
      if (!std::isfinite(u[k]))
        fail(ErrorKind::solver, "sinkhorn: scaling diverged at iteration " + std::to_string(it) + "; epsilon too small for multiplicative updates");
    for (std::size_t k = 0; k < m; ++k)
      if (!std::isfinite(v[k]))
        fail(ErrorKind::solver, "sinkhorn: scaling diverged at iteration " + std::to_string(it) + "; epsilon too small for multiplicative updates");

    // Columns are exact after the v update; measure the row violation.
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += kernel(i, j) * v[j];
      err += std::abs(u[i] * s - a[i]);
    }
    plan.iterations_used = it;
    if (err < tol) {
      plan.converged = true;
      break;
    }
  }
  plan.coupling = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) plan.coupling(i, j) = u[i] * kernel(i, j) * v[j];
  return plan;
}

inline TransportPlan sinkhorn_log(const CostMatrix& c, std::span<const double> a, std::span<const double> b, double eps,
                                  int max_iter, double tol) {
  const std::size_t n = c.rows(), m = c.cols();
  std::vector<double> f(n, 0.0), g(m, 0.0), log_a(n), log_b(m), scratch(std::max(n, m));
  for (std::size_t i = 0; i < n; ++i) log_a[i] = std::log(a[i]);
  for (std::size_t j = 0; j < m; ++j) log_b[j] = std::log(b[j]);
  const double neg_inf = -std::numeric_limits<double>::infinity();

  TransportPlan plan;
  plan.converged = false;
  for (int it = 1; it <= max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) scratch[j] = (g[j] - c(i, j)) / eps;
      f[i] = a[i] > 0.0 ? eps * (log_a[i] - log_sum_exp(scratch.data(), m)) : neg_inf;
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) scratch[i] = (f[i] - c(i, j)) / eps;
      g[j] = b[j] > 0.0 ? eps * (log_b[j] - log_sum_exp(scratch.data(), n)) : neg_inf;
    }
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      if (a[i] > 0.0)
        for (std::size_t j = 0; j < m; ++j)
          if (b[j] > 0.0) s += std::exp((f[i] + g[j] - c(i, j)) / eps);
      err += std::abs(s - a[i]);
    }
    if (!std::isfinite(err)) fail(ErrorKind::solver, "sinkhorn: log-domain iteration produced NaN at iteration " + std::to_string(it));
    plan.iterations_used = it;
    if (err < tol) {
      plan.converged = true;
      break;
    }
  }
  plan.coupling = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      plan.coupling(i, j) = (a[i] > 0.0 && b[j] > 0.0) ? std::exp((f[i] + g[j] - c(i, j)) / eps) : 0.0;
  return plan;
}

}  // namespace detail

inline constexpr double kLogDomainEpsilon = 0.01;

// Entropic OT by alternating marginal scaling. Multiplicative updates for
// epsilon >= 0.01, log-sum-exp stabilized updates below. Stops once the L1
// marginal violation drops below tol; running out of iterations is reported
// through `converged`, not thrown.
inline TransportPlan sinkhorn(const CostMatrix& c, std::span<const double> a, std::span<const double> b, double epsilon,
                              int max_iter = 10000, double tol = 1e-9) {
  require(c.rows() >= 1 && c.cols() >= 1, "sinkhorn: empty cost matrix");
  require(c.entries.all_finite(), "sinkhorn: cost matrix has non-finite entries");
  detail::check_distribution(a, c.rows(), "source weights");
  detail::check_distribution(b, c.cols(), "target weights");
  require(epsilon > 0.0 && std::isfinite(epsilon), "sinkhorn: epsilon must be positive");
  require(max_iter > 0, "sinkhorn: max_iter must be positive");
  require(tol > 0.0, "sinkhorn: tol must be positive");

  TransportPlan plan = epsilon < kLogDomainEpsilon ? detail::sinkhorn_log(c, a, b, epsilon, max_iter, tol)
                                                   : detail::sinkhorn_scaling(c, a, b, epsilon, max_iter, tol);
  if (!plan.coupling.all_finite()) fail(ErrorKind::solver, "sinkhorn: non-finite coupling");
  detail::fill_marginal_errors(plan, a, b);
  return plan;
}

inline constexpr std::size_t kExactMaxSize = 64;

// Exact transportation simplex (network simplex on the bipartite graph) with a
// north-west-corner initial basis. Pricing is Dantzig's rule, switching to
// Bland's rule during long runs of degenerate pivots so the method terminates.
inline TransportPlan exact_ot_small(const CostMatrix& c, std::span<const double> a, std::span<const double> b) {
  const std::size_t n = c.rows(), m = c.cols();
  require(n >= 1 && m >= 1, "exact_ot_small: empty cost matrix");
  require(n <= kExactMaxSize && m <= kExactMaxSize,
          "exact_ot_small: instance " + std::to_string(n) + "x" + std::to_string(m) + " exceeds the 64x64 limit");
  require(c.entries.all_finite(), "exact_ot_small: cost matrix has non-finite entries");
  detail::check_distribution(a, n, "source weights");
  detail::check_distribution(b, m, "target weights");

  Matrix x(n, m);
  std::vector<char> basic(n * m, 0);
  std::vector<std::size_t> basis;  // cell ids i*m+j, always n+m-1 of them
  {
    std::size_t i = 0, j = 0;
    double ra = a[0], rb = b[0];
    for (;;) {
      const double q = std::min(ra, rb);
      x(i, j) = q;
      basic[i * m + j] = 1;
      basis.push_back(i * m + j);
      if (i + 1 == n && j + 1 == m) break;
      ra -= q;
      rb -= q;
      if (j + 1 == m || (i + 1 < n && ra <= rb)) {
        ++i;
        ra = a[i];
      } else {
        ++j;
        rb = b[j];
      }
    }
  }

  double cmax = 0.0;
  for (double v : c.entries.data) cmax = std::max(cmax, std::abs(v));
  const double price_tol = 1e-12 * std::max(1.0, cmax);
  const std::size_t nodes = n + m;
  std::vector<double> pot(nodes);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(nodes);  // (neighbor, cell)
  std::vector<long> parent_cell(nodes);
  std::vector<std::size_t> parent_node(nodes);
  std::vector<char> seen(nodes);

  auto build_adjacency = [&] {
    for (auto& l : adj) l.clear();
    for (std::size_t cell : basis) {
      const std::size_t i = cell / m, j = cell % m;
      adj[i].push_back({n + j, cell});
      adj[n + j].push_back({i, cell});
    }
  };
  // Breadth-first traversal of the basis tree from `root`, recording parents.
  auto traverse = [&](std::size_t root, auto&& visit) {
    std::fill(seen.begin(), seen.end(), 0);
    std::queue<std::size_t> q;
    q.push(root);
    seen[root] = 1;
    parent_cell[root] = -1;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (auto [w, cell] : adj[u]) {
        if (seen[w]) continue;
        seen[w] = 1;
        parent_cell[w] = static_cast<long>(cell);
        parent_node[w] = u;
        visit(u, w, cell);
        q.push(w);
      }
    }
  };

  const int max_pivots = 200000;
  int degenerate_run = 0;
  int pivots = 0;
  for (;; ++pivots) {
    if (pivots >= max_pivots) fail(ErrorKind::solver, "exact_ot_small: pivot limit reached");
    build_adjacency();
    pot[0] = 0.0;
    traverse(0, [&](std::size_t u, std::size_t w, std::size_t cell) {
      // u_i + v_j = c_ij on basic cells; rows are nodes < n.
      const double cij = c.entries.data[cell];
      pot[w] = cij - pot[u];
    });

    const bool bland = degenerate_run > 32;
    long entering = -1;
    double best = -price_tol;
    for (std::size_t cell = 0; cell < n * m && !(bland && entering >= 0); ++cell) {
      if (basic[cell]) continue;
      const double reduced = c.entries.data[cell] - pot[cell / m] - pot[n + cell % m];
      if (reduced < best) {
        entering = static_cast<long>(cell);
        if (!bland) best = reduced;
      }
    }
    if (entering < 0) break;

    const std::size_t ei = static_cast<std::size_t>(entering) / m, ej = static_cast<std::size_t>(entering) % m;
    traverse(ei, [](std::size_t, std::size_t, std::size_t) {});
    // Walk from column node back to row ei; signs alternate starting with minus.
    std::vector<std::size_t> minus, plus;
    bool sign_minus = true;
    for (std::size_t node = n + ej; node != ei; node = parent_node[node]) {
      (sign_minus ? minus : plus).push_back(static_cast<std::size_t>(parent_cell[node]));
      sign_minus = !sign_minus;
    }
    std::size_t leaving = minus.front();
    double theta = x.data[leaving];
    for (std::size_t cell : minus)
      if (x.data[cell] < theta || (x.data[cell] == theta && cell < leaving)) {
        theta = x.data[cell];
        leaving = cell;
      }
    for (std::size_t cell : minus) x.data[cell] -= theta;
    for (std::size_t cell : plus) x.data[cell] += theta;
    x.data[static_cast<std::size_t>(entering)] = theta;
    x.data[leaving] = 0.0;
    basic[leaving] = 0;
    basic[static_cast<std::size_t>(entering)] = 1;
    *std::find(basis.begin(), basis.end(), leaving) = static_cast<std::size_t>(entering);
    degenerate_run = theta > 0.0 ? 0 : degenerate_run + 1;
  }

  for (auto& v : x.data) v = std::max(v, 0.0);
  TransportPlan plan;
  plan.coupling = std::move(x);
  plan.iterations_used = pivots;
  plan.converged = true;
  detail::fill_marginal_errors(plan, a, b);
  return plan;
}

// Exact OT cost between two clouds (both at most 64 points).
inline double exact_ot_cost(const WeightedPointCloud& a, const WeightedPointCloud& b,
                            CostKind kind = CostKind::squared_euclidean) {
  const auto c = cost_matrix(a, b, kind);
  return plan_cost(exact_ot_small(c, a.weights, b.weights), c);
}

}  // namespace aot
