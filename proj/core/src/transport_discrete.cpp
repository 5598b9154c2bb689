#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "bpl/errors.hpp"
#include "bpl/transport.hpp"

namespace bpl {

namespace {

constexpr double kMarginalTol = 1e-10;
constexpr std::size_t kMaxSupport = 256;

struct Cell {
  int i, j;
  double x;
};

// Basis tree over nodes 0..m-1 (rows) and m..m+n-1 (columns).
struct Tree {
  std::vector<std::vector<std::pair<int, int>>> adj;  // (neighbour, basis index)
  void build(const std::vector<Cell>& basis, int m, int n) {
    adj.assign(m + n, {});
    for (int b = 0; b < int(basis.size()); ++b) {
      adj[basis[b].i].push_back({m + basis[b].j, b});
      adj[m + basis[b].j].push_back({basis[b].i, b});
    }
  }
};

}  // namespace

TransportSolution solve_transport(const std::vector<std::vector<double>>& cost, const std::vector<double>& supply,
                                  const std::vector<double>& demand) {
  const int m = int(supply.size()), n = int(demand.size());
  if (m == 0 || n == 0) fail(ErrorKind::InvalidArgument, "transport needs nonempty marginals");
  if (int(cost.size()) != m) fail(ErrorKind::InvalidArgument, "cost rows do not match supply");
  for (const auto& r : cost)
    if (int(r.size()) != n) fail(ErrorKind::InvalidArgument, "cost columns do not match demand");
  double sa = 0.0, sb = 0.0, cmax = 0.0;
  for (double a : supply) {
    if (!(a >= 0.0)) fail(ErrorKind::SolverFail, "negative or non-finite supply");
    sa += a;
  }
  for (double b : demand) {
    if (!(b >= 0.0)) fail(ErrorKind::SolverFail, "negative or non-finite demand");
    sb += b;
  }
  if (!(sa > 0.0)) fail(ErrorKind::SolverFail, "zero total mass");
  if (std::abs(sa - sb) > kMarginalTol * std::max(1.0, sa))
    fail(ErrorKind::SolverFail, "marginal totals differ: " + std::to_string(sa) + " vs " + std::to_string(sb));
  for (const auto& r : cost)
    for (double c : r) {
      if (!std::isfinite(c)) fail(ErrorKind::SolverFail, "non-finite cost");
      cmax = std::max(cmax, std::abs(c));
    }

  // North-west corner start; exactly m+n-1 basic cells (degenerate zeros kept).
  std::vector<double> ra(supply), rb(demand);
  for (double& b : rb) b *= sa / sb;
  std::vector<Cell> basis;
  std::vector<std::vector<char>> in_basis(m, std::vector<char>(n, 0));
  {
    int i = 0, j = 0;
    while (i < m && j < n) {
      double q = std::min(ra[i], rb[j]);
      basis.push_back({i, j, q});
      in_basis[i][j] = 1;
      ra[i] -= q;
      rb[j] -= q;
      if (i == m - 1) {
        ++j;
      } else if (j == n - 1) {
        ++i;
      } else if (ra[i] <= rb[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const double eps = 1e-12 * std::max(1.0, cmax);
  const int max_pivots = 50 * (m + n) * (m + n) + 1000;
  std::vector<double> u(m), v(n);
  std::vector<int> parent(m + n), parent_edge(m + n);
  Tree tree;
  int pivots = 0, degenerate_run = 0;
  bool bland = false;

  for (;;) {
    tree.build(basis, m, n);
    // Potentials: u_i + v_j = c_ij on the basis, u_0 = 0.
    std::fill(parent.begin(), parent.end(), -2);
    std::vector<int> stack{0};
    parent[0] = -1;
    u[0] = 0.0;
    while (!stack.empty()) {
      int a = stack.back();
      stack.pop_back();
      for (auto [b, e] : tree.adj[a]) {
        if (parent[b] != -2) continue;
        parent[b] = a;
        if (b >= m)
          v[b - m] = cost[a][b - m] - u[a];
        else
          u[b] = cost[b][a - m] - v[a - m];
        stack.push_back(b);
      }
    }
    if (std::count(parent.begin(), parent.end(), -2) > 0) fail(ErrorKind::SolverFail, "basis is not a spanning tree");

    // Entering cell: most negative reduced cost (lexicographic ties), or first negative under Bland.
    int ei = -1, ej = -1;
    double best = -eps;
    for (int i = 0; i < m && !(bland && ei >= 0); ++i)
      for (int j = 0; j < n; ++j) {
        if (in_basis[i][j]) continue;
        double r = cost[i][j] - u[i] - v[j];
        if (r < best) {
          best = r;
          ei = i;
          ej = j;
          if (bland) break;
        }
      }
    if (ei < 0) break;
    if (++pivots > max_pivots) fail(ErrorKind::SolverFail, "transport simplex exceeded pivot limit");

    // Cycle: path in the tree from row ei to column ej.
    std::fill(parent.begin(), parent.end(), -2);
    std::fill(parent_edge.begin(), parent_edge.end(), -1);
    stack.assign(1, ei);
    parent[ei] = -1;
    while (!stack.empty()) {
      int a = stack.back();
      stack.pop_back();
      if (a == m + ej) break;
      for (auto [b, e] : tree.adj[a]) {
        if (parent[b] != -2) continue;
        parent[b] = a;
        parent_edge[b] = e;
        stack.push_back(b);
      }
    }
    // Walk from column ej back to row ei; edges alternate −, +, −, ...
    std::vector<int> minus, plus;
    int node = m + ej;
    bool sign_minus = true;
    while (node != ei) {
      (sign_minus ? minus : plus).push_back(parent_edge[node]);
      sign_minus = !sign_minus;
      node = parent[node];
    }
    int leave = -1;
    double theta = std::numeric_limits<double>::infinity();
    for (int e : minus) {
      const auto& c = basis[e];
      if (c.x < theta || (c.x == theta && (c.i < basis[leave].i || (c.i == basis[leave].i && c.j < basis[leave].j)))) {
        theta = c.x;
        leave = e;
      }
    }
    for (int e : minus) basis[e].x = std::max(0.0, basis[e].x - theta);
    for (int e : plus) basis[e].x += theta;
    in_basis[basis[leave].i][basis[leave].j] = 0;
    basis[leave] = {ei, ej, theta};
    in_basis[ei][ej] = 1;

    degenerate_run = theta > 0.0 ? 0 : degenerate_run + 1;
    if (degenerate_run > m + n) bland = true;  // anti-cycling
    if (theta > 0.0) bland = false;
  }

  TransportSolution out;
  out.pivots = pivots;
  out.plan.assign(m, std::vector<double>(n, 0.0));
  for (const auto& c : basis) {
    out.plan[c.i][c.j] = c.x;
    out.cost += c.x * cost[c.i][c.j];
  }
  return out;
}

DiscreteW2 w2_discrete(const WeightedPoints& mu, const WeightedPoints& nu) {
  const std::size_t m = mu.points.size(), n = nu.points.size();
  if (m != mu.weights.size() || n != nu.weights.size())
    fail(ErrorKind::InvalidArgument, "points and weights differ in length");
  if (m > kMaxSupport || n > kMaxSupport) fail(ErrorKind::InvalidArgument, "support size above 256");
  if (m == 0 || n == 0) fail(ErrorKind::InvalidArgument, "empty support");
  const std::size_t dim = mu.points[0].size();
  for (const auto& p : mu.points)
    if (p.size() != dim) fail(ErrorKind::DimensionError, "inconsistent point dimension");
  for (const auto& p : nu.points)
    if (p.size() != dim) fail(ErrorKind::DimensionError, "inconsistent point dimension");

  std::vector<std::vector<double>> c(m, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < dim; ++k) {
        double d = mu.points[i][k] - nu.points[j][k];
        c[i][j] += d * d;
      }
  auto sol = solve_transport(c, mu.weights, nu.weights);
  DiscreteW2 out;
  out.distance = std::sqrt(std::max(0.0, sol.cost));
  out.plan = DiscretePlan{mu, nu, std::move(sol.plan)};
  return out;
}

std::vector<std::vector<double>> barycentric_projection(const DiscretePlan& plan, PlanSide base) {
  const bool src = base == PlanSide::Source;
  const auto& here = src ? plan.source : plan.target;
  const auto& there = src ? plan.target : plan.source;
  const std::size_t dim = there.points.empty() ? 0 : there.points[0].size();
  std::vector<std::vector<double>> out(here.points.size(), std::vector<double>(dim, 0.0));
  for (std::size_t a = 0; a < here.points.size(); ++a) {
    double w = 0.0;
    for (std::size_t b = 0; b < there.points.size(); ++b) {
      double g = src ? plan.coupling[a][b] : plan.coupling[b][a];
      if (g <= 0.0) continue;
      w += g;
      for (std::size_t k = 0; k < dim; ++k) out[a][k] += g * there.points[b][k];
    }
    if (w > 0.0)
      for (double& x : out[a]) x /= w;
    else
      out[a] = here.points[a];
  }
  return out;
}

MonotonicityWitness check_cyclical_monotonicity(const DiscretePlan& plan, double tol) {
  struct Pair {
    const std::vector<double>*x, *y;
    std::size_t flat;
  };
  std::vector<Pair> supp;
  const std::size_t n = plan.target.points.size();
  for (std::size_t i = 0; i < plan.coupling.size(); ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (plan.coupling[i][j] > 1e-14) supp.push_back({&plan.source.points[i], &plan.target.points[j], i * n + j});
  auto c = [](const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
    return s;
  };
  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  MonotonicityWitness w;
  for (std::size_t a = 0; a < supp.size(); ++a)
    for (std::size_t b = a + 1; b < supp.size(); ++b)
      for (std::size_t d = b + 1; d < supp.size(); ++d) {
        const Pair* t[3] = {&supp[a], &supp[b], &supp[d]};
        double base = 0.0;
        for (int k = 0; k < 3; ++k) base += c(*t[k]->x, *t[k]->y);
        for (const auto& p : perms) {
          double alt = 0.0;
          for (int k = 0; k < 3; ++k) alt += c(*t[k]->x, *t[p[k]]->y);
          double excess = base - alt;
          if (excess > tol && excess > w.excess) w = {false, t[0]->flat, t[1]->flat, t[2]->flat, excess};
        }
      }
  return w;
}

std::vector<PlanEntry> plan_entries(const DiscretePlan& plan, double threshold) {
  std::vector<PlanEntry> out;
  for (std::size_t i = 0; i < plan.coupling.size(); ++i)
    for (std::size_t j = 0; j < plan.coupling[i].size(); ++j)
      if (plan.coupling[i][j] > threshold) out.push_back({i, j, plan.coupling[i][j]});
  return out;
}

void write_plan_csv(std::ostream& os, const std::vector<PlanEntry>& entries) {
  os << "i,j,weight\n";
  char buf[64];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%.17g", e.w);
    os << e.i << ',' << e.j << ',' << buf << '\n';
  }
}

}  // namespace bpl
