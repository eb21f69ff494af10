#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "steiner/barrier.hpp"
#include "steiner/convex.hpp"

using namespace steiner;

namespace {

TerminalProblem problem(std::vector<Point2> pts, int S, int root = -1) {
  TerminalProblem p;
  p.points = std::move(pts);
  p.grid_size = S;
  p.root = root;
  return p;
}

double snapped_distance(const Discretization& d, int i, int j) {
  const double h = d.mesh.step();
  return h * std::hypot(d.terminals[i].ix - d.terminals[j].ix, d.terminals[i].iy - d.terminals[j].iy);
}

std::vector<Point2> equilateral(double side) {
  const double cy = 0.5 - side * std::sqrt(3.0) / 4;
  return {{0.5 - side / 2, cy}, {0.5 + side / 2, cy}, {0.5, cy + side * std::sqrt(3.0) / 2}};
}

}  // namespace

TEST(Convex, NormBound) {
  // power iteration on L^T L for the scalar gradient, compared with the bound
  const TriMesh m(16);
  const double h = m.step(), area = m.triangle_area();
  std::vector<double> x(m.node_count()), y(m.node_count());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int v = 0; v < m.node_count(); ++v) x[v] = m.on_boundary(v) ? 0.0 : unit(rng);
  double lambda = 0.0;
  for (int it = 0; it < 300; ++it) {
    std::fill(y.begin(), y.end(), 0.0);
    for (int t = 0; t < m.triangle_count(); ++t) {
      const auto& tri = m.triangle(t);
      const Vec2 g = p1_gradient(m.triangle_kind(t), {x[tri[0]], x[tri[1]], x[tri[2]]}, h);
      const auto d = p1_gradient_transpose(m.triangle_kind(t), {area * area * g[0], area * area * g[1]}, h);
      for (int k = 0; k < 3; ++k) y[tri[k]] += d[k];
    }
    double n2 = 0.0, xy = 0.0;
    for (int v = 0; v < m.node_count(); ++v) {
      if (m.on_boundary(v)) y[v] = 0.0;
      n2 += y[v] * y[v];
      xy += x[v] * y[v];
    }
    lambda = xy;
    const double n = std::sqrt(n2);
    for (int v = 0; v < m.node_count(); ++v) x[v] = y[v] / n;
  }
  EXPECT_LE(std::sqrt(lambda), coupling_norm_bound(m));
  EXPECT_GE(std::sqrt(lambda), 0.8 * coupling_norm_bound(m));
}

TEST(Convex, PairRecoversDistance) {
  const auto d = discretize(problem({{0.3, 0.5}, {0.7, 0.5}}, 32));
  const auto sol = solve_convex(d, 0.0);
  ASSERT_TRUE(sol.report.converged);
  // the P1 relaxation saves a fraction of h near each end of the segment
  EXPECT_LE(sol.report.cost, snapped_distance(d, 0, 1) + 1e-9);
  EXPECT_GE(sol.report.cost, snapped_distance(d, 0, 1) - d.mesh.step());
  EXPECT_LE(sol.report.gap, 1e-3 * sol.report.cost);
  // the minimum is no larger than the cost of the drift itself
  const auto start = extract_density(d, zero_state(1, d.mesh), 0.0);
  EXPECT_LE(sol.report.cost, start.cost * (1 + 1e-3));
}

// Phi_1** is the sum of column norms, so the problem splits into
// independent pairs (P_i, root).
TEST(Convex, AlphaOneDecouples) {
  const auto d = discretize(problem({{0.2, 0.3}, {0.8, 0.35}, {0.45, 0.8}, {0.5, 0.5}}, 32));
  const auto sol = solve_convex(d, 1.0);
  ASSERT_TRUE(sol.report.converged);
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) sum += snapped_distance(d, i, 3);
  EXPECT_NEAR(sol.report.cost, sum, 0.03 * sum);
}

TEST(Convex, MinimumBelowFeasibleStates) {
  const auto d = discretize(problem(equilateral(0.6), 16));
  const auto sol = solve_convex(d, 0.0);
  ASSERT_TRUE(sol.report.converged);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(-0.3, 0.3);
  for (int trial = 0; trial < 5; ++trial) {
    PhaseState st = sol.state;
    for (auto& u : st.u)
      for (int v = 0; v < d.mesh.node_count(); ++v)
        if (!d.mesh.on_boundary(v)) u[v] += unit(rng);
    EXPECT_GE(extract_density(d, st, 0.0).cost, sol.report.cost * (1 - 1e-3));
  }
  // the dual pairing certifies a lower bound for every state, up to the
  // residual L^T q, which is checked separately
  EXPECT_LE(sol.report.pairing, sol.report.cost + 1e-9);
  EXPECT_LE(sol.report.divergence, 1e-2);
}

// The interior-point solve is an independent method for the same problem.
TEST(Convex, BarrierAgreesWithPrimalDual) {
  struct Case {
    std::vector<Point2> pts;
    double alpha;
  };
  std::vector<Case> cases{{equilateral(0.6), 0.0}, {equilateral(0.6), 0.5}};
  std::vector<Point2> pent;
  for (int k = 0; k < 5; ++k)
    pent.push_back({0.5 + 0.35 * std::cos(std::numbers::pi / 2 + 2 * std::numbers::pi * k / 5),
                    0.5 + 0.35 * std::sin(std::numbers::pi / 2 + 2 * std::numbers::pi * k / 5)});
  cases.push_back({pent, 0.4});
  cases.push_back({pent, 1.0});
  for (const auto& c : cases) {
    const auto d = discretize(problem(c.pts, 16));
    ConvexOptions po;
    po.tol = 1e-5;
    po.max_iter = 100000;
    const auto a = solve_convex(d, c.alpha, po);
    const auto b = solve_convex_barrier(d, c.alpha);
    ASSERT_TRUE(a.report.converged);
    ASSERT_TRUE(b.report.converged);
    EXPECT_NEAR(a.report.cost, b.report.cost, 1e-3 * a.report.cost) << "alpha " << c.alpha;
    EXPECT_LE(b.report.gap, 1e-3 * b.report.cost);
    const SubsetFamily f(d.component_count(), c.alpha);
    for (const auto& q : b.dual.q) ASSERT_LE(k_alpha_violation(q, f), 1e-9);
  }
}

TEST(Convex, DualityGapIsNonnegative) {
  const auto d = discretize(problem({{0.2, 0.25}, {0.75, 0.2}, {0.7, 0.8}, {0.3, 0.7}}, 16));
  const SubsetFamily f(3, 0.3);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    DualField q;
    for (int t = 0; t < d.mesh.triangle_count(); ++t) {
      Mat2xN m(3);
      for (auto& c : m.cols) c = {gauss(rng), gauss(rng)};
      q.q.push_back(shrink_into_K(m, f));
    }
    PhaseState st = zero_state(3, d.mesh);
    for (auto& u : st.u)
      for (int v = 0; v < d.mesh.node_count(); ++v)
        if (!d.mesh.on_boundary(v)) u[v] = gauss(rng);
    EXPECT_GE(duality_gap(d, st, q, 0.3), 0.0);
  }
  DualField bad;
  bad.q.assign(d.mesh.triangle_count(), Mat2xN(std::vector<Vec2>{{2, 0}, {0, 0}, {0, 0}}));
  EXPECT_THROW(duality_gap(d, zero_state(3, d.mesh), bad, 0.3), ContractViolation);
}

TEST(Convex, Configuration) {
  const auto d = discretize(problem({{0.3, 0.5}, {0.7, 0.5}}, 16));
  ConvexOptions o;
  o.sigma = 100.0;  // |L| = 2h, so sigma tau |L|^2 = 10000 / 64
  o.tau = 100.0;
  EXPECT_THROW(solve_convex(d, 0.0, o), ConfigError);
  EXPECT_THROW(solve_convex(d, 1.5), DomainError);
  ConvexOptions few;
  few.max_iter = 3;
  const auto s = solve_convex(d, 0.0, few);
  EXPECT_FALSE(s.report.converged);
  EXPECT_EQ(s.report.iterations, 3);
  BarrierOptions bo;
  bo.growth = 1.0;
  EXPECT_THROW(solve_convex_barrier(d, 0.0, bo), ConfigError);
}
