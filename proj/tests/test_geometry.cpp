#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <tuple>
#include <numeric>
#include <random>
#include <set>

#include "steiner/geometry.hpp"
#include "tree_helpers.hpp"

using namespace steiner;

TEST(Mesh, Counts) {
  const TriMesh m(8);
  EXPECT_EQ(m.node_count(), 81);
  EXPECT_EQ(m.triangle_count(), 128);
  EXPECT_EQ(m.edge_count(), 3 * 64 + 16);
  EXPECT_DOUBLE_EQ(m.step(), 0.125);
}

TEST(Mesh, RejectsSmallGrid) { EXPECT_THROW(TriMesh(7), ConfigError); }

TEST(Mesh, TrianglesCounterclockwiseWithExpectedArea) {
  const TriMesh m(9);
  for (int t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangle(t);
    const Point2 a = m.position(m.node(tri[0])), b = m.position(m.node(tri[1])), c = m.position(m.node(tri[2]));
    const double twice = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    EXPECT_NEAR(0.5 * twice, m.triangle_area(), 1e-15);
  }
}

TEST(Mesh, EdgeSidesMatchOrientation) {
  const TriMesh m(8);
  for (int e = 0; e < m.edge_count(); ++e) {
    const Edge& ed = m.edge(e);
    const Point2 a = m.position(m.node(ed.a)), b = m.position(m.node(ed.b));
    auto side = [&](int t) {
      const Point2 p = m.barycenter(t);
      return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    };
    if (ed.left >= 0) {
      EXPECT_GT(side(ed.left), 0.0) << e;
    }
    if (ed.right >= 0) {
      EXPECT_LT(side(ed.right), 0.0) << e;
    }
    // a boundary edge has exactly one neighbour
    const Node na = m.node(ed.a), nb = m.node(ed.b);
    const bool boundary = (na.ix == nb.ix && (na.ix == 0 || na.ix == 8)) || (na.iy == nb.iy && (na.iy == 0 || na.iy == 8));
    EXPECT_EQ(ed.interior(), !boundary) << e;
  }
}

TEST(Mesh, NodeStarSizes) {
  const TriMesh m(8);
  EXPECT_EQ(m.node_star({3, 4}).size(), 6u);
  // the diagonal runs through the (0,0) and (S,S) corners
  EXPECT_EQ(m.node_star({0, 0}).size(), 2u);
  EXPECT_EQ(m.node_star({8, 8}).size(), 2u);
  EXPECT_EQ(m.node_star({8, 0}).size(), 1u);
  EXPECT_EQ(m.node_star({0, 8}).size(), 1u);
  for (const auto& [t, k] : m.node_star({3, 4})) EXPECT_EQ(m.triangle(t)[k], m.node_id({3, 4}));
}

TEST(Problem, Validation) {
  TerminalProblem p;
  p.points = {{0.2, 0.2}};
  EXPECT_THROW(p.validate(), ConfigError);
  p.points = {{0.2, 0.2}, {0.8, 0.8}};
  EXPECT_NO_THROW(p.validate());
  p.alpha = 1.2;
  EXPECT_THROW(p.validate(), ConfigError);
  p.alpha = 0.5;
  p.root = 2;
  EXPECT_THROW(p.validate(), ConfigError);
  p.root = 0;
  p.points.push_back({1.0, 0.5});
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_EQ(TerminalProblem{}.root_index(), -1);
}

TEST(Problem, SnapRejectsCoincidentTerminals) {
  TerminalProblem p;
  p.points = {{0.50, 0.5}, {0.51, 0.5}};
  p.grid_size = 16;
  EXPECT_THROW(snap_terminals(p, TriMesh(16)), DegenerateInputError);
  p.grid_size = 128;
  EXPECT_NO_THROW(snap_terminals(p, TriMesh(128)));
}

TEST(Curve, RejectsNonUnitSteps) { EXPECT_THROW(RectCurve({{0, 0}, {1, 1}}), ContractViolation); }

TEST(Winding, SquareLoop) {
  const TriMesh m(8);
  const RectCurve ccw({{2, 2}, {3, 2}, {4, 2}, {4, 3}, {4, 4}, {3, 4}, {2, 4}, {2, 3}, {2, 2}});
  const auto w = winding_field(ccw, m);
  const auto wr = winding_field(ccw.reversed(), m);
  for (int t = 0; t < m.triangle_count(); ++t) {
    const Point2 b = m.barycenter(t);
    const bool inside = b.x > 0.25 && b.x < 0.5 && b.y > 0.25 && b.y < 0.5;
    EXPECT_EQ(w[t], inside ? 1 : 0);
    EXPECT_EQ(wr[t], inside ? -1 : 0);
  }
  EXPECT_THROW(winding_field(RectCurve({{2, 2}, {3, 2}}), m), ContractViolation);
}

TEST(Winding, DoubleLoopCountsTwice) {
  const TriMesh m(8);
  const RectCurve loop({{2, 2}, {3, 2}, {3, 3}, {2, 3}, {2, 2}});
  const auto w = winding_field(concatenate(loop, loop), m);
  EXPECT_EQ(w[2 * m.cell_id(2, 2)], 2);
  EXPECT_EQ(w[2 * m.cell_id(2, 2) + 1], 2);
}

// Du^perp = Gamma - Lambda: with u the winding number of Lambda followed by
// Gamma reversed, the jump across every edge equals the signed traversals of
// Gamma minus those of Lambda.
TEST(Winding, JumpIdentityOnRandomPaths) {
  std::mt19937_64 rng(11);
  const TriMesh m(32);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pair = testing_helpers::random_tree_pair(rng, m, 4);
    for (std::size_t i = 0; i < pair.gamma.size(); ++i) {
      const auto u = winding_field(concatenate(pair.lambda[i], pair.gamma[i].reversed()), m);
      const auto jumps = edge_jumps(u, m);
      const auto g = signed_crossings(pair.gamma[i], m), l = signed_crossings(pair.lambda[i], m);
      for (int e = 0; e < m.edge_count(); ++e) ASSERT_EQ(jumps[e], g[e] - l[e]) << "trial " << trial << " edge " << e;
    }
  }
}

TEST(SpanningTree, LShape) {
  const std::vector<Node> terms{{2, 2}, {10, 2}, {10, 8}};
  const auto paths = l1_spanning_tree(terms, 2);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0].edge_count(), 14u);
  EXPECT_EQ(paths[1].edge_count(), 6u);
  EXPECT_EQ(paths[0].nodes()[8], (Node{10, 2}));  // horizontal leg first, then it joins
  std::set<std::pair<Node, Node>> edges;
  for (const auto& p : paths)
    for (std::size_t k = 1; k < p.size(); ++k)
      edges.insert(std::minmax(p.nodes()[k - 1], p.nodes()[k]));
  EXPECT_EQ(edges.size(), 14u);
}

// Distinct lattice edges of the drawn tree never exceed the Manhattan MST
// weight (computed here by Kruskal), and every path runs simply to the root.
TEST(SpanningTree, RandomTerminalsWithinMstWeight) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> coord(1, 31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Node> terms;
    while (terms.size() < 6) {
      const Node n{coord(rng), coord(rng)};
      if (std::find(terms.begin(), terms.end(), n) == terms.end()) terms.push_back(n);
    }
    const int root = trial % 6;
    const auto paths = l1_spanning_tree(terms, root);
    std::set<std::pair<Node, Node>> edges;
    int k = 0;
    for (int i = 0; i < 6; ++i) {
      if (i == root) continue;
      const auto& p = paths[k++];
      EXPECT_EQ(p.front(), terms[i]);
      EXPECT_EQ(p.back(), terms[root]);
      EXPECT_TRUE(p.simple());
      for (std::size_t s = 1; s < p.size(); ++s) edges.insert(std::minmax(p.nodes()[s - 1], p.nodes()[s]));
    }
    std::vector<std::tuple<int, int, int>> cand;
    for (int a = 0; a < 6; ++a)
      for (int b = a + 1; b < 6; ++b) cand.emplace_back(manhattan(terms[a], terms[b]), a, b);
    std::sort(cand.begin(), cand.end());
    std::vector<int> uf(6);
    std::iota(uf.begin(), uf.end(), 0);
    std::function<int(int)> find = [&](int v) { return uf[v] == v ? v : uf[v] = find(uf[v]); };
    int weight = 0;
    for (auto [w, a, b] : cand)
      if (find(a) != find(b)) {
        uf[find(a)] = find(b);
        weight += w;
      }
    EXPECT_LE(static_cast<int>(edges.size()), weight);
  }
}
