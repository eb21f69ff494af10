#pragma once

// Uniform triangulated grid on the unit square, terminal snapping,
// rectilinear lattice curves and integer winding-number fields.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "steiner/errors.hpp"

namespace steiner {

inline constexpr int kMinGridSize = 8;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Lattice node in integer grid coordinates; position is (ix*h, iy*h).
struct Node {
  int ix = 0;
  int iy = 0;
  auto operator<=>(const Node&) const = default;
};

struct TerminalProblem {
  std::vector<Point2> points;
  int root = -1;  // index of the sink P_N; -1 means "last point"
  double alpha = 0.0;
  int grid_size = 64;

  int terminal_count() const { return static_cast<int>(points.size()); }
  int component_count() const { return terminal_count() - 1; }
  int root_index() const { return root < 0 ? terminal_count() - 1 : root; }

  // Terminal indices of the components, i.e. every index except the root,
  // in increasing order.
  std::vector<int> source_indices() const {
    std::vector<int> out;
    for (int i = 0; i < terminal_count(); ++i)
      if (i != root_index()) out.push_back(i);
    return out;
  }

  void validate() const {
    if (points.size() < 2) throw ConfigError("need at least two terminal points");
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw ConfigError("alpha must lie in [0,1], got " + std::to_string(alpha));
    if (grid_size < kMinGridSize)
      throw ConfigError("grid size must be at least " + std::to_string(kMinGridSize));
    if (root_index() < 0 || root_index() >= terminal_count())
      throw ConfigError("root index out of range");
    for (const auto& p : points) {
      if (!(p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0))
        throw ConfigError("terminal points must lie in the open unit square");
    }
  }
};

// One mesh edge, stored with its canonical orientation a -> b (+x for
// horizontal, +y for vertical, (+1,+1) for diagonals). left/right are the
// adjacent triangles relative to that orientation, -1 on the boundary.
struct Edge {
  int a = -1;
  int b = -1;
  int left = -1;
  int right = -1;
  bool interior() const { return left >= 0 && right >= 0; }
};

// Axis-aligned unit step a -> b on a grid of size S: the grid edge index and
// +1 if the step follows the canonical orientation, -1 otherwise.
inline std::pair<int, int> grid_axis_edge(int S, Node a, Node b) {
  const int dx = b.ix - a.ix, dy = b.iy - a.iy;
  if (dy == 0 && (dx == 1 || dx == -1)) return {a.iy * S + std::min(a.ix, b.ix), dx};
  if (dx == 0 && (dy == 1 || dy == -1)) return {S * (S + 1) + a.ix * S + std::min(a.iy, b.iy), dy};
  throw ContractViolation("nodes are not joined by a grid edge");
}

struct TriangleCorner {
  int triangle;
  int corner;  // local vertex index 0..2
};

// Cartesian grid of step h = 1/S, every cell split along its
// lower-left -> upper-right diagonal. Triangle 2c is the lower-right half of
// cell c with corners (0,0),(1,0),(1,1); triangle 2c+1 is the upper-left half
// with corners (0,0),(1,1),(0,1). Both are counterclockwise.
class TriMesh {
 public:
  explicit TriMesh(int grid_size) : S_(grid_size) {
    if (grid_size < kMinGridSize)
      throw ConfigError("grid size must be at least " + std::to_string(kMinGridSize));
    h_ = 1.0 / S_;
    triangles_.resize(2 * static_cast<std::size_t>(S_) * S_);
    for (int cy = 0; cy < S_; ++cy) {
      for (int cx = 0; cx < S_; ++cx) {
        const int c = cy * S_ + cx;
        const int n00 = node_id({cx, cy}), n10 = node_id({cx + 1, cy});
        const int n11 = node_id({cx + 1, cy + 1}), n01 = node_id({cx, cy + 1});
        triangles_[2 * c] = {n00, n10, n11};
        triangles_[2 * c + 1] = {n00, n11, n01};
      }
    }
    edges_.resize(static_cast<std::size_t>(3 * S_ * S_ + 2 * S_));
    for (int iy = 0; iy <= S_; ++iy)
      for (int ix = 0; ix < S_; ++ix) {
        Edge& e = edges_[horizontal_edge(ix, iy)];
        e.a = node_id({ix, iy});
        e.b = node_id({ix + 1, iy});
        e.left = iy < S_ ? 2 * cell_id(ix, iy) : -1;
        e.right = iy > 0 ? 2 * cell_id(ix, iy - 1) + 1 : -1;
      }
    for (int ix = 0; ix <= S_; ++ix)
      for (int iy = 0; iy < S_; ++iy) {
        Edge& e = edges_[vertical_edge(ix, iy)];
        e.a = node_id({ix, iy});
        e.b = node_id({ix, iy + 1});
        e.left = ix > 0 ? 2 * cell_id(ix - 1, iy) : -1;
        e.right = ix < S_ ? 2 * cell_id(ix, iy) + 1 : -1;
      }
    for (int iy = 0; iy < S_; ++iy)
      for (int ix = 0; ix < S_; ++ix) {
        Edge& e = edges_[diagonal_edge(ix, iy)];
        e.a = node_id({ix, iy});
        e.b = node_id({ix + 1, iy + 1});
        e.left = 2 * cell_id(ix, iy) + 1;
        e.right = 2 * cell_id(ix, iy);
      }
  }

  int grid_size() const { return S_; }
  double step() const { return h_; }
  int node_count() const { return (S_ + 1) * (S_ + 1); }
  int triangle_count() const { return static_cast<int>(triangles_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  double triangle_area() const { return 0.5 * h_ * h_; }

  int node_id(Node n) const { return n.iy * (S_ + 1) + n.ix; }
  Node node(int id) const { return {id % (S_ + 1), id / (S_ + 1)}; }
  bool contains(Node n) const { return n.ix >= 0 && n.iy >= 0 && n.ix <= S_ && n.iy <= S_; }
  bool on_boundary(Node n) const { return n.ix == 0 || n.iy == 0 || n.ix == S_ || n.iy == S_; }
  bool on_boundary(int id) const { return on_boundary(node(id)); }
  Point2 position(Node n) const { return {n.ix * h_, n.iy * h_}; }

  int cell_id(int cx, int cy) const { return cy * S_ + cx; }
  const std::array<int, 3>& triangle(int t) const { return triangles_[t]; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  // 0 for the lower-right half, 1 for the upper-left half.
  int triangle_kind(int t) const { return t & 1; }
  Node triangle_cell(int t) const { return {(t / 2) % S_, (t / 2) / S_}; }

  Point2 barycenter(int t) const {
    const Node c = triangle_cell(t);
    const double ox = triangle_kind(t) == 0 ? 2.0 / 3.0 : 1.0 / 3.0;
    const double oy = triangle_kind(t) == 0 ? 1.0 / 3.0 : 2.0 / 3.0;
    return {(c.ix + ox) * h_, (c.iy + oy) * h_};
  }

  int horizontal_edge(int ix, int iy) const { return iy * S_ + ix; }
  int vertical_edge(int ix, int iy) const { return S_ * (S_ + 1) + ix * S_ + iy; }
  int diagonal_edge(int ix, int iy) const { return 2 * S_ * (S_ + 1) + iy * S_ + ix; }
  const Edge& edge(int e) const { return edges_[e]; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool is_axis_edge(int e) const { return e < 2 * S_ * (S_ + 1); }

  std::pair<int, int> axis_edge_between(Node a, Node b) const { return grid_axis_edge(S_, a, b); }

  // Triangles incident to a node with the local corner index of that node.
  std::vector<TriangleCorner> node_star(Node n) const {
    std::vector<TriangleCorner> out;
    out.reserve(6);
    auto cell_ok = [&](int cx, int cy) { return cx >= 0 && cy >= 0 && cx < S_ && cy < S_; };
    if (cell_ok(n.ix, n.iy)) {
      const int c = cell_id(n.ix, n.iy);
      out.push_back({2 * c, 0});
      out.push_back({2 * c + 1, 0});
    }
    if (cell_ok(n.ix - 1, n.iy)) out.push_back({2 * cell_id(n.ix - 1, n.iy), 1});
    if (cell_ok(n.ix - 1, n.iy - 1)) {
      const int c = cell_id(n.ix - 1, n.iy - 1);
      out.push_back({2 * c, 2});
      out.push_back({2 * c + 1, 1});
    }
    if (cell_ok(n.ix, n.iy - 1)) out.push_back({2 * cell_id(n.ix, n.iy - 1) + 1, 2});
    return out;
  }

 private:
  int S_;
  double h_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<Edge> edges_;
};

inline TriMesh build_mesh(int grid_size) { return TriMesh(grid_size); }

// Ordered lattice polyline whose consecutive nodes differ by one horizontal
// or vertical grid step. The node order is the orientation.
class RectCurve {
 public:
  RectCurve() = default;
  explicit RectCurve(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
    for (std::size_t k = 1; k < nodes_.size(); ++k) {
      const int d = std::abs(nodes_[k].ix - nodes_[k - 1].ix) + std::abs(nodes_[k].iy - nodes_[k - 1].iy);
      if (d != 1) throw ContractViolation("rectilinear curve nodes must be unit grid steps apart");
    }
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  std::size_t edge_count() const { return nodes_.empty() ? 0 : nodes_.size() - 1; }
  const Node& front() const { return nodes_.front(); }
  const Node& back() const { return nodes_.back(); }
  bool closed() const { return nodes_.size() >= 2 && nodes_.front() == nodes_.back(); }

  // No repeated node, except the closing node of a closed curve.
  bool simple() const {
    std::vector<Node> sorted(nodes_.begin(), nodes_.end() - (closed() ? 1 : 0));
    std::sort(sorted.begin(), sorted.end());
    return std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
  }

  RectCurve reversed() const { return RectCurve(std::vector<Node>(nodes_.rbegin(), nodes_.rend())); }

 private:
  std::vector<Node> nodes_;
};

// Joins a and b at a.back() == b.front().
inline RectCurve concatenate(const RectCurve& a, const RectCurve& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (!(a.back() == b.front())) throw ContractViolation("curves do not share the joining node");
  std::vector<Node> out = a.nodes();
  out.insert(out.end(), b.nodes().begin() + 1, b.nodes().end());
  return RectCurve(std::move(out));
}

// Signed traversal count per mesh edge: +1 for each traversal along the
// canonical orientation, -1 against it.
inline std::vector<int> signed_crossings(const RectCurve& curve, const TriMesh& mesh) {
  std::vector<int> out(mesh.edge_count(), 0);
  const auto& n = curve.nodes();
  for (std::size_t k = 1; k < n.size(); ++k) {
    const auto [e, s] = mesh.axis_edge_between(n[k - 1], n[k]);
    out[e] += s;
  }
  return out;
}

struct WindingField {
  std::vector<int> values;  // per triangle
  int operator[](int t) const { return values[t]; }
};

// Winding number of a closed lattice loop around every triangle barycenter.
// Barycenters never lie on grid lines, so a ray cast in +x only meets
// vertical loop edges; upward edges count +1, downward edges -1. Both halves
// of a cell share the value since the diagonal is never part of the loop.
inline WindingField winding_field(const RectCurve& loop, const TriMesh& mesh) {
  if (!loop.closed()) throw ContractViolation("winding field needs a closed curve");
  const int S = mesh.grid_size();
  // crossing[iy][ix]: net upward traversals of the vertical edge (ix,iy)-(ix,iy+1)
  std::vector<int> crossing(static_cast<std::size_t>(S) * (S + 1), 0);
  const auto& n = loop.nodes();
  for (std::size_t k = 1; k < n.size(); ++k) {
    if (!mesh.contains(n[k]) || !mesh.contains(n[k - 1]))
      throw ContractViolation("loop leaves the mesh");
    if (n[k].ix != n[k - 1].ix) continue;
    const int iy = std::min(n[k].iy, n[k - 1].iy);
    crossing[static_cast<std::size_t>(iy) * (S + 1) + n[k].ix] += n[k].iy - n[k - 1].iy;
  }
  WindingField field;
  field.values.assign(mesh.triangle_count(), 0);
  for (int cy = 0; cy < S; ++cy) {
    int acc = 0;
    for (int cx = S - 1; cx >= 0; --cx) {
      acc += crossing[static_cast<std::size_t>(cy) * (S + 1) + cx + 1];
      const int c = mesh.cell_id(cx, cy);
      field.values[2 * c] = acc;
      field.values[2 * c + 1] = acc;
    }
  }
  return field;
}

// Jump u(right) - u(left) of a per-triangle field across every interior
// edge, relative to the edge's canonical orientation. Boundary edges get 0.
inline std::vector<int> edge_jumps(const WindingField& u, const TriMesh& mesh) {
  std::vector<int> out(mesh.edge_count(), 0);
  for (int e = 0; e < mesh.edge_count(); ++e) {
    const Edge& ed = mesh.edge(e);
    if (ed.interior()) out[e] = u[ed.right] - u[ed.left];
  }
  return out;
}

// Nearest lattice node of every terminal; rejects coincident results.
inline std::vector<Node> snap_terminals(const TerminalProblem& problem, const TriMesh& mesh) {
  const int S = mesh.grid_size();
  std::vector<Node> out;
  out.reserve(problem.points.size());
  for (const auto& p : problem.points) {
    if (!(p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0))
      throw ConfigError("terminal points must lie in the open unit square");
    out.push_back({static_cast<int>(std::lround(p.x * S)), static_cast<int>(std::lround(p.y * S))});
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = i + 1; j < out.size(); ++j)
      if (out[i] == out[j])
        throw DegenerateInputError("terminals " + std::to_string(i) + " and " + std::to_string(j) +
                                   " snap to the same grid node");
  return out;
}

inline int manhattan(Node a, Node b) { return std::abs(a.ix - b.ix) + std::abs(a.iy - b.iy); }

namespace detail {

struct NodeHash {
  std::size_t operator()(Node n) const noexcept {
    return std::hash<std::int64_t>{}((static_cast<std::int64_t>(n.ix) << 32) ^ static_cast<std::uint32_t>(n.iy));
  }
};

}  // namespace detail

// Rectilinear tree rooted at terminals[root]: Manhattan minimum spanning tree
// (Prim, from the root), each tree edge drawn as a horizontal-then-vertical
// elbow toward the parent and cut short where it first meets the part of the
// tree already drawn. Returns one oriented path P_i -> root per non-root
// terminal, in terminal order.
inline std::vector<RectCurve> l1_spanning_tree(const std::vector<Node>& terminals, int root) {
  const int n = static_cast<int>(terminals.size());
  if (n < 2) throw ContractViolation("spanning tree needs at least two terminals");
  if (root < 0 || root >= n) throw ContractViolation("root index out of range");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (terminals[i] == terminals[j]) throw ContractViolation("terminals must be distinct");

  std::vector<int> order{root};
  std::vector<int> mst_parent(n, -1);
  std::vector<int> best(n, std::numeric_limits<int>::max());
  std::vector<bool> in_tree(n, false);
  in_tree[root] = true;
  for (int i = 0; i < n; ++i)
    if (!in_tree[i]) {
      best[i] = manhattan(terminals[i], terminals[root]);
      mst_parent[i] = root;
    }
  for (int step = 1; step < n; ++step) {
    int pick = -1;
    for (int i = 0; i < n; ++i)
      if (!in_tree[i] && (pick < 0 || best[i] < best[pick])) pick = i;
    in_tree[pick] = true;
    order.push_back(pick);
    for (int i = 0; i < n; ++i) {
      if (in_tree[i]) continue;
      const int d = manhattan(terminals[i], terminals[pick]);
      if (d < best[i]) {
        best[i] = d;
        mst_parent[i] = pick;
      }
    }
  }

  std::unordered_map<Node, Node, detail::NodeHash> parent;  // lattice tree, root maps to itself
  parent.emplace(terminals[root], terminals[root]);
  for (std::size_t k = 1; k < order.size(); ++k) {
    const int i = order[k];
    Node cur = terminals[i];
    if (parent.count(cur)) continue;
    const Node target = terminals[mst_parent[i]];
    while (true) {
      Node next = cur;
      if (cur.ix != target.ix)
        next.ix += cur.ix < target.ix ? 1 : -1;
      else
        next.iy += cur.iy < target.iy ? 1 : -1;
      parent.emplace(cur, next);
      if (parent.count(next)) break;
      cur = next;
    }
  }

  std::vector<RectCurve> paths;
  for (int i = 0; i < n; ++i) {
    if (i == root) continue;
    std::vector<Node> path{terminals[i]};
    while (!(path.back() == terminals[root])) path.push_back(parent.at(path.back()));
    paths.emplace_back(std::move(path));
  }
  return paths;
}

}  // namespace steiner
