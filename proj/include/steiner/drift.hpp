#pragma once

// Drift curves gamma_i (P_i -> P_N) rasterized on grid edges, and the
// per-component piecewise-linear spaces that carry a structural unit jump
// across gamma_i.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "steiner/errors.hpp"
#include "steiner/geometry.hpp"

namespace steiner {

struct EdgeCrossing {
  int component;
  int sign;  // +1 along the edge's canonical orientation
};

struct DriftStep {
  Node from;
  Node to;
};

// Per-component oriented drift curves together with the per-edge crossing
// table. Steps are kept separately so a damaged drift (missing step) can still
// be represented and diagnosed.
class DriftField {
 public:
  DriftField() = default;
  DriftField(int grid_size, std::vector<Node> sources, Node root, std::vector<std::vector<DriftStep>> steps)
      : S_(grid_size), sources_(std::move(sources)), root_(root), steps_(std::move(steps)) {
    if (sources_.size() != steps_.size()) throw ContractViolation("one step list per component expected");
    for (int i = 0; i < component_count(); ++i) {
      for (const auto& st : steps_[i]) {
        const auto [e, s] = grid_axis_edge(S_, st.from, st.to);
        auto& list = table_[e];
        for (const auto& c : list) {
          if (c.sign != s)
            throw ContractViolation("incoherent drift orientation on a shared edge (components " +
                                    std::to_string(c.component) + " and " + std::to_string(i) + ")");
          if (c.component == i) throw ContractViolation("drift component traverses an edge twice");
        }
        list.push_back({i, s});
      }
    }
  }

  int grid_size() const { return S_; }
  int component_count() const { return static_cast<int>(sources_.size()); }
  const std::vector<Node>& sources() const { return sources_; }
  Node root() const { return root_; }
  const std::vector<DriftStep>& steps(int i) const { return steps_[i]; }
  const std::map<int, std::vector<EdgeCrossing>>& edge_table() const { return table_; }

  // Curve of component i, rebuilt from its steps; throws if they do not chain.
  RectCurve curve(int i) const {
    const auto& st = steps_[i];
    if (st.empty()) return RectCurve({sources_[i]});
    std::vector<Node> nodes{st.front().from};
    for (const auto& s : st) {
      if (!(s.from == nodes.back())) throw ContractViolation("drift steps do not form a chain");
      nodes.push_back(s.to);
    }
    return RectCurve(std::move(nodes));
  }

  // Copy with one step of one component removed (fault injection).
  DriftField without_step(int component, std::size_t step) const {
    auto steps = steps_;
    steps.at(component).erase(steps.at(component).begin() + static_cast<std::ptrdiff_t>(step));
    return DriftField(S_, sources_, root_, std::move(steps));
  }

 private:
  int S_ = 0;
  std::vector<Node> sources_;
  Node root_{};
  std::vector<std::vector<DriftStep>> steps_;
  std::map<int, std::vector<EdgeCrossing>> table_;
};

// Rasterizes oriented tree paths (each ending at root) into a drift field.
// Rejects incoherent orientations and a support containing a cycle.
inline DriftField build_drift(const std::vector<RectCurve>& tree, Node root, const TriMesh& mesh) {
  std::vector<Node> sources;
  std::vector<std::vector<DriftStep>> steps;
  for (const auto& c : tree) {
    if (c.empty() || !(c.back() == root)) throw ContractViolation("drift curve must end at the root");
    if (!c.simple()) throw ContractViolation("drift curve must be simple");
    sources.push_back(c.front());
    std::vector<DriftStep> st;
    for (std::size_t k = 1; k < c.size(); ++k) st.push_back({c.nodes()[k - 1], c.nodes()[k]});
    steps.push_back(std::move(st));
  }
  DriftField drift(mesh.grid_size(), std::move(sources), root, std::move(steps));

  // acyclic support: union-find over the distinct edges
  std::vector<int> uf(mesh.node_count());
  std::iota(uf.begin(), uf.end(), 0);
  auto find = [&](int v) {
    while (uf[v] != v) v = uf[v] = uf[uf[v]];
    return v;
  };
  for (const auto& [e, list] : drift.edge_table()) {
    const int a = find(mesh.edge(e).a), b = find(mesh.edge(e).b);
    if (a == b) throw ContractViolation("drift support contains a cycle");
    uf[a] = b;
  }
  return drift;
}

struct ComponentDivergence {
  bool ok = true;
  std::vector<Node> offending;
};

struct DivergenceReport {
  std::vector<ComponentDivergence> components;
  bool ok() const {
    return std::all_of(components.begin(), components.end(), [](const auto& c) { return c.ok; });
  }
};

// Discrete div Gamma_i = delta_{P_i} - delta_{P_N}: the net number of
// outgoing steps must be +1 at the source, -1 at the root, 0 elsewhere.
inline DivergenceReport check_divergence(const DriftField& drift) {
  DivergenceReport report;
  for (int i = 0; i < drift.component_count(); ++i) {
    std::map<Node, int> balance;
    balance[drift.sources()[i]] += 0;
    balance[drift.root()] += 0;
    for (const auto& s : drift.steps(i)) {
      balance[s.from] += 1;
      balance[s.to] -= 1;
    }
    ComponentDivergence cd;
    for (const auto& [node, b] : balance) {
      int expected = 0;
      if (node == drift.sources()[i]) expected += 1;
      if (node == drift.root()) expected -= 1;
      if (b != expected) {
        cd.ok = false;
        cd.offending.push_back(node);
      }
    }
    report.components.push_back(std::move(cd));
  }
  return report;
}

// P1 space of component i, continuous away from gamma_i. Interior nodes of
// gamma_i are duplicated; the plus copy lies to the right of the curve and
// equals the minus copy + 1, so only the minus value is stored. Triangles
// read a vertex as x[v] + offset(t, corner). Terminal nodes are not
// duplicated, and boundary nodes are fixed to zero.
class CutSpace {
 public:
  CutSpace(const RectCurve& gamma, const TriMesh& mesh) : S_(mesh.grid_size()) {
    offsets_.assign(mesh.triangle_count(), {0, 0, 0});
    const auto& nodes = gamma.nodes();
    if (nodes.size() < 2) return;
    if (!gamma.simple()) throw ContractViolation("cut curve must be simple");
    for (const auto& n : nodes) {
      if (!mesh.contains(n) || mesh.on_boundary(n))
        throw UnsupportedConfigurationError("drift curve touches the domain boundary");
    }
    for (std::size_t k = 1; k + 1 < nodes.size(); ++k) {
      const Node v = nodes[k];
      cut_nodes_.push_back(mesh.node_id(v));
      const double a_in = std::atan2(nodes[k - 1].iy - v.iy, nodes[k - 1].ix - v.ix);
      const double a_out = std::atan2(nodes[k + 1].iy - v.iy, nodes[k + 1].ix - v.ix);
      auto rel = [a_in](double a) {
        double r = std::fmod(a - a_in, 2.0 * std::numbers::pi);
        return r < 0 ? r + 2.0 * std::numbers::pi : r;
      };
      const double sweep = rel(a_out);
      for (const auto& [t, corner] : mesh.node_star(v)) {
        const Point2 b = mesh.barycenter(t);
        const Point2 p = mesh.position(v);
        // counterclockwise from the incoming direction to the outgoing one is the right side
        if (rel(std::atan2(b.y - p.y, b.x - p.x)) < sweep) offsets_[t][corner] = 1;
      }
    }
  }

  int grid_size() const { return S_; }
  int base_dof_count() const { return (S_ + 1) * (S_ + 1); }
  int duplicated_count() const { return static_cast<int>(cut_nodes_.size()); }
  int constraint_count() const { return duplicated_count(); }
  int parameter_count() const { return base_dof_count() + duplicated_count() - constraint_count(); }
  const std::vector<int>& cut_nodes() const { return cut_nodes_; }
  bool has_cut() const { return !cut_nodes_.empty(); }

  int offset(int t, int corner) const { return offsets_[t][corner]; }
  const std::array<std::int8_t, 3>& offsets(int t) const { return offsets_[t]; }

  std::array<double, 3> triangle_values(const std::vector<double>& x, const TriMesh& mesh, int t) const {
    const auto& tri = mesh.triangle(t);
    const auto& o = offsets_[t];
    return {x[tri[0]] + o[0], x[tri[1]] + o[1], x[tri[2]] + o[2]};
  }

 private:
  int S_;
  std::vector<int> cut_nodes_;
  std::vector<std::array<std::int8_t, 3>> offsets_;
};

inline CutSpace build_cut_space(const DriftField& drift, int component, const TriMesh& mesh) {
  if (component < 0 || component >= drift.component_count()) throw ContractViolation("component index out of range");
  return CutSpace(drift.curve(component), mesh);
}

// Values a function takes at node v seen from the minus (left) and plus
// (right) side of the cut. Off the cut both are x[v].
inline std::pair<double, double> side_values(const CutSpace& space, const std::vector<double>& x, const TriMesh& mesh,
                                             Node v) {
  const int id = mesh.node_id(v);
  double lo = x[id], hi = x[id];
  for (const auto& [t, corner] : mesh.node_star(v)) {
    const double val = x[id] + space.offset(t, corner);
    lo = std::min(lo, val);
    hi = std::max(hi, val);
  }
  return {lo, hi};
}

// U = (u_1, ..., u_{N-1}); each u_i holds one value per lattice node (the
// minus-side value on cut nodes). Boundary entries are zero.
struct PhaseState {
  std::vector<std::vector<double>> u;
  int component_count() const { return static_cast<int>(u.size()); }
};

inline PhaseState zero_state(int components, const TriMesh& mesh) {
  return PhaseState{std::vector<std::vector<double>>(components, std::vector<double>(mesh.node_count(), 0.0))};
}

inline void require_admissible(const PhaseState& state, const std::vector<CutSpace>& spaces, const TriMesh& mesh) {
  if (state.component_count() != static_cast<int>(spaces.size()))
    throw ContractViolation("phase state has the wrong number of components");
  for (const auto& ui : state.u) {
    if (static_cast<int>(ui.size()) != mesh.node_count()) throw ContractViolation("phase state has the wrong size");
    for (int v = 0; v < mesh.node_count(); ++v) {
      if (!std::isfinite(ui[v])) throw ContractViolation("phase state is not finite");
      if (mesh.on_boundary(v) && ui[v] != 0.0) throw ContractViolation("phase state violates the zero boundary trace");
    }
  }
}

// Initial state from a guess tree lambda: u_i is the winding number of
// lambda_i followed by reversed gamma_i. Away from lambda this is exactly
// representable in the cut space; on lambda nodes the incident readings are
// averaged.
inline PhaseState state_from_guess(const std::vector<RectCurve>& guess, const DriftField& drift,
                                   const std::vector<CutSpace>& spaces, const TriMesh& mesh) {
  if (static_cast<int>(guess.size()) != drift.component_count())
    throw ContractViolation("guess tree needs one path per component");
  PhaseState state = zero_state(drift.component_count(), mesh);
  for (int i = 0; i < drift.component_count(); ++i) {
    const RectCurve loop = concatenate(guess[i], drift.curve(i).reversed());
    const WindingField w = winding_field(loop, mesh);
    for (int v = 0; v < mesh.node_count(); ++v) {
      if (mesh.on_boundary(v)) continue;
      double sum = 0.0;
      int count = 0;
      for (const auto& [t, corner] : mesh.node_star(mesh.node(v))) {
        sum += w[t] - spaces[i].offset(t, corner);
        ++count;
      }
      state.u[i][v] = sum / count;
    }
  }
  return state;
}

// Everything the solvers need for one terminal problem.
struct Discretization {
  TriMesh mesh;
  std::vector<Node> terminals;
  DriftField drift;
  std::vector<CutSpace> spaces;

  int component_count() const { return drift.component_count(); }
};

inline Discretization discretize(const TerminalProblem& problem) {
  problem.validate();
  TriMesh mesh(problem.grid_size);
  auto terminals = snap_terminals(problem, mesh);
  const int root = problem.root_index();
  auto tree = l1_spanning_tree(terminals, root);
  DriftField drift = build_drift(tree, terminals[root], mesh);
  std::vector<CutSpace> spaces;
  for (int i = 0; i < drift.component_count(); ++i) spaces.push_back(build_cut_space(drift, i, mesh));
  return Discretization{std::move(mesh), std::move(terminals), std::move(drift), std::move(spaces)};
}

}  // namespace steiner
