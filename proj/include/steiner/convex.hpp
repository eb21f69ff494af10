#pragma once

// Convex relaxation
//   min_U  sum_t area * Phi_alpha**((grad u_i)_t, i = 1..N-1)
//        = min_U max_{q_t in K^alpha} sum_t area * <q_t, (grad u)_t>
// solved with a first-order primal-dual iteration. The dual step projects
// every triangle's 2 x (N-1) matrix onto K^alpha; the primal step moves the
// free nodal values of each cut space.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "steiner/density.hpp"
#include "steiner/drift.hpp"
#include "steiner/errors.hpp"
#include "steiner/norms.hpp"
#include "steiner/phasefield.hpp"

namespace steiner {

inline constexpr int kMaxConvexComponents = 12;

struct DualField {
  std::vector<DualMatrix> q;  // per triangle
};

struct ConvexOptions {
  int max_iter = 20000;
  double tol = 1e-4;  // relative primal and dual residuals
  int check_every = 20;
  // Step sizes; zero selects tau = ratio / L, sigma = 1 / (ratio L) scaled by 0.99.
  double sigma = 0.0;
  double tau = 0.0;
  double step_ratio = 1.0;
  // Dykstra sweeps per triangle and iteration; the corrections persist, so
  // the projection keeps converging across iterations. Dual iterates are
  // projected exactly once more before returning.
  ProjectionOptions projection{4, 1e-11, true};
  ProjectionOptions final_projection{100000, 1e-12};
  EnvelopeOptions envelope{};
};

struct ConvexReport {
  double cost = 0.0;        // sum_t area * Phi**(p_t)
  double pairing = 0.0;     // sum_t area * <q_t, p_t>
  double gap = 0.0;         // cost - pairing
  double divergence = 0.0;  // |L^T q|_inf / h, dual stationarity
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // relative residual max at every check
};

struct ConvexSolution {
  PhaseState state;
  DualField dual;
  DensityField density;
  ConvexReport report;
};

// Bound on |L| for L x = (area * (grad x)_t)_t: sum_t |grad x|^2 h^2 counts
// every axis edge twice, and the grid Laplacian has spectral radius <= 8,
// so |grad| <= 4 / h.
inline double coupling_norm_bound(const TriMesh& mesh) { return mesh.triangle_area() * 4.0 / mesh.step(); }

namespace detail {

// p_t for every component on triangle t.
inline void gradient_matrix(const Discretization& disc, const PhaseState& U, int t, PrimalMatrix& p) {
  const auto& mesh = disc.mesh;
  const int kind = mesh.triangle_kind(t);
  for (int i = 0; i < U.component_count(); ++i) {
    const auto v = disc.spaces[i].triangle_values(U.u[i], mesh, t);
    p[i] = p1_gradient(kind, v, mesh.step());
  }
}

// Gradient of the affine part only (x = 0).
inline void offset_gradient(const Discretization& disc, int t, PrimalMatrix& p) {
  const auto& mesh = disc.mesh;
  const int kind = mesh.triangle_kind(t);
  for (int i = 0; i < p.n(); ++i) {
    const auto& o = disc.spaces[i].offsets(t);
    p[i] = p1_gradient(kind, {double(o[0]), double(o[1]), double(o[2])}, mesh.step());
  }
}

// y <- L^T q restricted to free nodes: area * G_t^T q_t accumulated per node.
inline void apply_transpose(const Discretization& disc, const DualField& dual, std::vector<std::vector<double>>& y) {
  const auto& mesh = disc.mesh;
  const int n = disc.component_count();
  const double area = mesh.triangle_area();
  for (auto& yi : y) std::fill(yi.begin(), yi.end(), 0.0);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangle(t);
    const int kind = mesh.triangle_kind(t);
    for (int i = 0; i < n; ++i) {
      const auto d = p1_gradient_transpose(kind, dual.q[t][i], mesh.step());
      for (int k = 0; k < 3; ++k) y[i][tri[k]] += area * d[k];
    }
  }
  for (auto& yi : y)
    for (int v = 0; v < mesh.node_count(); ++v)
      if (mesh.on_boundary(v)) yi[v] = 0.0;
}

inline bool separable(int n, double alpha) { return n == 1 || alpha == 1.0; }

// Column-wise projection onto unit disks.
inline void project_disks(DualMatrix& q) {
  for (auto& c : q.cols) {
    const double len = norm(c);
    if (len > 1.0) c = {c[0] / len, c[1] / len};
  }
}

}  // namespace detail

namespace detail {

// Envelope value taken from the decomposition side. When the bracket does
// not close within budget the upper bound is still an exact decomposition
// cost, so it is used together with the remaining width.
inline EnvelopeValue envelope_upper(const PrimalMatrix& p, double alpha, const EnvelopeOptions& opt,
                                    const DualMatrix* hint = nullptr) {
  try {
    return phi_double_star(p, alpha, opt, hint);
  } catch (const AccuracyError& e) {
    EnvelopeValue v;
    v.lower = e.lower();
    v.upper = v.value = e.upper();
    return v;
  }
}

}  // namespace detail

// Per-triangle densities theta_t = Phi_alpha**(p_t) of a primal state. A
// dual field, if given, seeds the envelope evaluations.
inline DensityField extract_density(const Discretization& disc, const PhaseState& U, double alpha,
                                    const DualField* dual = nullptr, const EnvelopeOptions& opt = {}) {
  require_admissible(U, disc.spaces, disc.mesh);
  const auto& mesh = disc.mesh;
  const int n = U.component_count();
  DensityField out;
  out.area = mesh.triangle_area();
  out.theta.assign(mesh.triangle_count(), 0.0);
  out.flux.assign(n, std::vector<double>(mesh.triangle_count(), 0.0));
  PrimalMatrix p(n);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    detail::gradient_matrix(disc, U, t, p);
    for (int i = 0; i < n; ++i) out.flux[i][t] = norm(p[i]);
    const auto v = detail::envelope_upper(p, alpha, opt, dual ? &dual->q[t] : nullptr);
    out.theta[t] = v.upper;
    out.bracket += out.area * (v.upper - v.lower);
  }
  for (double v : out.theta) out.cost += v * out.area;
  return out;
}

// sum_t area * (Phi**(p_t) - <q_t, p_t>): the decomposition cost minus the
// dual pairing. Nonnegative for a feasible dual up to the envelope tolerance.
inline double duality_gap(const Discretization& disc, const PhaseState& U, const DualField& dual, double alpha,
                          const EnvelopeOptions& opt = {}) {
  const auto& mesh = disc.mesh;
  const int n = U.component_count();
  if (static_cast<int>(dual.q.size()) != mesh.triangle_count()) throw ContractViolation("dual field has the wrong size");
  const SubsetFamily family(n, alpha);
  double upper = 0.0, pairing_sum = 0.0, scale = 0.0;
  PrimalMatrix p(n);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    if (k_alpha_violation(dual.q[t], family) > 1e-6) throw ContractViolation("dual field is not feasible");
    detail::gradient_matrix(disc, U, t, p);
    upper += mesh.triangle_area() * detail::envelope_upper(p, alpha, opt, &dual.q[t]).upper;
    pairing_sum += mesh.triangle_area() * pairing(p, dual.q[t]);
    scale += mesh.triangle_area() * p.column_norm_sum();
  }
  const double gap = upper - pairing_sum;
  if (gap < -1e-9 * std::max(1.0, scale) - 1e-6 * scale)
    throw InternalConsistencyError("negative duality gap: weak duality violated");
  return std::max(gap, 0.0);
}

inline ConvexSolution solve_convex(const Discretization& disc, double alpha, const ConvexOptions& opt = {}) {
  require_alpha(alpha);
  const auto& mesh = disc.mesh;
  const int n = disc.component_count();
  if (n < 1) throw ContractViolation("need at least one component");
  if (n > kMaxConvexComponents) throw ConfigError("convex solver supports at most 12 components");
  if (opt.max_iter < 1 || opt.check_every < 1) throw ConfigError("iteration counts must be positive");

  const double L = coupling_norm_bound(mesh);
  double tau = opt.tau, sigma = opt.sigma;
  if (tau <= 0.0 || sigma <= 0.0) {
    if (!(opt.step_ratio > 0.0)) throw ConfigError("step ratio must be positive");
    tau = 0.99 * opt.step_ratio / L;
    sigma = 0.99 / (opt.step_ratio * L);
  }
  if (sigma * tau * L * L >= 1.0) throw ConfigError("primal-dual step sizes violate sigma * tau * |L|^2 < 1");

  const int T = mesh.triangle_count();
  const double area = mesh.triangle_area();
  const double h = mesh.step();
  const bool sep = detail::separable(n, alpha);
  const KAlphaProjector projector(n, alpha);
  const SubsetFamily& family = projector.family();

  ConvexSolution sol;
  sol.state = zero_state(n, mesh);
  sol.dual.q.assign(T, DualMatrix(n));
  std::vector<std::vector<Vec2>> corrections;
  if (!sep) corrections.assign(T, std::vector<Vec2>(projector.correction_size(), Vec2{0.0, 0.0}));

  std::vector<PrimalMatrix> offsets(T, PrimalMatrix(n));
  for (int t = 0; t < T; ++t) detail::offset_gradient(disc, t, offsets[t]);

  PhaseState bar = sol.state;
  std::vector<std::vector<double>> lt(n, std::vector<double>(mesh.node_count(), 0.0));
  std::vector<DualMatrix> q_old;
  PrimalMatrix p(n);
  auto& report = sol.report;

  for (int it = 1; it <= opt.max_iter; ++it) {
    const bool check = it % opt.check_every == 0 || it == opt.max_iter;
    if (check) q_old = sol.dual.q;
    // dual ascent with projection onto K^alpha
    for (int t = 0; t < T; ++t) {
      detail::gradient_matrix(disc, bar, t, p);
      DualMatrix& q = sol.dual.q[t];
      for (int i = 0; i < n; ++i) {
        q[i][0] += sigma * area * p[i][0];
        q[i][1] += sigma * area * p[i][1];
      }
      if (sep) {
        detail::project_disks(q);
      } else if (k_alpha_violation(q, family) <= 0.0) {
        std::fill(corrections[t].begin(), corrections[t].end(), Vec2{0.0, 0.0});
      } else {
        projector.project(q, corrections[t], opt.projection);
      }
    }
    // primal descent and over-relaxation
    detail::apply_transpose(disc, sol.dual, lt);
    for (int i = 0; i < n; ++i)
      for (int v = 0; v < mesh.node_count(); ++v) {
        const double x = sol.state.u[i][v] - tau * lt[i][v];
        bar.u[i][v] = 2.0 * x - sol.state.u[i][v];
        sol.state.u[i][v] = x;
      }
    report.iterations = it;
    if (!check) continue;

    // Residuals of the optimality system. Primal: L^T q = 0, which the
    // primal step reads as (x_k - x_{k+1}) / tau. Dual: L x + b in N_K(q),
    // which holds at a fixed point of the projected ascent, so the dual
    // residual is the last dual move (q_k - q_{k+1}) / (sigma area) measured
    // in gradient units.
    double pr2 = 0.0, dr2 = 0.0, qn2 = 0.0, gn2 = 0.0, ltmax = 0.0;
    for (int i = 0; i < n; ++i)
      for (int v = 0; v < mesh.node_count(); ++v) {
        pr2 += lt[i][v] * lt[i][v];
        ltmax = std::max(ltmax, std::abs(lt[i][v]));
      }
    PrimalMatrix pb(n);
    for (int t = 0; t < T; ++t) {
      detail::gradient_matrix(disc, sol.state, t, pb);
      const DualMatrix& q = sol.dual.q[t];
      for (int i = 0; i < n; ++i) {
        const double dx = (q_old[t][i][0] - q[i][0]) / (sigma * area);
        const double dy = (q_old[t][i][1] - q[i][1]) / (sigma * area);
        dr2 += area * (dx * dx + dy * dy);
        gn2 += area * (pb[i][0] * pb[i][0] + pb[i][1] * pb[i][1]);
        qn2 += q[i][0] * q[i][0] + q[i][1] * q[i][1];
      }
    }
    // |L^T q| against |L| |q|, |dq / (sigma area)| against |grad x|
    report.primal_residual = std::sqrt(pr2) / (L * std::sqrt(qn2) + 1e-300);
    report.dual_residual = std::sqrt(dr2) / (std::sqrt(gn2) + 1e-300);
    report.divergence = ltmax / h;
    const double r = std::max(report.primal_residual, report.dual_residual);
    report.trace.push_back(r);
    if (r <= opt.tol) {
      report.converged = true;
      break;
    }
  }
  if (!sep) {
    for (int t = 0; t < T; ++t)
      if (k_alpha_violation(sol.dual.q[t], family) > 0.0)
        projector.project(sol.dual.q[t], corrections[t], opt.final_projection);
  }

  sol.density = extract_density(disc, sol.state, alpha, &sol.dual, opt.envelope);
  report.cost = sol.density.cost;
  report.pairing = 0.0;
  for (int t = 0; t < T; ++t) {
    detail::gradient_matrix(disc, sol.state, t, p);
    report.pairing += area * pairing(p, sol.dual.q[t]);
  }
  report.gap = std::max(0.0, report.cost - report.pairing);
  return sol;
}

}  // namespace steiner
