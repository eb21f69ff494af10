#pragma once

// Interior-point solve of the convex relaxation in its decomposition form
//
//   min  sum_t area sum_J |J|^alpha |psi_{t,J}|
//   s.t. (grad u_i)_t = sum_{J ni i} psi_{t,J},
//
// written with epigraph variables s_J >= |psi_J| and the logarithmic barrier
// -log(s_J^2 - |psi_J|^2). The singleton blocks are eliminated through the
// constraint, every other block is local to its triangle, so each Newton
// system reduces to a sparse system in the nodal values by a per-triangle
// Schur complement. Iterates follow the central path, which converges to the
// analytic center of the optimal set; symmetric problems therefore get
// symmetric solutions even when the optimum is not unique.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "steiner/convex.hpp"

namespace steiner {

struct BarrierOptions {
  double tol = 1e-4;        // stop when the central-path gap nu / t is below tol * cost
  double growth = 4.0;       // barrier weight factor between stages
  double newton_tol = 1e-6;  // lambda^2 / 2 that ends a stage
  int max_newton = 3000;     // Newton steps over all stages
  EnvelopeOptions envelope{};
};

namespace detail {

// psi_J as a signed sum of 2-vectors of the local variable vector
// w = (p_1 .. p_n, psi_J for |J| >= 2, s_J for all J).
struct ConeLayout {
  int n = 0, cones = 0, pdim = 0, dim = 0;
  std::vector<std::vector<std::pair<int, double>>> terms;  // by mask, index 0 unused
  std::vector<int> s_index;
  std::vector<double> radius;
  std::vector<int> masks;  // cones in use

  ConeLayout(int n_, double alpha) : n(n_) {
    const SubsetFamily family(n, alpha);
    cones = static_cast<int>(family.last());
    pdim = 2 * n;
    terms.resize(cones + 1);
    s_index.resize(cones + 1);
    radius.resize(cones + 1);
    // with alpha = 1 a block psi_J costs as much as splitting it into
    // singletons, so only the singletons are kept
    for (int J = 1; J <= cones; ++J)
      if (alpha < 1.0 || std::popcount(static_cast<unsigned>(J)) == 1) masks.push_back(J);
    std::vector<int> base(cones + 1, -1);
    int next = pdim;
    for (int J : masks)
      if (std::popcount(static_cast<unsigned>(J)) > 1) {
        base[J] = next;
        next += 2;
      }
    for (int J : masks) {
      s_index[J] = next++;
      radius[J] = family.radius(J);
    }
    dim = next;
    for (int J : masks) {
      if (base[J] >= 0) {
        terms[J].push_back({base[J], 1.0});
        continue;
      }
      const int i = std::countr_zero(static_cast<unsigned>(J));
      terms[J].push_back({2 * i, 1.0});
      for (int K : masks)
        if (base[K] >= 0 && (K >> i & 1)) terms[J].push_back({base[K], -1.0});
    }
  }

  Vec2 psi(const double* w, int J) const {
    Vec2 v{0.0, 0.0};
    for (const auto& [o, c] : terms[J]) {
      v[0] += c * w[o];
      v[1] += c * w[o + 1];
    }
    return v;
  }
};

}  // namespace detail

inline ConvexSolution solve_convex_barrier(const Discretization& disc, double alpha, const BarrierOptions& opt = {}) {
  require_alpha(alpha);
  const auto& mesh = disc.mesh;
  const int n = disc.component_count();
  if (n < 1) throw ContractViolation("need at least one component");
  if (n > kMaxConvexComponents) throw ConfigError("convex solver supports at most 12 components");
  if (!(opt.growth > 1.0) || !(opt.tol > 0.0)) throw ConfigError("barrier growth must exceed 1 and tol be positive");

  using Mat = Eigen::MatrixXd;
  using Vec = Eigen::VectorXd;
  const detail::ConeLayout lay(n, alpha);
  const int D = lay.dim, P = lay.pdim, Z = D - P;
  const int T = mesh.triangle_count();
  const double area = mesh.triangle_area();
  const double h = mesh.step();

  // free nodes
  std::vector<int> idx(mesh.node_count(), -1);
  int nint = 0;
  for (int v = 0; v < mesh.node_count(); ++v)
    if (!mesh.on_boundary(v)) idx[v] = nint++;
  const int N = n * nint;

  // gradient stencils: p_{i,c} = sum_k G[kind][c][k] u_i(corner k) + offset part
  double G[2][2][3];
  for (int kind = 0; kind < 2; ++kind)
    for (int k = 0; k < 3; ++k) {
      std::array<double, 3> e{0.0, 0.0, 0.0};
      e[k] = 1.0;
      const Vec2 g = p1_gradient(kind, e, h);
      G[kind][0][k] = g[0];
      G[kind][1][k] = g[1];
    }
  std::vector<PrimalMatrix> offsets(T, PrimalMatrix(n));
  for (int t = 0; t < T; ++t) detail::offset_gradient(disc, t, offsets[t]);

  Vec u = Vec::Zero(N);
  std::vector<double> w(static_cast<std::size_t>(T) * D, 0.0);  // local variables, p part refreshed from u
  auto wt = [&](int t) { return w.data() + static_cast<std::size_t>(t) * D; };

  auto refresh_p = [&](const Vec& x, int t, double* out) {
    const auto& tri = mesh.triangle(t);
    const int kind = mesh.triangle_kind(t);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c) {
        double s = offsets[t][i][c];
        for (int k = 0; k < 3; ++k)
          if (idx[tri[k]] >= 0) s += G[kind][c][k] * x[i * nint + idx[tri[k]]];
        out[2 * i + c] = s;
      }
  };

  // start: psi_J = 0 for |J| >= 2, s_J = |psi_J| + 1
  for (int t = 0; t < T; ++t) {
    double* x = wt(t);
    refresh_p(u, t, x);
    for (int J : lay.masks) x[lay.s_index[J]] = norm(lay.psi(x, J)) + 1.0;
  }
  const double nu = 2.0 * static_cast<double>(lay.masks.size()) * T;
  auto primal_cost = [&]() {
    double c = 0.0;
    for (int t = 0; t < T; ++t)
      for (int J : lay.masks) c += area * lay.radius[J] * norm(lay.psi(wt(t), J));
    return c;
  };
  double s_cost = 0.0;
  for (int t = 0; t < T; ++t)
    for (int J : lay.masks) s_cost += area * lay.radius[J] * wt(t)[lay.s_index[J]];
  double tw = nu / s_cost;

  auto barrier_value = [&](const std::vector<double>& ws, double weight) {
    double f = 0.0;
    for (int t = 0; t < T; ++t) {
      const double* x = ws.data() + static_cast<std::size_t>(t) * D;
      for (int J : lay.masks) {
        const Vec2 ps = lay.psi(x, J);
        const double s = x[lay.s_index[J]];
        const double d = s * s - ps[0] * ps[0] - ps[1] * ps[1];
        if (!(d > 0.0) || !(s > 0.0)) return std::numeric_limits<double>::infinity();
        f += weight * area * lay.radius[J] * s - std::log(d);
      }
    }
    return f;
  };

  Mat H(D, D), X(Z, P), Sm(P, P);
  Vec g(D), y(Z), gt(P);
  std::vector<double> Xs(static_cast<std::size_t>(T) * Z * P), ys(static_cast<std::size_t>(T) * Z), gs_all(static_cast<std::size_t>(T) * D);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(T) * 9 * n * n);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol;
  bool analyzed = false;
  Eigen::SparseMatrix<double> A(N, N);
  Vec rhs(N), du(N);
  std::vector<double> dw(static_cast<std::size_t>(T) * D), w_try;

  ConvexSolution sol;
  auto& report = sol.report;
  int newton = 0;
  bool done = false;
  while (!done && newton < opt.max_newton) {
    // Newton on the barrier problem with weight tw
    while (newton < opt.max_newton) {
      ++newton;
      trip.clear();
      rhs.setZero();
      for (int t = 0; t < T; ++t) {
        const double* x = wt(t);
        H.setZero();
        g.setZero();
        for (int J : lay.masks) {
          const Vec2 ps = lay.psi(x, J);
          const int si = lay.s_index[J];
          const double s = x[si];
          const double d = s * s - ps[0] * ps[0] - ps[1] * ps[1];
          const double gp[2] = {2.0 * ps[0] / d, 2.0 * ps[1] / d};
          const double gs = -2.0 * s / d + tw * area * lay.radius[J];
          double hc[3][3];
          for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 2; ++c) hc[r][c] = (r == c ? 2.0 / d : 0.0) + 4.0 * ps[r] * ps[c] / (d * d);
            hc[r][2] = hc[2][r] = -4.0 * s * ps[r] / (d * d);
          }
          hc[2][2] = -2.0 / d + 4.0 * s * s / (d * d);
          for (const auto& [a, ca] : lay.terms[J]) {
            g[a] += ca * gp[0];
            g[a + 1] += ca * gp[1];
            for (int r = 0; r < 2; ++r) {
              H(a + r, si) += ca * hc[r][2];
              H(si, a + r) += ca * hc[r][2];
            }
            for (const auto& [b, cb] : lay.terms[J])
              for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) H(a + r, b + c) += ca * cb * hc[r][c];
          }
          g[si] += gs;
          H(si, si) += hc[2][2];
        }
        // eliminate the local block
        Eigen::LLT<Mat> llt(H.bottomRightCorner(Z, Z));
        X = llt.solve(H.bottomLeftCorner(Z, P));
        y = llt.solve(g.tail(Z));
        Sm = H.topLeftCorner(P, P) - H.topRightCorner(P, Z) * X;
        gt = g.head(P) - H.topRightCorner(P, Z) * y;
        std::copy(X.data(), X.data() + Z * P, Xs.begin() + static_cast<std::ptrdiff_t>(t) * Z * P);
        std::copy(y.data(), y.data() + Z, ys.begin() + static_cast<std::ptrdiff_t>(t) * Z);
        std::copy(g.data(), g.data() + D, gs_all.begin() + static_cast<std::ptrdiff_t>(t) * D);

        const auto& tri = mesh.triangle(t);
        const int kind = mesh.triangle_kind(t);
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < 3; ++k) {
            if (idx[tri[k]] < 0) continue;
            const int row = i * nint + idx[tri[k]];
            rhs[row] -= G[kind][0][k] * gt[2 * i] + G[kind][1][k] * gt[2 * i + 1];
            for (int j = 0; j < n; ++j)
              for (int l = 0; l < 3; ++l) {
                if (idx[tri[l]] < 0) continue;
                double v = 0.0;
                for (int c = 0; c < 2; ++c)
                  for (int e = 0; e < 2; ++e) v += G[kind][c][k] * Sm(2 * i + c, 2 * j + e) * G[kind][e][l];
                trip.emplace_back(row, j * nint + idx[tri[l]], v);
              }
          }
      }
      A.setFromTriplets(trip.begin(), trip.end());
      if (!analyzed) {
        chol.analyzePattern(A);
        analyzed = true;
      }
      chol.factorize(A);
      if (chol.info() != Eigen::Success) throw InternalConsistencyError("barrier Newton system is not positive definite");
      du = chol.solve(rhs);

      // local steps and the Newton decrement
      double dec = 0.0, amax = std::numeric_limits<double>::infinity();
      for (int t = 0; t < T; ++t) {
        double* dx = dw.data() + static_cast<std::size_t>(t) * D;
        const auto& tri = mesh.triangle(t);
        const int kind = mesh.triangle_kind(t);
        for (int i = 0; i < n; ++i)
          for (int c = 0; c < 2; ++c) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k)
              if (idx[tri[k]] >= 0) s += G[kind][c][k] * du[i * nint + idx[tri[k]]];
            dx[2 * i + c] = s;
          }
        const double* Xt = Xs.data() + static_cast<std::size_t>(t) * Z * P;
        const double* yt = ys.data() + static_cast<std::size_t>(t) * Z;
        for (int r = 0; r < Z; ++r) {
          double s = -yt[r];
          for (int c = 0; c < P; ++c) s -= Xt[static_cast<std::size_t>(c) * Z + r] * dx[c];  // column-major
          dx[P + r] = s;
        }
        // Newton decrement lambda^2 = -g . dx
        const double* gl = gs_all.data() + static_cast<std::size_t>(t) * D;
        for (int c = 0; c < D; ++c) dec -= gl[c] * dx[c];
        const double* x = wt(t);
        for (int J : lay.masks) {
          const Vec2 ps = lay.psi(x, J), dp = lay.psi(dx, J);
          const double s = x[lay.s_index[J]], ds = dx[lay.s_index[J]];
          const double qa = ds * ds - dp[0] * dp[0] - dp[1] * dp[1];
          const double qb = 2.0 * (s * ds - ps[0] * dp[0] - ps[1] * dp[1]);
          const double qc = s * s - ps[0] * ps[0] - ps[1] * ps[1];
          // smallest positive root of qa a^2 + qb a + qc
          double root = std::numeric_limits<double>::infinity();
          if (std::abs(qa) < 1e-300) {
            if (qb < 0.0) root = -qc / qb;
          } else {
            const double disc2 = qb * qb - 4.0 * qa * qc;
            if (disc2 >= 0.0) {
              const double sq = std::sqrt(disc2);
              const double q = -0.5 * (qb + (qb >= 0.0 ? sq : -sq));
              for (double r : {q / qa, q != 0.0 ? qc / q : std::numeric_limits<double>::infinity()})
                if (r > 0.0) root = std::min(root, r);
            }
          }
          amax = std::min(amax, root);
        }
      }
      double step = std::min(1.0, 0.99 * amax);
      const double f0 = barrier_value(w, tw);
      w_try.resize(w.size());
      double f1 = f0;
      for (int bt = 0; bt < 60; ++bt) {
        for (std::size_t k = 0; k < w.size(); ++k) w_try[k] = w[k] + step * dw[k];
        f1 = barrier_value(w_try, tw);
        if (f1 <= f0 - 0.25 * step * dec) break;
        step *= 0.5;
      }
      if (!(f1 < f0) && dec > 1e-12) {
        // no progress: the stage is as converged as arithmetic allows
        break;
      }
      w.swap(w_try);
      u += step * du;
      if (0.5 * dec <= opt.newton_tol) break;
    }
    const double cost = primal_cost();
    if (nu / tw <= opt.tol * cost) {
      done = true;
      report.converged = true;
    } else {
      tw *= opt.growth;
    }
  }
  report.iterations = newton;

  sol.state = zero_state(n, mesh);
  for (int i = 0; i < n; ++i)
    for (int v = 0; v < mesh.node_count(); ++v)
      if (idx[v] >= 0) sol.state.u[i][v] = u[i * nint + idx[v]];

  // dual from the singleton cones, pulled into K^alpha
  const SubsetFamily family(n, alpha);
  sol.dual.q.assign(T, DualMatrix(n));
  for (int t = 0; t < T; ++t) {
    const double* x = wt(t);
    for (int i = 0; i < n; ++i) {
      const int J = 1 << i;
      const Vec2 ps = lay.psi(x, J);
      const double s = x[lay.s_index[J]];
      const double d = s * s - ps[0] * ps[0] - ps[1] * ps[1];
      sol.dual.q[t][i] = {2.0 * ps[0] / (d * tw * area), 2.0 * ps[1] / (d * tw * area)};
    }
    sol.dual.q[t] = shrink_into_K(sol.dual.q[t], family);
  }

  sol.density = extract_density(disc, sol.state, alpha, &sol.dual, opt.envelope);
  report.cost = sol.density.cost;
  PrimalMatrix p(n);
  for (int t = 0; t < T; ++t) {
    detail::gradient_matrix(disc, sol.state, t, p);
    report.pairing += area * pairing(p, sol.dual.q[t]);
  }
  report.gap = std::max(0.0, report.cost - report.pairing);
  std::vector<std::vector<double>> lt(n, std::vector<double>(mesh.node_count(), 0.0));
  detail::apply_transpose(disc, sol.dual, lt);
  double ltmax = 0.0;
  for (const auto& r : lt)
    for (double v : r) ltmax = std::max(ltmax, std::abs(v));
  report.divergence = ltmax / h;
  return sol;
}

}  // namespace steiner
