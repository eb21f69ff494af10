#pragma once

// Discrete Modica-Mortola energies on the cut spaces:
//   f_h^i(u) = eps |grad u|^2 + W(u) / eps,  W(u) = sin^2(pi u),  eps = 2h by default,
// integrated exactly per triangle and aggregated over components either by
// the pointwise sup (Steiner problem) or by an l^{1/alpha} norm (irrigation).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "steiner/density.hpp"
#include "steiner/drift.hpp"
#include "steiner/errors.hpp"
#include "steiner/geometry.hpp"
#include "steiner/lbfgs.hpp"
#include "steiner/norms.hpp"

namespace steiner {

// c0 = 2 * int_0^1 sqrt(W) = 4 / pi for W = sin^2(pi u).
inline constexpr double kSurfaceTension = 4.0 / std::numbers::pi;

namespace detail {

// k-th derivative of cos at a point with the given cos and sin.
inline double cos_derivative(int k, double cs, double sn) {
  switch (k & 3) {
    case 0: return cs;
    case 1: return -sn;
    case 2: return -cs;
    default: return sn;
  }
}

// Divided difference cos[x_0, ..., x_m] over one cluster of nearby points,
// by the expansion about their mean,
//   f[x_0..x_m] = sum_{k>=m} f^(k)(c)/k! h_{k-m}(x - c),
// with h_j the complete homogeneous symmetric polynomials.
inline double cos_dd_clustered(const double* x, int m) {
  double c = 0.0;
  for (int k = 0; k <= m; ++k) c += x[k];
  c /= (m + 1);
  constexpr int kTerms = 10;
  std::array<double, kTerms> h{};
  h[0] = 1.0;
  for (int k = 0; k <= m; ++k) {
    const double d = x[k] - c;
    for (int j = 1; j < kTerms; ++j) h[j] += d * h[j - 1];
  }
  const double cs = std::cos(c), sn = std::sin(c);
  double sum = 0.0, fact = 1.0;
  for (int k = 1; k <= m; ++k) fact *= k;
  for (int j = 0; j < kTerms; ++j) {
    if (j > 0) fact *= (m + j);
    sum += cos_derivative(m + j, cs, sn) / fact * h[j];
  }
  return sum;
}

// Divided difference cos[x_0, ..., x_m] for up to five (possibly repeated)
// points: Newton's table on the sorted nodes, with every sub-block whose
// spread is below 0.1 evaluated by the clustered expansion instead of the
// cancelling quotient.
inline double cos_divided_difference(std::span<const double> pts) {
  constexpr double kCluster = 0.1;
  const int m = static_cast<int>(pts.size()) - 1;
  std::array<double, 5> x{};
  std::copy(pts.begin(), pts.end(), x.begin());
  std::sort(x.begin(), x.begin() + m + 1);
  if (x[m] - x[0] < kCluster) return cos_dd_clustered(x.data(), m);
  // row[i] holds f[x_i .. x_{i+k}] for the current order k
  std::array<double, 5> row{};
  for (int i = 0; i <= m; ++i) row[i] = std::cos(x[i]);
  for (int k = 1; k <= m; ++k) {
    for (int i = 0; i + k <= m; ++i) {
      const double spread = x[i + k] - x[i];
      row[i] = spread < kCluster ? cos_dd_clustered(x.data() + i, k) : (row[i + 1] - row[i]) / spread;
    }
  }
  return row[0];
}

}  // namespace detail

// int_t sin^2(pi u) for u affine on a triangle of the given area with the
// given vertex values. With phi = 2 pi u, int_t cos(phi) = -2 A cos[phi_0,
// phi_1, phi_2] (Hermite-Genocchi), hence the closed form below.
inline double potential_integral(const std::array<double, 3>& values, double area) {
  constexpr double tau = 2.0 * std::numbers::pi;
  const std::array<double, 3> phi{tau * values[0], tau * values[1], tau * values[2]};
  return std::max(0.0, area * (0.5 + detail::cos_divided_difference(phi)));
}

// u = a + b x + c y on the triangle with the given vertices.
inline double potential_integral(double a, double b, double c, const std::array<Point2, 3>& vertices) {
  std::array<double, 3> v{};
  for (int k = 0; k < 3; ++k) v[k] = a + b * vertices[k].x + c * vertices[k].y;
  const double area = 0.5 * std::abs((vertices[1].x - vertices[0].x) * (vertices[2].y - vertices[0].y) -
                                     (vertices[2].x - vertices[0].x) * (vertices[1].y - vertices[0].y));
  return potential_integral(v, area);
}

// Partial derivatives of potential_integral with respect to the vertex values:
// d/du_k = 2 pi A cos[phi_0, phi_1, phi_2, phi_k].
inline std::array<double, 3> potential_gradient(const std::array<double, 3>& values, double area) {
  constexpr double tau = 2.0 * std::numbers::pi;
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) {
    const std::array<double, 4> phi{tau * values[0], tau * values[1], tau * values[2], tau * values[k]};
    out[k] = tau * area * detail::cos_divided_difference(phi);
  }
  return out;
}

// Gradient of the P1 interpolant of `values` on a triangle of kind 0 or 1
// (see TriMesh) with grid step h.
inline Vec2 p1_gradient(int kind, const std::array<double, 3>& v, double h) {
  if (kind == 0) return {(v[1] - v[0]) / h, (v[2] - v[1]) / h};
  return {(v[1] - v[2]) / h, (v[2] - v[0]) / h};
}

// Transpose of p1_gradient applied to g.
inline std::array<double, 3> p1_gradient_transpose(int kind, const Vec2& g, double h) {
  if (kind == 0) return {-g[0] / h, (g[0] - g[1]) / h, g[1] / h};
  return {-g[1] / h, g[0] / h, (g[1] - g[0]) / h};
}

struct TriangleEnergy {
  double gradient_term = 0.0;   // eps |grad u|^2 area
  double potential_term = 0.0;  // (1/eps) int_t W(u)
  double total() const { return gradient_term + potential_term; }
};

struct EnergyReport {
  double total = 0.0;
  std::vector<double> per_component;
  double length_estimate = 0.0;
  int iterations = 0;
  bool converged = true;
  double residual = 0.0;
  std::vector<double> trace;  // staged objective after every accepted step
  std::vector<int> argmax;    // per triangle, component with the largest density (sup aggregation)
};

inline double length_estimate(const EnergyReport& report) { return report.total / kSurfaceTension; }
inline double length_estimate(double energy) { return energy / kSurfaceTension; }

// How densities of the components are combined on one triangle.
enum class Aggregation { sup, lp };

struct Aggregator {
  Aggregation kind = Aggregation::sup;
  double alpha = 0.0;     // lp: exponent 1/alpha
  double softness = 0.0;  // sup: 0 is the exact max, > 0 the smoothed epigraph form

  static Aggregator exact(double alpha) {
    return alpha == 0.0 ? Aggregator{Aggregation::sup, 0.0, 0.0} : Aggregator{Aggregation::lp, alpha, 0.0};
  }

  // Aggregated value of the densities e; writes d value / d e_i into w.
  double operator()(std::span<const double> e, std::span<double> w) const {
    const std::size_t n = e.size();
    if (n == 1) {
      w[0] = 1.0;
      return e[0];
    }
    if (kind == Aggregation::lp) {
      if (alpha == 1.0) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          s += e[i];
          w[i] = 1.0;
        }
        return s;
      }
      double m = 0.0;
      for (double v : e) m = std::max(m, v);
      if (m <= 0.0) {
        std::fill(w.begin(), w.end(), 0.0);
        return 0.0;
      }
      const double p = 1.0 / alpha;
      double s = 0.0;
      for (double v : e) s += std::pow(v / m, p);
      const double a = m * std::pow(s, alpha);
      for (std::size_t i = 0; i < n; ++i) w[i] = std::pow(e[i] / a, p - 1.0);
      return a;
    }
    if (softness <= 0.0) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (e[i] > e[best]) best = i;
      std::fill(w.begin(), w.end(), 0.0);
      w[best] = 1.0;
      return e[best];
    }
    // min_{t >= 0} t + (1/2mu) sum_i (e_i - t)_+^2, the gap variable t eliminated exactly
    const double mu = softness;
    double sum_all = 0.0, sq = 0.0;
    for (double v : e) {
      sum_all += std::max(v, 0.0);
      sq += std::max(v, 0.0) * std::max(v, 0.0);
    }
    double t = 0.0;
    if (sum_all <= mu) {
      for (std::size_t i = 0; i < n; ++i) w[i] = std::max(e[i], 0.0) / mu;
      return sq / (2.0 * mu);
    }
    std::array<double, 32> sorted{};
    std::vector<double> big;
    double* buf = sorted.data();
    if (n > sorted.size()) {
      big.resize(n);
      buf = big.data();
    }
    std::copy(e.begin(), e.end(), buf);
    std::sort(buf, buf + n, std::greater<>());
    double prefix = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      prefix += buf[k];
      t = (prefix - mu) / static_cast<double>(k + 1);
      const double next = k + 1 < n ? buf[k + 1] : -std::numeric_limits<double>::infinity();
      if (t >= next) break;
    }
    double val = t;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::max(e[i] - t, 0.0);
      val += r * r / (2.0 * mu);
      w[i] = r / mu;
    }
    return val;
  }
};

// Energy of a phase state on a discretization, with exact per-triangle
// integration. eps = epsilon_scale * h.
class PhaseFieldEnergy {
 public:
  PhaseFieldEnergy(const Discretization& disc, double epsilon_scale = 2.0)
      : disc_(disc), eps_(epsilon_scale * disc.mesh.step()) {
    if (!(epsilon_scale > 0.0)) throw ConfigError("epsilon scale must be positive");
  }

  double epsilon() const { return eps_; }
  const Discretization& discretization() const { return disc_; }

  TriangleEnergy triangle_energy(const std::vector<double>& u, int component, int t) const {
    const auto& mesh = disc_.mesh;
    const auto v = disc_.spaces[component].triangle_values(u, mesh, t);
    const Vec2 g = p1_gradient(mesh.triangle_kind(t), v, mesh.step());
    const double area = mesh.triangle_area();
    return {eps_ * (g[0] * g[0] + g[1] * g[1]) * area, potential_integral(v, area) / eps_};
  }

  // Aggregated energy sum_t area * agg(e_1(t), ..., e_n(t)), e_i the per-area
  // density of component i. If `grad` is non-null it receives the gradient
  // with respect to every nodal value (boundary entries zeroed).
  double evaluate(const PhaseState& U, const Aggregator& agg, std::vector<std::vector<double>>* grad = nullptr,
                  std::vector<double>* per_component = nullptr, std::vector<int>* argmax = nullptr) const {
    const auto& mesh = disc_.mesh;
    const int n = U.component_count();
    const double area = mesh.triangle_area();
    const double h = mesh.step();
    if (grad) {
      grad->assign(n, std::vector<double>(mesh.node_count(), 0.0));
    }
    if (per_component) per_component->assign(n, 0.0);
    if (argmax) argmax->assign(mesh.triangle_count(), 0);
    std::vector<double> e(n), w(n);
    std::vector<std::array<double, 3>> vals(n);
    std::vector<Vec2> grads(n);
    double total = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
      const int kind = mesh.triangle_kind(t);
      for (int i = 0; i < n; ++i) {
        vals[i] = disc_.spaces[i].triangle_values(U.u[i], mesh, t);
        grads[i] = p1_gradient(kind, vals[i], h);
        const double gterm = eps_ * (grads[i][0] * grads[i][0] + grads[i][1] * grads[i][1]);
        e[i] = gterm + potential_integral(vals[i], area) / (eps_ * area);
        if (per_component) (*per_component)[i] += area * e[i];
      }
      total += area * agg(e, w);
      if (argmax) (*argmax)[t] = static_cast<int>(std::max_element(e.begin(), e.end()) - e.begin());
      if (!grad) continue;
      const auto& tri = mesh.triangle(t);
      for (int i = 0; i < n; ++i) {
        if (w[i] == 0.0) continue;
        const auto dg = p1_gradient_transpose(kind, grads[i], h);
        const auto dp = potential_gradient(vals[i], area);
        for (int k = 0; k < 3; ++k) {
          const double de = 2.0 * eps_ * dg[k] + dp[k] / (eps_ * area);
          (*grad)[i][tri[k]] += area * w[i] * de;
        }
      }
    }
    if (grad)
      for (auto& gi : *grad)
        for (int v = 0; v < mesh.node_count(); ++v)
          if (mesh.on_boundary(v)) gi[v] = 0.0;
    return total;
  }

 private:
  const Discretization& disc_;
  double eps_;
};

inline EnergyReport make_report(const PhaseFieldEnergy& energy, const PhaseState& U, const Aggregator& agg) {
  EnergyReport r;
  r.total = energy.evaluate(U, agg, nullptr, &r.per_component, &r.argmax);
  r.length_estimate = length_estimate(r.total);
  return r;
}

// G_h^0: pointwise sup over components.
inline EnergyReport energy_G0(const PhaseFieldEnergy& energy, const PhaseState& U) {
  require_admissible(U, energy.discretization().spaces, energy.discretization().mesh);
  return make_report(energy, U, Aggregator::exact(0.0));
}

// G_h^alpha: pointwise l^{1/alpha} aggregation, alpha in (0, 1].
inline EnergyReport energy_Galpha(const PhaseFieldEnergy& energy, const PhaseState& U, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0,1] for the l^{1/alpha} aggregation");
  require_admissible(U, energy.discretization().spaces, energy.discretization().mesh);
  return make_report(energy, U, Aggregator::exact(alpha));
}

// Per-triangle aggregated energy density (theta) and per-component
// densities f_i of U, exact aggregation for alpha.
inline DensityField energy_density(const PhaseFieldEnergy& energy, const PhaseState& U, double alpha) {
  const auto& disc = energy.discretization();
  const auto& mesh = disc.mesh;
  const int n = U.component_count();
  const Aggregator agg = Aggregator::exact(alpha);
  DensityField out;
  out.area = mesh.triangle_area();
  out.theta.assign(mesh.triangle_count(), 0.0);
  out.flux.assign(n, std::vector<double>(mesh.triangle_count(), 0.0));
  std::vector<double> e(n), w(n);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    for (int i = 0; i < n; ++i) {
      e[i] = energy.triangle_energy(U.u[i], i, t).total() / out.area;
      out.flux[i][t] = e[i];
    }
    out.theta[t] = agg(e, w);
    out.cost += out.area * out.theta[t];
  }
  return out;
}

// Starting state whose jump set is the drift itself (the rectilinear tree).
inline PhaseState rectilinear_start(const Discretization& disc) {
  std::vector<RectCurve> guess;
  for (int i = 0; i < disc.component_count(); ++i) guess.push_back(disc.drift.curve(i));
  return state_from_guess(guess, disc.drift, disc.spaces, disc.mesh);
}

struct LocalSolveOptions {
  // Softness of the smoothed sup per continuation stage, in units of h,
  // applied to the scale-free density eps * f (O(1) across an interface).
  // Only used for alpha = 0 with two or more components.
  std::vector<double> schedule{4.0, 2.0, 1.0};
  // eps = epsilon_scale * h
  double epsilon_scale = 2.0;
  int max_iter = 4000;  // per stage
  double gtol = 1e-5;   // stationarity, |grad|_inf / h
  int memory = 12;
};

// Free (interior) nodal values of all components flattened into one vector.
class FreeDofMap {
 public:
  FreeDofMap(const TriMesh& mesh, int components) : components_(components), nodes_(mesh.node_count()) {
    for (int v = 0; v < mesh.node_count(); ++v)
      if (!mesh.on_boundary(v)) interior_.push_back(v);
  }
  std::size_t size() const { return interior_.size() * components_; }
  std::vector<double> gather(const PhaseState& U) const {
    std::vector<double> x(size());
    for (int i = 0; i < components_; ++i)
      for (std::size_t k = 0; k < interior_.size(); ++k) x[i * interior_.size() + k] = U.u[i][interior_[k]];
    return x;
  }
  void scatter(const std::vector<double>& x, PhaseState& U) const {
    for (int i = 0; i < components_; ++i)
      for (std::size_t k = 0; k < interior_.size(); ++k) U.u[i][interior_[k]] = x[i * interior_.size() + k];
  }
  void gather_gradient(const std::vector<std::vector<double>>& g, std::vector<double>& out) const {
    out.resize(size());
    for (int i = 0; i < components_; ++i)
      for (std::size_t k = 0; k < interior_.size(); ++k) out[i * interior_.size() + k] = g[i][interior_[k]];
  }

 private:
  int components_;
  int nodes_;
  std::vector<int> interior_;
};

// Local minimization of G_h^alpha (alpha > 0) or G_h^0 from `init`. For
// alpha = 0 with several components the sup is replaced by its epigraph
// penalty and the softness is driven down through `opt.schedule`; the report
// holds the exact energy of the returned state.
inline std::pair<PhaseState, EnergyReport> solve_local(const Discretization& disc, double alpha, PhaseState init,
                                                       const LocalSolveOptions& opt = {}) {
  require_admissible(init, disc.spaces, disc.mesh);
  const PhaseFieldEnergy energy(disc, opt.epsilon_scale);
  const double h = disc.mesh.step();
  const FreeDofMap map(disc.mesh, init.component_count());
  std::vector<double> x = map.gather(init);
  PhaseState work = init;

  std::vector<Aggregator> stages;
  if (alpha > 0.0 || init.component_count() == 1) {
    stages.push_back(Aggregator::exact(alpha));
  } else {
    for (double s : opt.schedule) stages.push_back({Aggregation::sup, 0.0, s * h / energy.epsilon()});
    if (stages.empty()) stages.push_back(Aggregator::exact(0.0));
  }

  EnergyReport report;
  bool converged = true;
  double residual = 0.0;
  std::vector<std::vector<double>> gfull;
  for (const auto& agg : stages) {
    Objective f = [&](const std::vector<double>& xs, std::vector<double>& g) {
      map.scatter(xs, work);
      const double val = energy.evaluate(work, agg, &gfull);
      map.gather_gradient(gfull, g);
      return val;
    };
    LbfgsOptions lo;
    lo.memory = opt.memory;
    lo.max_iter = opt.max_iter;
    lo.gtol = opt.gtol * h;
    const LbfgsResult r = minimize_lbfgs(f, x, lo);
    report.iterations += r.iterations;
    report.trace.insert(report.trace.end(), r.trace.begin(), r.trace.end());
    converged = r.converged;
    residual = r.grad_inf / h;
  }
  map.scatter(x, work);
  const Aggregator final_agg = Aggregator::exact(alpha);
  EnergyReport exact = make_report(energy, work, final_agg);
  exact.iterations = report.iterations;
  exact.trace = std::move(report.trace);
  exact.converged = converged;
  exact.residual = residual;
  return {std::move(work), std::move(exact)};
}

}  // namespace steiner
