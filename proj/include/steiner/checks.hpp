#pragma once

// Verification suites shared by the command line tool and the acceptance
// runner: norm and envelope properties on random inputs, calibration of
// triangles, and the relaxation sandwich between the two solvers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "steiner/calibration.hpp"
#include "steiner/norms.hpp"

namespace steiner {

struct SuiteResult {
  std::string name;
  bool passed = true;
  int cases = 0;
  double worst = 0.0;  // largest observed violation
  double tol = 0.0;
  std::string detail;
};

inline SuiteResult suite(std::string name) {
  SuiteResult r;
  r.name = std::move(name);
  return r;
}

namespace detail {

inline Mat2xN random_matrix(std::mt19937_64& rng, int n, double spread) {
  std::normal_distribution<double> gauss(0.0, spread);
  Mat2xN m(n);
  for (auto& c : m.cols) c = {gauss(rng), gauss(rng)};
  return m;
}

// Uniform-ish point of K^alpha: a random matrix pulled into the set along
// its ray and then shrunk by a random factor, so interior and boundary are
// both sampled.
inline DualMatrix random_feasible(std::mt19937_64& rng, const SubsetFamily& family) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DualMatrix q = shrink_into_K(random_matrix(rng, family.columns(), 1.0), family);
  const double s = unit(rng) < 0.3 ? 1.0 : unit(rng);
  for (auto& c : q.cols) c = {c[0] * s, c[1] * s};
  return q;
}

inline void record(SuiteResult& r, double violation) {
  ++r.cases;
  r.worst = std::max(r.worst, violation);
  if (!(violation <= r.tol)) r.passed = false;
}

}  // namespace detail

// psi_star >= psi_alpha with equality on nonnegative weights, and
// monotonicity in alpha on binary weights.
inline std::vector<SuiteResult> weight_norm_suite(int columns, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SuiteResult ext = suite("psi_star >= psi_alpha"), pos = suite("psi_star = psi_alpha on g >= 0"), mono = suite("psi_alpha nondecreasing in alpha on binary g");
  ext.tol = pos.tol = mono.tol = 1e-12;
  for (int k = 0; k < samples; ++k) {
    const double alpha = unit(rng);
    WeightVector g(columns), a(columns), b(columns);
    for (int j = 0; j < columns; ++j) {
      g[j] = gauss(rng);
      a[j] = std::abs(g[j]);
      b[j] = unit(rng) < 0.5 ? 0.0 : 1.0;
    }
    detail::record(ext, psi_alpha(g, alpha) - psi_star(g, alpha));
    detail::record(pos, std::abs(psi_star(a, alpha) - psi_alpha(a, alpha)));
    const double beta = alpha + (1.0 - alpha) * unit(rng);
    detail::record(mono, psi_alpha(b, alpha) - psi_alpha(b, beta));
  }
  return {ext, pos, mono};
}

// Projection onto K^alpha: feasibility of the output and the variational
// inequality <q - P q, y - P q> <= tol against a pool of random feasible y.
inline std::vector<SuiteResult> projection_suite(int columns, int projections, int pool, std::uint64_t seed,
                                                 double tol = 1e-8) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SuiteResult feas = suite("projection feasible"), vi = suite("projection variational inequality");
  feas.tol = vi.tol = tol;
  for (int k = 0; k < projections; ++k) {
    const double alpha = k % 4 == 0 ? 0.0 : unit(rng);
    const SubsetFamily family(columns, alpha);
    const DualMatrix q = detail::random_matrix(rng, columns, 1.5);
    const DualMatrix pq = project_K_alpha(q, alpha, 100000, 1e-13);
    detail::record(feas, std::max(0.0, k_alpha_violation(pq, family)));
    for (int m = 0; m < pool; ++m) {
      const DualMatrix y = detail::random_feasible(rng, family);
      double s = 0.0;
      for (int j = 0; j < columns; ++j) s += dot({q[j][0] - pq[j][0], q[j][1] - pq[j][1]}, {y[j][0] - pq[j][0], y[j][1] - pq[j][1]});
      detail::record(vi, s);
    }
  }
  return {feas, vi};
}

// Envelope Phi** against its own decomposition bound, the matrix sandwich
// Phi** <= sum |p_i| <= n^(1-alpha) Phi**, 1-homogeneity, subadditivity,
// and the rank-one binary values m^alpha.
inline std::vector<SuiteResult> envelope_suite(int max_columns, int samples, std::uint64_t seed,
                                               double tol = 1e-6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SuiteResult bracket = suite("envelope value vs decomposition bound"), sandwich = suite("envelope matrix sandwich"),
      homog = suite("envelope 1-homogeneous"), subadd = suite("envelope subadditive"), binary = suite("envelope on rank-one binary input");
  bracket.tol = sandwich.tol = homog.tol = subadd.tol = binary.tol = tol;
  EnvelopeOptions eo;
  eo.tol = tol;
  for (int k = 0; k < samples; ++k) {
    const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_columns));
    const double alpha = k % 5 == 0 ? 0.0 : (k % 5 == 1 ? 1.0 : unit(rng));
    const PrimalMatrix p = detail::random_matrix(rng, n, 1.0);
    const double scale = std::max(1.0, p.column_norm_sum());
    const EnvelopeValue v = phi_double_star(p, alpha, eo);
    detail::record(bracket, std::abs(v.value - v.upper) / scale);

    const double sum = p.column_norm_sum();
    detail::record(sandwich, std::max(v.lower - sum, sum - std::pow(n, 1.0 - alpha) * v.upper) / scale);

    const double lambda = 0.1 + 4.0 * unit(rng);
    PrimalMatrix ps = p;
    for (auto& c : ps.cols) c = {c[0] * lambda, c[1] * lambda};
    const EnvelopeValue vs = phi_double_star(ps, alpha, eo);
    detail::record(homog, std::abs(vs.value - lambda * v.value) / (lambda * scale));

    const PrimalMatrix r = detail::random_matrix(rng, n, 1.0);
    PrimalMatrix pr = p;
    for (int j = 0; j < n; ++j) pr[j] = {p[j][0] + r[j][0], p[j][1] + r[j][1]};
    const EnvelopeValue vr = phi_double_star(r, alpha, eo), vpr = phi_double_star(pr, alpha, eo);
    // lower bound of the sum against upper bounds of the parts
    detail::record(subadd, (vpr.lower - v.upper - vr.upper) / std::max(1.0, pr.column_norm_sum()));

    const double angle = 2.0 * std::numbers::pi * unit(rng);
    PrimalMatrix b(n);
    int m = 0;
    for (int j = 0; j < n; ++j)
      if (unit(rng) < 0.6 || (j == n - 1 && m == 0)) {
        b[j] = {std::cos(angle), std::sin(angle)};
        ++m;
      }
    detail::record(binary, std::abs(phi_double_star(b, alpha, eo).value - std::pow(m, alpha)) / std::max(1.0, double(m)));
  }
  return {bracket, sandwich, homog, subadd, binary};
}

// Triangle with P1 = (x1, 0), P2 = (x2, 0), P3 = (0, x3) drawn under the
// stated inequalities x1 < 0, x1 < x2, x3 > 0.
struct TriangleCoords {
  double x1, x2, x3;
};

inline TriangleCoords random_admissible_triangle(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double x1 = -(0.1 + 1.9 * unit(rng));
  const double x2 = x1 + 0.1 + (2.0 - x1) * unit(rng);
  const double x3 = 0.1 + 1.9 * unit(rng);
  return {x1, x2, x3};
}

inline TriangleCoords random_isosceles_triangle(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double half = 0.1 + 1.9 * unit(rng);
  return {-half, half, 0.1 + 1.9 * unit(rng)};
}

inline CalibrationReport check_triangle_calibration(const TriangleCoords& c, double tol) {
  return verify_calibration(build_triangle_calibration(c.x1, c.x2, c.x3), build_triangle_lambda(c.x1, c.x2, c.x3), tol);
}

// Relaxation comparison between a convex cost and a phase-field length:
//   convex <= length <= (N-1)^(1-alpha) convex,
// with an optional relative slack on both sides. For N = 2 or alpha = 1 the
// two bounds coincide, so with zero slack only an exact pair of solvers
// passes.
struct SandwichCheck {
  double lower = 0.0, value = 0.0, upper = 0.0;
  double slack = 0.0;
  bool passed() const { return lower * (1.0 - slack) <= value && value <= upper * (1.0 + slack); }
  // relative amount by which the worse side is violated, <= 0 when it holds
  double excess() const { return std::max(lower - value, value - upper) / std::max(lower, 1e-300); }
};

inline SandwichCheck sandwich_check(double convex_cost, double phase_length, int components, double alpha,
                                    double slack = 0.0) {
  return {convex_cost, phase_length, std::pow(static_cast<double>(components), 1.0 - alpha) * convex_cost, slack};
}

inline std::string describe(const SuiteResult& r) {
  std::ostringstream out;
  out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.cases << " cases, worst " << r.worst << ", tol " << r.tol
      << ")";
  if (!r.detail.empty()) out << " " << r.detail;
  return out.str();
}

}  // namespace steiner
