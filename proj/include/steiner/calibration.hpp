#pragma once

// Piecewise-constant matrix-valued 1-forms and the three conditions that
// make such a form a calibration of a weighted graph:
//   closedness, dual norm <= 1, and <omega, tau (x) g> = |g|_inf on the graph.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "steiner/errors.hpp"
#include "steiner/geometry.hpp"
#include "steiner/norms.hpp"

namespace steiner {

// An oriented line through `origin` with unit direction `dir`; the plane is
// split into the part on its left and the part on its right. Columns of the
// matrices are the 1-forms omega_j written as (dx, dy) coefficients.
struct PiecewiseConstantForm {
  Point2 origin;
  Vec2 dir{0.0, 1.0};
  Mat2xN left;
  Mat2xN right;

  int columns() const { return left.n(); }

  // > 0 on the left of the line, < 0 on the right.
  double side(Point2 p) const { return dir[0] * (p.y - origin.y) - dir[1] * (p.x - origin.x); }

  const Mat2xN& at(Point2 p) const { return side(p) >= 0.0 ? left : right; }
};

struct WeightedSegment {
  Point2 a, b;  // oriented from a to b
  WeightVector g;

  Vec2 tau() const {
    const double len = length();
    return {(b.x - a.x) / len, (b.y - a.y) / len};
  }
  double length() const { return std::hypot(b.x - a.x, b.y - a.y); }
};

struct GraphMeasure {
  std::vector<WeightedSegment> segments;
};

// <omega, tau (x) g> = sum_j g_j tau . omega_j
inline double form_pairing(const Mat2xN& omega, const Vec2& tau, const WeightVector& g) {
  double s = 0.0;
  for (int j = 0; j < omega.n(); ++j) s += g[j] * dot(tau, omega[j]);
  return s;
}

// sup { tau^T omega g : |tau| = 1, |g|_inf <= 1 }. The inner sup is |omega g|,
// a convex function of g, so the outer max is attained at a cube vertex.
inline double dual_norm(const Mat2xN& omega) {
  const int n = omega.n();
  if (n > kMaxSubsetColumns) throw ContractViolation("dual norm enumeration limited to 20 columns");
  double best = 0.0;
  // g and -g give the same value, so fix the sign of the first entry
  const std::uint32_t count = n == 0 ? 0u : 1u << (n - 1);
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    Vec2 v = omega[0];
    for (int j = 1; j < n; ++j) {
      const double s = (mask >> (j - 1) & 1u) ? -1.0 : 1.0;
      v[0] += s * omega[j][0];
      v[1] += s * omega[j][1];
    }
    best = std::max(best, norm(v));
  }
  return best;
}

namespace detail {

inline void require_triangle(double x1, double x2, double x3) {
  if (!(std::isfinite(x1) && std::isfinite(x2) && std::isfinite(x3)))
    throw DomainError("triangle coordinates must be finite");
  if (!(x3 > 0.0)) throw DomainError("need x3 > 0 (degenerate triangle)");
  if (!(x1 < 0.0) || !(x1 < x2)) throw DomainError("need x1 < 0 and x1 < x2");
}

}  // namespace detail

// Triangle P1 = (x1, 0), P2 = (x2, 0), P3 = (0, x3). The separating line runs
// along the bisector of the angle at P3, oriented from P3 into the triangle.
// The form built from a = |P1 - P3| lies on the left of that line, the one
// built from b = |P2 - P3| on the right:
//   omega_1 = [(x1 + a) dx + x3 dy] / 2a,  omega_2 = [(x1 - a) dx + x3 dy] / 2a   (left)
//   omega_1 = [(x2 + b) dx + x3 dy] / 2b,  omega_2 = [(x2 - b) dx + x3 dy] / 2b   (right)
inline PiecewiseConstantForm build_triangle_calibration(double x1, double x2, double x3) {
  detail::require_triangle(x1, x2, x3);
  const double a = std::hypot(x1, x3);
  const double b = std::hypot(x2, x3);
  // unit vectors from P3 to P1 and to P2; their sum bisects the angle
  const Vec2 u1{x1 / a, -x3 / a};
  const Vec2 u2{x2 / b, -x3 / b};
  Vec2 bis{u1[0] + u2[0], u1[1] + u2[1]};
  const double len = norm(bis);
  bis = {bis[0] / len, bis[1] / len};

  PiecewiseConstantForm form;
  form.origin = {0.0, x3};
  form.dir = bis;
  form.left = Mat2xN(std::vector<Vec2>{{(x1 + a) / (2 * a), x3 / (2 * a)}, {(x1 - a) / (2 * a), x3 / (2 * a)}});
  form.right = Mat2xN(std::vector<Vec2>{{(x2 + b) / (2 * b), x3 / (2 * b)}, {(x2 - b) / (2 * b), x3 / (2 * b)}});
  return form;
}

// The measure supported on the whole triangle with the global orientation
// P1 -> P2, P2 -> P3, P1 -> P3.
inline GraphMeasure build_triangle_lambda(double x1, double x2, double x3) {
  detail::require_triangle(x1, x2, x3);
  const Point2 p1{x1, 0.0}, p2{x2, 0.0}, p3{0.0, x3};
  GraphMeasure m;
  m.segments.push_back({p1, p2, {0.5, -0.5}});
  m.segments.push_back({p2, p3, {0.5, 0.5}});
  m.segments.push_back({p1, p3, {0.5, 0.5}});
  return m;
}

struct CalibrationCheck {
  std::string name;
  double value = 0.0;   // worst observed quantity
  double margin = 0.0;  // >= 0 means the condition holds
  bool passed() const { return margin >= 0.0; }
};

struct CalibrationReport {
  CalibrationCheck closedness{"closedness"};
  CalibrationCheck dual_norm{"dual norm"};
  CalibrationCheck pairing{"pairing"};
  double integrated_pairing = 0.0;  // sum_segments length * <omega, tau (x) g>
  double integrated_mass = 0.0;     // sum_segments length * |g|_inf

  bool passed() const { return closedness.passed() && dual_norm.passed() && pairing.passed(); }
};

inline CalibrationReport verify_calibration(const PiecewiseConstantForm& form, const GraphMeasure& lambda, double tol) {
  const int n = form.columns();
  if (form.right.n() != n) throw ContractViolation("form regions disagree on the number of columns");
  CalibrationReport rep;

  // (1) a piecewise-constant form is closed iff the tangential components
  // along the interface agree
  double jump = 0.0;
  for (int j = 0; j < n; ++j) jump = std::max(jump, std::abs(dot(form.left[j], form.dir) - dot(form.right[j], form.dir)));
  rep.closedness.value = jump;
  rep.closedness.margin = tol - jump;

  // (2) dual norm on both regions
  const double dn = std::max(dual_norm(form.left), dual_norm(form.right));
  rep.dual_norm.value = dn;
  rep.dual_norm.margin = 1.0 + tol - dn;

  // (3) pointwise pairing on every segment, split where it crosses the line
  double worst = 0.0;
  for (const auto& seg : lambda.segments) {
    if (static_cast<int>(seg.g.size()) != n) throw ContractViolation("weight vector has the wrong length");
    const Vec2 tau = seg.tau();
    double ginf = 0.0;
    for (double v : seg.g) ginf = std::max(ginf, std::abs(v));
    const double sa = form.side(seg.a), sb = form.side(seg.b);
    std::vector<std::pair<const Mat2xN*, double>> pieces;  // region, length
    const double len = seg.length();
    if (sa == 0.0 && sb == 0.0) {
      pieces.push_back({&form.left, len});
      pieces.push_back({&form.right, len});
    } else if (sa * sb >= 0.0) {
      pieces.push_back({(sa + sb) >= 0.0 ? &form.left : &form.right, len});
    } else {
      const double s = sa / (sa - sb);
      pieces.push_back({sa > 0.0 ? &form.left : &form.right, s * len});
      pieces.push_back({sb > 0.0 ? &form.left : &form.right, (1.0 - s) * len});
    }
    double along = 0.0;
    for (const auto& [omega, l] : pieces) {
      const double v = form_pairing(*omega, tau, seg.g);
      worst = std::max(worst, std::abs(v - ginf));
      along += l * v;
    }
    if (sa == 0.0 && sb == 0.0) along *= 0.5;
    rep.integrated_pairing += along;
    rep.integrated_mass += len * ginf;
  }
  rep.pairing.value = worst;
  rep.pairing.margin = tol - worst;
  return rep;
}

}  // namespace steiner
