#pragma once

// Multiplicity norms and the constraint set
//   K^alpha = { q in R^{2 x n} : |sum_{j in J} q_j| <= |J|^alpha for all J },
// its Euclidean projection, and the support function of K^alpha (the convex
// envelope used by the relaxed functional).

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "steiner/errors.hpp"

namespace steiner {

inline constexpr int kMaxSubsetColumns = 20;

using Vec2 = std::array<double, 2>;
using WeightVector = std::vector<double>;

inline double norm(const Vec2& v) { return std::hypot(v[0], v[1]); }
inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

// 2 x n matrix stored column-wise.
struct Mat2xN {
  std::vector<Vec2> cols;

  Mat2xN() = default;
  explicit Mat2xN(int n) : cols(n, Vec2{0.0, 0.0}) {}
  explicit Mat2xN(std::vector<Vec2> c) : cols(std::move(c)) {}

  int n() const { return static_cast<int>(cols.size()); }
  Vec2& operator[](int j) { return cols[j]; }
  const Vec2& operator[](int j) const { return cols[j]; }

  double frobenius() const {
    double s = 0.0;
    for (const auto& c : cols) s += c[0] * c[0] + c[1] * c[1];
    return std::sqrt(s);
  }
  double column_norm_sum() const {
    double s = 0.0;
    for (const auto& c : cols) s += norm(c);
    return s;
  }
};

using DualMatrix = Mat2xN;
using PrimalMatrix = Mat2xN;

inline double pairing(const Mat2xN& p, const Mat2xN& q) {
  double s = 0.0;
  for (int j = 0; j < p.n(); ++j) s += dot(p[j], q[j]);
  return s;
}

inline void require_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0,1]");
}

// l^{1/alpha} norm, l^infinity for alpha = 0.
inline double psi_alpha(const WeightVector& g, double alpha) {
  require_alpha(alpha);
  double m = 0.0;
  for (double v : g) m = std::max(m, std::abs(v));
  if (alpha == 0.0 || m == 0.0) return m;
  const double p = 1.0 / alpha;
  double s = 0.0;
  for (double v : g) s += std::pow(std::abs(v) / m, p);
  return m * std::pow(s, alpha);
}

// |g^+|_{1/alpha} + |g^-|_{1/alpha}; for alpha = 0, sup g_i^+ - inf g_i^-.
inline double psi_star(const WeightVector& g, double alpha) {
  WeightVector pos(g.size()), neg(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    pos[i] = std::max(g[i], 0.0);
    neg[i] = std::min(g[i], 0.0);
  }
  return psi_alpha(pos, alpha) + psi_alpha(neg, alpha);
}

// Enumerates the nonempty column subsets J (as bit masks) with radius |J|^alpha.
class SubsetFamily {
 public:
  SubsetFamily(int n, double alpha) : n_(n) {
    require_alpha(alpha);
    if (n < 1) throw ContractViolation("need at least one column");
    if (n > kMaxSubsetColumns)
      throw ContractViolation("subset enumeration limited to " + std::to_string(kMaxSubsetColumns) + " columns");
    const std::uint32_t count = (1u << n) - 1u;
    radius_.resize(count + 1, 0.0);
    for (std::uint32_t J = 1; J <= count; ++J) radius_[J] = std::pow(static_cast<double>(std::popcount(J)), alpha);
  }

  int columns() const { return n_; }
  std::uint32_t last() const { return (1u << n_) - 1u; }
  double radius(std::uint32_t J) const { return radius_[J]; }

  // sum_{j in J} q_j for every J, by adding the lowest column to the sum of the rest.
  std::vector<Vec2> subset_sums(const Mat2xN& q) const {
    std::vector<Vec2> sums(last() + 1, Vec2{0.0, 0.0});
    for (std::uint32_t J = 1; J <= last(); ++J) {
      const int low = std::countr_zero(J);
      const Vec2& prev = sums[J & (J - 1)];
      sums[J] = {prev[0] + q[low][0], prev[1] + q[low][1]};
    }
    return sums;
  }

 private:
  int n_;
  std::vector<double> radius_;
};

// Largest violation max_J (|sum_J q_j| - |J|^alpha), or a nonpositive slack.
inline double k_alpha_violation(const DualMatrix& q, const SubsetFamily& family) {
  const auto sums = family.subset_sums(q);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::uint32_t J = 1; J <= family.last(); ++J) worst = std::max(worst, norm(sums[J]) - family.radius(J));
  return worst;
}

inline bool in_K_alpha(const DualMatrix& q, double alpha, double tol) {
  const SubsetFamily family(q.n(), alpha);
  return k_alpha_violation(q, family) <= tol;
}

struct ProjectionOptions {
  int max_iter = 10000;  // sweeps over all subset constraints
  double tol = 1e-10;    // Euclidean norm of the per-sweep increment
  // Stop silently after max_iter sweeps. Used inside outer iterations that
  // keep the corrections and resume the projection on the next call.
  bool partial = false;
};

struct ProjectionStats {
  int sweeps = 0;
  double increment = 0.0;
};

// Dykstra's algorithm for the projection onto K^alpha, written as cyclic
// block ascent on the dual: every subset J keeps a correction vector c_J
// applied to each column j in J, and the current iterate is
// x = q - sum_J c_J 1_J. Any starting corrections are valid, which is what
// allows warm starts across calls with nearby inputs.
class KAlphaProjector {
 public:
  KAlphaProjector(int n, double alpha) : family_(n, alpha) {}

  const SubsetFamily& family() const { return family_; }
  std::size_t correction_size() const { return family_.last() + 1; }

  // Projects q in place. `corrections` has correction_size() entries (index 0
  // unused); it is read as a warm start and left holding the final values.
  ProjectionStats project(DualMatrix& q, std::vector<Vec2>& corrections, const ProjectionOptions& opt) const {
    const int n = family_.columns();
    if (q.n() != n) throw ContractViolation("projection input has the wrong number of columns");
    if (corrections.size() != correction_size()) corrections.assign(correction_size(), Vec2{0.0, 0.0});
    for (std::uint32_t J = 1; J <= family_.last(); ++J) {
      const Vec2 c = corrections[J];
      if (c[0] == 0.0 && c[1] == 0.0) continue;
      for (std::uint32_t rest = J; rest; rest &= rest - 1) {
        const int j = std::countr_zero(rest);
        q[j][0] -= c[0];
        q[j][1] -= c[1];
      }
    }
    ProjectionStats stats;
    for (stats.sweeps = 1; stats.sweeps <= opt.max_iter; ++stats.sweeps) {
      double inc2 = 0.0;
      for (std::uint32_t J = 1; J <= family_.last(); ++J) {
        const Vec2 old = corrections[J];
        const double k = std::popcount(J);
        Vec2 s{0.0, 0.0};
        for (std::uint32_t rest = J; rest; rest &= rest - 1) {
          const int j = std::countr_zero(rest);
          s[0] += q[j][0];
          s[1] += q[j][1];
        }
        // sum of the columns with this subset's own correction added back
        s[0] += k * old[0];
        s[1] += k * old[1];
        const double len = norm(s);
        const double r = family_.radius(J);
        Vec2 fresh{0.0, 0.0};
        if (len > r) {
          const double f = (len - r) / (k * len);
          fresh = {f * s[0], f * s[1]};
        }
        const Vec2 d{fresh[0] - old[0], fresh[1] - old[1]};
        if (d[0] != 0.0 || d[1] != 0.0) {
          for (std::uint32_t rest = J; rest; rest &= rest - 1) {
            const int j = std::countr_zero(rest);
            q[j][0] -= d[0];
            q[j][1] -= d[1];
          }
          corrections[J] = fresh;
          inc2 += k * (d[0] * d[0] + d[1] * d[1]);
        }
      }
      stats.increment = std::sqrt(inc2);
      if (stats.increment <= opt.tol) return stats;
    }
    if (opt.partial) return stats;
    throw IterationLimitError("projection onto K^alpha did not converge", stats.increment);
  }

 private:
  SubsetFamily family_;
};

inline DualMatrix project_K_alpha(const DualMatrix& q, double alpha, int max_iter = 10000, double tol = 1e-10) {
  const KAlphaProjector proj(q.n(), alpha);
  DualMatrix out = q;
  std::vector<Vec2> corrections;
  proj.project(out, corrections, {max_iter, tol});
  return out;
}

struct EnvelopeOptions {
  double tol = 1e-6;  // bracket width, relative to max(1, sum_i |p_i|)
  int max_iter = 2000;  // Newton steps
};

struct EnvelopeValue {
  double value = 0.0;  // midpoint of the bracket
  double lower = 0.0;  // <p, q> for a q in K^alpha
  double upper = 0.0;  // cost of an exact decomposition p_i = sum_{J ni i} psi_J
  int iterations = 0;
  DualMatrix maximizer;             // the feasible q behind `lower`
  std::vector<Vec2> decomposition;  // psi_J behind `upper`, indexed by mask
};

namespace detail {

// Decomposition cost after repairing the singleton blocks so that the
// constraints p_i = sum_{J ni i} psi_J hold exactly.
inline double repaired_decomposition(const PrimalMatrix& p, const SubsetFamily& family, std::vector<Vec2>& psi) {
  const int n = family.columns();
  for (int i = 0; i < n; ++i) {
    Vec2 rest{0.0, 0.0};
    for (std::uint32_t J = 1; J <= family.last(); ++J) {
      if (!(J >> i & 1u) || J == (1u << i)) continue;
      rest[0] += psi[J][0];
      rest[1] += psi[J][1];
    }
    psi[1u << i] = {p[i][0] - rest[0], p[i][1] - rest[1]};
  }
  double cost = 0.0;
  for (std::uint32_t J = 1; J <= family.last(); ++J) cost += family.radius(J) * norm(psi[J]);
  return cost;
}

}  // namespace detail

// Scales q into K^alpha along the ray through the origin.
inline DualMatrix shrink_into_K(const DualMatrix& q, const SubsetFamily& family) {
  const auto sums = family.subset_sums(q);
  double gauge = 1.0;
  for (std::uint32_t J = 1; J <= family.last(); ++J) gauge = std::max(gauge, norm(sums[J]) / family.radius(J));
  DualMatrix out = q;
  if (gauge > 1.0)
    for (auto& c : out.cols) c = {c[0] / gauge, c[1] / gauge};
  return out;
}

// Support function of K^alpha at p, evaluated with a certified bracket by a
// log-barrier interior-point method on
//   max <p, q>  s.t.  |sum_{j in J} q_j|^2 <= |J|^{2 alpha}.
// Every iterate is strictly feasible, which gives the lower bound <p, q>. On
// the central path the barrier multipliers lambda_J = 1 / (t d_J) define a
// decomposition psi_J = 2 lambda_J sum_J q_j of p, which after repairing the
// singleton blocks is exact and gives the upper bound.
inline EnvelopeValue phi_double_star(const PrimalMatrix& p, double alpha, const EnvelopeOptions& opt = {},
                                     const DualMatrix* hint = nullptr) {
  require_alpha(alpha);
  const int n = p.n();
  EnvelopeValue out;
  const double scale = p.column_norm_sum();
  if (scale == 0.0) {
    out.maximizer = DualMatrix(n);
    return out;
  }
  if (n == 1 || alpha == 1.0) {
    // K^alpha is a product of unit balls: every larger subset constraint is
    // implied by the triangle inequality.
    out.value = out.lower = out.upper = scale;
    out.maximizer = DualMatrix(n);
    for (int j = 0; j < n; ++j) {
      const double len = norm(p[j]);
      if (len > 0) out.maximizer[j] = {p[j][0] / len, p[j][1] / len};
    }
    const SubsetFamily family(n, alpha);
    out.decomposition.assign(family.last() + 1, Vec2{0.0, 0.0});
    for (int j = 0; j < n; ++j) out.decomposition[1u << j] = p[j];
    return out;
  }
  const SubsetFamily family(n, alpha);
  const std::uint32_t last = family.last();
  const int dim = 2 * n;
  // work on p / scale so the tolerance is scale free
  PrimalMatrix pn = p;
  for (auto& c : pn.cols) c = {c[0] / scale, c[1] / scale};
  const double width_target = opt.tol * std::max(1.0, scale) / scale;

  double lower = 0.0, upper = std::numeric_limits<double>::infinity();
  DualMatrix q(n), q_best(n);
  std::vector<Vec2> psi_best;
  if (hint && hint->n() == n) {
    q_best = shrink_into_K(*hint, family);
    lower = std::max(0.0, pairing(pn, q_best));
  }

  std::vector<double> d(last + 1);
  Eigen::MatrixXd H(dim, dim);
  Eigen::VectorXd g(dim), step(dim);
  auto barrier = [&](const DualMatrix& x, double t, bool& inside) {
    const auto sums = family.subset_sums(x);
    double f = -t * pairing(pn, x);
    inside = true;
    for (std::uint32_t J = 1; J <= last; ++J) {
      const double r = family.radius(J);
      const double dj = r * r - dot(sums[J], sums[J]);
      if (!(dj > 0.0)) {
        inside = false;
        return 0.0;
      }
      f -= std::log(dj);
    }
    return f;
  };

  double t = 1.0;
  int newton = 0;
  bool stalled = false;
  // t grows by 8 per stage; 40 stages reach far past double resolution
  for (int stage = 0; stage < 40 && newton < opt.max_iter; ++stage) {
    // centering by damped Newton steps
    for (int inner = 0; inner < 100 && newton < opt.max_iter; ++inner, ++newton) {
      const auto sums = family.subset_sums(q);
      H.setZero();
      for (int i = 0; i < n; ++i) {
        g(2 * i) = -t * pn[i][0];
        g(2 * i + 1) = -t * pn[i][1];
      }
      for (std::uint32_t J = 1; J <= last; ++J) {
        const double r = family.radius(J);
        d[J] = r * r - dot(sums[J], sums[J]);
        const Vec2& s = sums[J];
        const double a = 2.0 / d[J];
        const double b = 4.0 / (d[J] * d[J]);
        const double blk[2][2] = {{a + b * s[0] * s[0], b * s[0] * s[1]}, {b * s[1] * s[0], a + b * s[1] * s[1]}};
        for (std::uint32_t ri = J; ri; ri &= ri - 1) {
          const int i = std::countr_zero(ri);
          g(2 * i) += a * s[0];
          g(2 * i + 1) += a * s[1];
          for (std::uint32_t rk = J; rk; rk &= rk - 1) {
            const int k = std::countr_zero(rk);
            for (int u = 0; u < 2; ++u)
              for (int v = 0; v < 2; ++v) H(2 * i + u, 2 * k + v) += blk[u][v];
          }
        }
      }
      const Eigen::LLT<Eigen::MatrixXd> llt(H);
      if (llt.info() != Eigen::Success) {
        stalled = true;
        break;
      }
      step = -llt.solve(g);
      const double decrement2 = -g.dot(step);
      if (decrement2 <= 1e-18) break;
      bool inside = false;
      const double f0 = barrier(q, t, inside);
      double len = 1.0;
      bool accepted = false;
      DualMatrix trial(n);
      for (int bt = 0; bt < 60 && !accepted; ++bt, len *= 0.5) {
        for (int i = 0; i < n; ++i) trial[i] = {q[i][0] + len * step(2 * i), q[i][1] + len * step(2 * i + 1)};
        const double f1 = barrier(trial, t, inside);
        accepted = inside && f1 <= f0 - 0.25 * len * decrement2;
      }
      if (!accepted) {
        // the barrier is no longer resolved in double precision
        stalled = true;
        break;
      }
      q = trial;
      if (decrement2 <= 1e-12) break;
    }
    // bounds at the current centered point
    const double lb = pairing(pn, q);
    if (lb > lower) {
      lower = lb;
      q_best = q;
    }
    const auto sums = family.subset_sums(q);
    std::vector<Vec2> psi(last + 1, Vec2{0.0, 0.0});
    for (std::uint32_t J = 1; J <= last; ++J) {
      const double r = family.radius(J);
      const double lam = 2.0 / (t * (r * r - dot(sums[J], sums[J])));
      psi[J] = {lam * sums[J][0], lam * sums[J][1]};
    }
    const double ub = detail::repaired_decomposition(pn, family, psi);
    if (ub < upper) {
      upper = ub;
      psi_best = std::move(psi);
    }
    out.iterations = newton;
    if (upper - lower <= width_target || stalled) break;
    t *= 8.0;
  }
  out.lower = lower * scale;
  out.upper = upper * scale;
  out.value = 0.5 * (out.lower + out.upper);
  out.maximizer = q_best;
  out.decomposition = std::move(psi_best);
  for (auto& v : out.decomposition) v = {v[0] * scale, v[1] * scale};
  if (out.upper - out.lower > opt.tol * std::max(1.0, scale))
    throw AccuracyError("support function bracket did not close", out.lower, out.upper);
  return out;
}

}  // namespace steiner
