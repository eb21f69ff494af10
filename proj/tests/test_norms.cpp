#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "steiner/norms.hpp"

using namespace steiner;

namespace {

Mat2xN mat(std::vector<Vec2> c) { return Mat2xN(std::move(c)); }

// Weighted Fermat-Weber point of anchors a_k with weights w_k, by Weiszfeld
// with the anchor test for the non-smooth case.
double fermat_weber(const std::vector<Vec2>& a, const std::vector<double>& w) {
  auto cost = [&](const Vec2& x) {
    double c = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) c += w[k] * std::hypot(x[0] - a[k][0], x[1] - a[k][1]);
    return c;
  };
  double best = 1e300;
  for (std::size_t j = 0; j < a.size(); ++j) best = std::min(best, cost(a[j]));
  Vec2 x{0.0, 0.0};
  double ws = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    x[0] += w[k] * a[k][0];
    x[1] += w[k] * a[k][1];
    ws += w[k];
  }
  x = {x[0] / ws, x[1] / ws};
  for (int it = 0; it < 20000; ++it) {
    double sx = 0.0, sy = 0.0, sw = 0.0;
    bool hit = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = std::hypot(x[0] - a[k][0], x[1] - a[k][1]);
      if (d < 1e-14) {
        hit = true;
        break;
      }
      sx += w[k] * a[k][0] / d;
      sy += w[k] * a[k][1] / d;
      sw += w[k] / d;
    }
    if (hit) break;
    x = {sx / sw, sy / sw};
  }
  return std::min(best, cost(x));
}

}  // namespace

TEST(WeightNorms, Examples) {
  const WeightVector g{1.0, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(psi_alpha(g, 0.0), 1.0);
  EXPECT_NEAR(psi_alpha(g, 0.5), std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(psi_alpha(g, 1.0), 2.0);
  EXPECT_NEAR(psi_alpha({3.0, 4.0}, 0.5), 5.0, 1e-14);
  // signed weights split into positive and negative parts
  EXPECT_NEAR(psi_star({1.0, -1.0}, 0.0), 2.0, 1e-15);
  EXPECT_NEAR(psi_star({1.0, 1.0, -2.0}, 0.0), 3.0, 1e-15);
  EXPECT_THROW(psi_alpha(g, -0.1), DomainError);
  EXPECT_THROW(psi_alpha(g, 1.5), DomainError);
}

TEST(SubsetFamily, RadiiAndSums) {
  const SubsetFamily f(3, 0.5);
  EXPECT_EQ(f.last(), 7u);
  EXPECT_DOUBLE_EQ(f.radius(1), 1.0);
  EXPECT_NEAR(f.radius(7), std::sqrt(3.0), 1e-15);
  const auto sums = f.subset_sums(mat({{1, 0}, {0, 2}, {3, 3}}));
  EXPECT_DOUBLE_EQ(sums[5][0], 4.0);
  EXPECT_DOUBLE_EQ(sums[5][1], 3.0);
  EXPECT_DOUBLE_EQ(sums[6][1], 5.0);
  EXPECT_THROW(SubsetFamily(0, 0.0), ContractViolation);
  EXPECT_THROW(SubsetFamily(21, 0.0), ContractViolation);
}

TEST(KAlpha, Membership) {
  EXPECT_TRUE(in_K_alpha(mat({{1, 0}, {-1, 0}}), 0.0, 1e-12));
  EXPECT_FALSE(in_K_alpha(mat({{1, 0}, {0.1, 0}}), 0.0, 1e-12));
  EXPECT_TRUE(in_K_alpha(mat({{1, 0}, {0.1, 0}}), 0.5, 1e-12));
}

TEST(Projection, ClosedForms) {
  // already feasible
  const auto inside = mat({{0.3, 0.1}, {-0.2, 0.4}});
  const auto p0 = project_K_alpha(inside, 0.0);
  for (int j = 0; j < 2; ++j) {
    EXPECT_DOUBLE_EQ(p0[j][0], inside[j][0]);
    EXPECT_DOUBLE_EQ(p0[j][1], inside[j][1]);
  }
  // only the first disk is active
  const auto p1 = project_K_alpha(mat({{3, 0}, {0, 0}}), 0.0, 100000, 1e-14);
  EXPECT_NEAR(p1[0][0], 1.0, 1e-9);
  EXPECT_NEAR(p1[1][0], 0.0, 1e-9);
  // only the pair constraint is active: the excess is split evenly
  const auto p2 = project_K_alpha(mat({{1, 0}, {1, 0}}), 0.0, 100000, 1e-14);
  EXPECT_NEAR(p2[0][0], 0.5, 1e-9);
  EXPECT_NEAR(p2[1][0], 0.5, 1e-9);
  // alpha = 1 is a product of disks
  const auto p3 = project_K_alpha(mat({{0, 2}, {0, 3}}), 1.0, 100000, 1e-14);
  EXPECT_NEAR(p3[0][1], 1.0, 1e-9);
  EXPECT_NEAR(p3[1][1], 1.0, 1e-9);
}

// KKT: q - P q is a nonnegative combination of the outward normals of the
// active constraints, checked by least squares over the active set.
TEST(Projection, KktOnRandomInputs) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss(0.0, 1.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 3;
    const double alpha = unit(rng);
    const SubsetFamily f(n, alpha);
    Mat2xN q(n);
    for (auto& c : q.cols) c = {gauss(rng), gauss(rng)};
    const auto x = project_K_alpha(q, alpha, 200000, 1e-14);
    ASSERT_LE(k_alpha_violation(x, f), 1e-9);
    const auto sums = f.subset_sums(x);
    std::vector<std::uint32_t> active;
    for (std::uint32_t J = 1; J <= f.last(); ++J)
      if (norm(sums[J]) >= f.radius(J) - 1e-7) active.push_back(J);
    Eigen::MatrixXd A(2 * n, active.size());
    Eigen::VectorXd b(2 * n);
    for (int j = 0; j < n; ++j) {
      b[2 * j] = q[j][0] - x[j][0];
      b[2 * j + 1] = q[j][1] - x[j][1];
    }
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::uint32_t J = active[k];
      const double len = norm(sums[J]);
      for (int j = 0; j < n; ++j) {
        const bool in = J >> j & 1u;
        A(2 * j, k) = in ? sums[J][0] / len : 0.0;
        A(2 * j + 1, k) = in ? sums[J][1] / len : 0.0;
      }
    }
    if (active.empty()) {
      EXPECT_LT(b.norm(), 1e-9);
      continue;
    }
    const Eigen::VectorXd lambda = A.completeOrthogonalDecomposition().solve(b);
    EXPECT_LT((A * lambda - b).norm(), 1e-6 * std::max(1.0, b.norm())) << "trial " << trial;
    // with linearly independent normals the multipliers are unique and must be >= 0
    if (Eigen::FullPivLU<Eigen::MatrixXd>(A).rank() == static_cast<int>(active.size())) {
      EXPECT_GE(lambda.minCoeff(), -1e-6) << "trial " << trial;
    }
  }
}

TEST(Projection, WarmStartedProjectorMatches) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const KAlphaProjector proj(4, 0.3);
  std::vector<Vec2> corr(proj.correction_size(), Vec2{0.0, 0.0});
  Mat2xN q(4);
  for (auto& c : q.cols) c = {gauss(rng), gauss(rng)};
  Mat2xN a = q;
  ProjectionOptions opt{100000, 1e-14, false};
  proj.project(a, corr, opt);
  const auto b = project_K_alpha(q, 0.3, 100000, 1e-14);
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(a[j][0], b[j][0], 1e-8);
    EXPECT_NEAR(a[j][1], b[j][1], 1e-8);
  }
}

TEST(Envelope, EqualColumns) {
  const auto p = mat({{0.6, 0.8}, {0.6, 0.8}});
  EXPECT_NEAR(phi_double_star(p, 0.0).value, 1.0, 1e-6);
  EXPECT_NEAR(phi_double_star(p, 0.5).value, std::sqrt(2.0), 1e-6);
  EXPECT_NEAR(phi_double_star(p, 1.0).value, 2.0, 1e-12);
  // opposite columns cannot share a block
  EXPECT_NEAR(phi_double_star(mat({{1, 0}, {-1, 0}}), 0.0).value, 2.0, 1e-6);
  EXPECT_DOUBLE_EQ(phi_double_star(Mat2xN(3), 0.2).value, 0.0);
}

// Two columns: Phi** is the weighted Fermat-Weber cost with anchors p_1,
// p_2, 0 and weights 1, 1, 2^alpha (psi_12 is the free point).
TEST(Envelope, TwoColumnsAgainstFermatWeber) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const double alpha = trial % 10 == 0 ? 0.0 : unit(rng);
    const auto p = mat({{gauss(rng), gauss(rng)}, {gauss(rng), gauss(rng)}});
    const double oracle = fermat_weber({p[0], p[1], {0.0, 0.0}}, {1.0, 1.0, std::pow(2.0, alpha)});
    const auto v = phi_double_star(p, alpha);
    EXPECT_NEAR(v.value, oracle, 2e-6 * std::max(1.0, p.column_norm_sum())) << "trial " << trial;
    EXPECT_LE(v.lower, v.upper + 1e-12);
  }
}

TEST(Envelope, CertificatesAreConsistent) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 5;
    const double alpha = 0.25 * ((trial / 5) % 5);
    Mat2xN p(n);
    for (auto& c : p.cols) c = {gauss(rng), gauss(rng)};
    const SubsetFamily f(n, alpha);
    const auto v = phi_double_star(p, alpha);
    EXPECT_LE(k_alpha_violation(v.maximizer, f), 1e-9);
    EXPECT_NEAR(pairing(p, v.maximizer), v.lower, 1e-9 * std::max(1.0, v.lower));
    if (v.decomposition.empty()) continue;  // separable case
    double cost = 0.0;
    std::vector<Vec2> recon(n, Vec2{0.0, 0.0});
    for (std::uint32_t J = 1; J <= f.last(); ++J) {
      cost += f.radius(J) * norm(v.decomposition[J]);
      for (int j = 0; j < n; ++j)
        if (J >> j & 1u) {
          recon[j][0] += v.decomposition[J][0];
          recon[j][1] += v.decomposition[J][1];
        }
    }
    EXPECT_NEAR(cost, v.upper, 1e-9 * std::max(1.0, cost));
    for (int j = 0; j < n; ++j) {
      EXPECT_NEAR(recon[j][0], p[j][0], 1e-10);
      EXPECT_NEAR(recon[j][1], p[j][1], 1e-10);
    }
  }
}

TEST(Envelope, ShrinkIntoK) {
  const SubsetFamily f(2, 0.0);
  const auto q = shrink_into_K(mat({{2, 0}, {2, 0}}), f);
  EXPECT_NEAR(q[0][0], 0.5, 1e-15);  // the pair sum limits the scale to 1/4
  EXPECT_LE(k_alpha_violation(q, f), 1e-15);
}
