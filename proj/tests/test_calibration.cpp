#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "steiner/checks.hpp"

using namespace steiner;

namespace {

const double kH = std::sqrt(3.0) / 2;

// brute force over unit tau and g in the cube, on a grid including the vertices
double sampled_dual_norm(const Mat2xN& omega, int angles, int levels) {
  const int n = omega.n();
  double best = 0.0;
  int total = 1;
  for (int j = 0; j < n; ++j) total *= levels;
  for (int a = 0; a < angles; ++a) {
    const double th = 2 * std::numbers::pi * a / angles;
    const Vec2 tau{std::cos(th), std::sin(th)};
    for (int code = 0; code < total; ++code) {
      WeightVector g(n);
      int c = code;
      for (int j = 0; j < n; ++j) {
        g[j] = -1.0 + 2.0 * (c % levels) / (levels - 1);
        c /= levels;
      }
      best = std::max(best, form_pairing(omega, tau, g));
    }
  }
  return best;
}

}  // namespace

TEST(Calibration, EquilateralTriangle) {
  const auto rep = check_triangle_calibration({-0.5, 0.5, kH}, 1e-10);
  EXPECT_TRUE(rep.closedness.passed()) << rep.closedness.value;
  EXPECT_TRUE(rep.dual_norm.passed()) << rep.dual_norm.value;
  EXPECT_TRUE(rep.pairing.passed()) << rep.pairing.value;
  // total variation of the three unit sides with weights 1/2
  EXPECT_NEAR(rep.integrated_mass, 1.5, 1e-12);
  EXPECT_NEAR(rep.integrated_pairing, rep.integrated_mass, 1e-10);
}

TEST(Calibration, IsoscelesTriangles) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 200; ++k) {
    const auto t = random_isosceles_triangle(rng);
    const auto rep = check_triangle_calibration(t, 1e-10);
    EXPECT_TRUE(rep.passed()) << t.x2 << " " << t.x3;
    EXPECT_NEAR(rep.integrated_pairing, rep.integrated_mass, 1e-9 * rep.integrated_mass);
  }
}

// each region holds a rank-one pair of unit-norm combinations, so the dual
// norm bound does not depend on the shape
TEST(Calibration, DualNormHoldsOnEveryTriangle) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    const auto t = random_admissible_triangle(rng);
    const auto form = build_triangle_calibration(t.x1, t.x2, t.x3);
    EXPECT_NEAR(dual_norm(form.left), 1.0, 1e-12);
    EXPECT_NEAR(dual_norm(form.right), 1.0, 1e-12);
  }
}

TEST(Calibration, PerturbationBreaksClosedness) {
  auto form = build_triangle_calibration(-0.5, 0.5, kH);
  const auto lambda = build_triangle_lambda(-0.5, 0.5, kH);
  form.left[0][1] += 1e-3;
  const auto rep = verify_calibration(form, lambda, 1e-10);
  EXPECT_FALSE(rep.closedness.passed());
  EXPECT_NEAR(rep.closedness.value, 1e-3 * std::abs(form.dir[1]), 1e-12);
}

TEST(Calibration, ScalingBreaksDualNorm) {
  auto form = build_triangle_calibration(-0.5, 0.5, kH);
  for (auto* m : {&form.left, &form.right})
    for (auto& c : m->cols) c = {1.5 * c[0], 1.5 * c[1]};
  const auto rep = verify_calibration(form, build_triangle_lambda(-0.5, 0.5, kH), 1e-10);
  EXPECT_TRUE(rep.closedness.passed());
  EXPECT_FALSE(rep.dual_norm.passed());
  EXPECT_NEAR(rep.dual_norm.value, 1.5, 1e-12);
  EXPECT_FALSE(rep.pairing.passed());
}

TEST(Calibration, DualNormAgainstSampling) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 3;
    Mat2xN m(n);
    for (auto& c : m.cols) c = {gauss(rng), gauss(rng)};
    const double exact = dual_norm(m);
    const double sampled = sampled_dual_norm(m, 2000, 5);
    EXPECT_LE(sampled, exact + 1e-12);
    EXPECT_GE(sampled, exact * std::cos(std::numbers::pi / 2000) - 1e-12);
  }
}

TEST(Calibration, RejectsInvalidTriangles) {
  EXPECT_THROW(build_triangle_calibration(0.5, 1.0, 1.0), DomainError);
  EXPECT_THROW(build_triangle_calibration(-0.5, -0.7, 1.0), DomainError);
  EXPECT_THROW(build_triangle_calibration(-0.5, 0.5, 0.0), DomainError);
  EXPECT_THROW(build_triangle_lambda(-0.5, 0.5, std::nan("")), DomainError);
  auto form = build_triangle_calibration(-0.5, 0.5, kH);
  form.right = Mat2xN(3);
  EXPECT_THROW(verify_calibration(form, build_triangle_lambda(-0.5, 0.5, kH), 1e-10), ContractViolation);
}
