#include "prft/floquet.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace prft;

TEST(Floquet, FoldingWindowIsHalfOpen) {
  EXPECT_NEAR(fold_quasienergy(0.5, 1.0), 0.5, 1e-15);
  EXPECT_NEAR(fold_quasienergy(-0.5, 1.0), 0.5, 1e-15);
  EXPECT_NEAR(fold_quasienergy(2.3, 1.0), 0.3, 1e-12);
}

TEST(Floquet, TwoModeJcQuasienergiesFromClosedForm) {
  const double g = 0.2;
  const auto sys = two_mode_jc_system(1.0, 1.0, g, g, 0.0, kPi / 2.0);
  const auto sol = floquet_decompose(sys);
  const double e = 0.4 * std::sqrt(2.0);
  std::vector<double> expected = {fold_quasienergy(-e + 0.5, 1.0), fold_quasienergy(e + 0.5, 1.0)};
  std::sort(expected.begin(), expected.end());
  const auto got = sol.folded_quasienergies();
  ASSERT_EQ(got.size(), 2u);
  EXPECT_NEAR(got[0], expected[0], 1e-9);
  EXPECT_NEAR(got[1], expected[1], 1e-9);
}

// Differentiating the closed-form spectrum gives 4 g1 g2 sin(phi) / E; half of
// that (the other printed form) is ruled out by the integrator.
TEST(Floquet, FluxFactorResolvedByDirectDifferentiation) {
  const double g1 = 0.2, g2 = 0.2, phi = kPi / 2.0;
  const auto sys = two_mode_jc_system(1.0, 1.0, g1, g2, 0.0, phi);
  const auto d = quasienergy_phase_derivatives(sys, 0);
  const double e = 0.4 * std::sqrt(2.0);
  const double four = 4.0 * g1 * g2 * std::sin(phi) / e;
  const double two = 2.0 * g1 * g2 * std::sin(phi) / e;
  std::vector<double> mags = {std::abs(d.first[0]), std::abs(d.first[1])};
  for (double m : mags) {
    EXPECT_NEAR(m, four, 1e-7);
    EXPECT_GT(std::abs(m - two), 0.1);
  }
  EXPECT_NEAR(d.first[0] + d.first[1], 0.0, 1e-8);
  EXPECT_NEAR(std::abs(d.second[0]), 0.1414213562, 1e-5);
}

TEST(Floquet, ThreeModeRabiStatesAreOrthonormal) {
  const auto sys = multimode_rabi_system(2.1, {1.0, 2.0, 3.0}, {1.0, 1.0, 1.0}, {0.5, 0.25, 0.5});
  const auto sol = floquet_decompose(sys, CountingGrid(2, 16));
  EXPECT_NEAR(sol.period, kTwoPi, 1e-12);
  for (const auto& p : sol.points) {
    EXPECT_LT(max_abs(p.states.adjoint() * p.states - Matrix::Identity(2, 2)), 1e-10);
    for (double gr : p.growth) EXPECT_LT(std::abs(gr), 1e-10);
  }
}

TEST(Floquet, ContinuationIsSmoothAlongTheGrid) {
  const auto sys = rabi_system(1.0, 1.0, 0.3);
  const CountingGrid grid(0, 32);
  const auto sol = floquet_decompose(sys, grid);
  for (std::size_t j = 1; j < sol.points.size(); ++j) {
    for (int mu = 0; mu < 2; ++mu) {
      const double ov = std::abs(sol.points[j - 1].states.col(mu).dot(sol.points[j].states.col(mu)));
      EXPECT_GT(ov, 0.9);
    }
  }
}

TEST(Floquet, DegenerateMapIsRejected) {
  EXPECT_THROW(decompose_period_map(Matrix::Identity(2, 2), 1.0), DegeneracyError);
}

TEST(Floquet, ExpansionCoefficientsReconstructState) {
  const auto sys = two_mode_jc_system(1.0, 1.0, 0.2, 0.2, 0.0, kPi / 2.0);
  const auto sol = floquet_decompose(sys);
  Vector psi(2);
  psi << 0.6, cplx(0.0, 0.8);
  const auto c = expand_in_floquet_basis(psi, sol.states());
  Vector back = Vector::Zero(2);
  for (int mu = 0; mu < 2; ++mu) back += c[static_cast<std::size_t>(mu)] * sol.states().col(mu);
  EXPECT_LT((back - psi).norm(), 1e-12);
}
