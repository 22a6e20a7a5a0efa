#include "prft/semiclassical.hpp"

#include <gtest/gtest.h>

using namespace prft;

namespace {

Vector up() {
  Vector v(2);
  v << 1.0, 0.0;
  return v;
}

}  // namespace

TEST(Semiclassical, JcIntegratorMatchesClosedForm) {
  const double hz = 1.0, omega = 0.9, g = 0.3, phase = 0.4;
  const auto sys = jc_system(hz, omega, g, phase);
  const std::vector<double> times = {0.0, 3.7, 25.0, 100.0};
  for (double chi : {0.0, 0.8, -2.1}) {
    const auto us = propagate(sys, {chi}, times);
    for (std::size_t m = 0; m < times.size(); ++m) {
      const Matrix closed = to_schrodinger_picture(jc_propagator(hz, omega, g, chi, phase, times[m]), omega, times[m]);
      EXPECT_LT(max_abs(us[m] - closed), 1e-9) << "chi " << chi << " t " << times[m];
    }
  }
}

TEST(Semiclassical, TwoModeClosedFormReducesToSingleMode) {
  const double t = 7.3;
  const Matrix a = two_mode_jc_propagator(1.0, 1.1, 0.25, 0.0, 0.3, 1.7, 0.2, 0.9, t);
  const Matrix b = jc_propagator(1.0, 1.1, 0.25, 0.3, 0.2, t);
  EXPECT_LT(max_abs(a - b), 1e-14);
}

TEST(Semiclassical, ResonantTwoModeSpectrum) {
  const auto s = two_mode_jc_spectrum(1.0, 1.0, 0.2, 0.2, 0.0, 0.0, 0.0, kPi / 2.0);
  EXPECT_NEAR(s.coupling_modulus, 0.2 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(s.energy, 0.4 * std::sqrt(2.0), 1e-14);
}

TEST(Semiclassical, TwoModeIntegratorMatchesClosedForm) {
  const double hz = 1.0, omega = 1.0, g1 = 0.2, g2 = 0.2, phi2 = kPi / 2.0;
  const auto sys = two_mode_jc_system(hz, omega, g1, g2, 0.0, phi2);
  const std::vector<double> times = {0.0, 10.0, 60.0};
  const double chi = 0.9;
  const auto us = propagate(sys, {chi, 0.0}, times);
  for (std::size_t m = 0; m < times.size(); ++m) {
    const Matrix closed = to_schrodinger_picture(
        two_mode_jc_propagator(hz, omega, g1, g2, chi, 0.0, 0.0, phi2, times[m]), omega, times[m]);
    EXPECT_LT(max_abs(us[m] - closed), 1e-9);
  }
}

// The counting field of a rotating-wave coupling is a rotation generated by sz.
TEST(Semiclassical, CountingFieldIsSimilarityTransformForJc) {
  const auto sys = jc_system(1.0, 1.3, 0.4, 0.0);
  const auto sz = spin_half_operators().z;
  const double chi = 1.1, t = 9.0;
  const Matrix u0 = propagate(sys, {0.0}, {0.0, t}).back();
  const Matrix uchi = propagate(sys, {chi}, {0.0, t}).back();
  const Matrix v = expm(cplx(0.0, -chi / 2.0) * sz);
  EXPECT_LT(max_abs(uchi - v * u0 * v.adjoint()), 1e-10);
}

TEST(Semiclassical, PeriodicCompositionMatchesDirectIntegration) {
  const auto sys = rabi_system(1.0, 3.0, 1.5, 0.2);
  const double t = 13.7;
  const Matrix composed = propagate(sys, {0.4}, {0.0, t}).back();
  IntegratorSpec fine;
  fine.steps_per_period = 4000;
  const Matrix direct = propagate_interval(sys, {0.4}, 0.0, t, fine);
  EXPECT_LT(max_abs(composed - direct), 1e-9);
}

TEST(Semiclassical, PhotonResolvedOperatorsAreComplete) {
  const auto sys = rabi_system(1.0, 2.0, 1.0, 0.3);
  const CountingGrid grid(0, 64);
  const auto set = propagate_generalized(sys, grid, {0.0, 4.0});
  const auto ops = photon_resolved_operators(set, 1);
  Matrix acc = Matrix::Zero(2, 2);
  for (int m = 0; m < ops.size(); ++m) acc += ops(m).adjoint() * ops(m);
  EXPECT_LT(max_abs(acc - Matrix::Identity(2, 2)), 1e-10);
  for (int j : {0, 5, 33}) {
    EXPECT_LT(max_abs(ops.resynthesize(grid.point(j)) - set.at(1, j)), 1e-10);
  }
  EXPECT_LT(ops.aliasing_norm(), 1e-8);
}

TEST(Semiclassical, JcExchangesAtMostOnePhoton) {
  const auto set = propagate_generalized(jc_system(1.0, 1.0, 0.3), CountingGrid(0, 16), {0.0, 5.0});
  const auto active = photon_resolved_operators(set, 1).active(1e-12);
  for (int m : active) EXPECT_LE(std::abs(m), 1);
}

TEST(Semiclassical, ProjectorRequiresAmplitudeCoverage) {
  const auto set = propagate_generalized(rabi_system(1.0, 1.0, 1.0), CountingGrid(0, 32), {0.0, 2.0});
  const auto ops = photon_resolved_operators(set, 1);
  FockAmplitudes wide;
  wide.first = 0;
  wide.values.assign(5, cplx(std::sqrt(0.2)));
  EXPECT_THROW(fock_projector_expectation(ops, up(), wide, 2), CoverageError);
}

TEST(Semiclassical, GeneralizedSetRequiresInitialTimeZero) {
  EXPECT_THROW(propagate_generalized(jc_system(1.0, 1.0, 0.1), CountingGrid(0, 8), {1.0, 2.0}), ValidationError);
}
