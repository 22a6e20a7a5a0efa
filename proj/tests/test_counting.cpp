#include "prft/counting.hpp"
#include "prft/floquet.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace prft;

namespace {

Vector spin(cplx a, cplx b) {
  Vector v(2);
  v << a, b;
  return normalized(v);
}

// Samples of M(chi) = sum_dn q_dn exp(i dn chi) for an explicit distribution.
GeneratingFunctionSamples samples_from(const std::map<int, double>& q, int n) {
  GeneratingFunctionSamples s;
  s.grid = CountingGrid(0, n);
  s.times = {0.0};
  std::vector<cplx> row;
  for (int j = 0; j < n; ++j) {
    cplx m = 0.0;
    for (const auto& [dn, w] : q) m += w * std::exp(cplx(0.0, dn * s.grid.point(j)));
    row.push_back(m);
  }
  s.values.push_back(row);
  return s;
}

Cumulants direct_cumulants(const std::map<int, double>& q) {
  double mu = 0.0;
  for (const auto& [dn, w] : q) mu += dn * w;
  double c2 = 0.0, c3 = 0.0, c4 = 0.0;
  for (const auto& [dn, w] : q) {
    const double d = dn - mu;
    c2 += w * d * d;
    c3 += w * d * d * d;
    c4 += w * d * d * d * d;
  }
  Cumulants c;
  c.k1 = mu;
  c.k2 = c2;
  c.k3 = c3;
  c.k4 = c4 - 3.0 * c2 * c2;
  return c;
}

const std::map<int, double> kSkewed = {{-2, 0.1}, {-1, 0.15}, {0, 0.2}, {1, 0.3}, {3, 0.2}, {4, 0.05}};

}  // namespace

TEST(Counting, StencilIsExactOnQuarticLogGenerator) {
  const double a = 1.3, b = 2.1, c = -0.7, d = 0.45;
  auto k = [&](double x) {
    const cplx ix(0.0, x);
    return a * ix + b * ix * ix / 2.0 + c * ix * ix * ix / 6.0 + d * ix * ix * ix * ix / 24.0;
  };
  const auto got = stencil_cumulants(k, 0.1);
  EXPECT_NEAR(got.k1, a, 1e-11);
  EXPECT_NEAR(got.k2, b, 1e-10);
  EXPECT_NEAR(got.k3, c, 1e-9);
  EXPECT_NEAR(got.k4, d, 1e-8);
}

TEST(Counting, StencilErrorShrinksFourthOrder) {
  // K = log of a three-point distribution, not a polynomial
  const std::map<int, double> q = {{-1, 0.2}, {0, 0.5}, {2, 0.3}};
  auto k = [&](double x) {
    cplx m = 0.0;
    for (const auto& [dn, w] : q) m += w * std::exp(cplx(0.0, dn * x));
    return std::log(m);
  };
  const auto exact = direct_cumulants(q);
  const double e1 = std::abs(stencil_cumulants(k, 0.2).k2 - exact.k2);
  const double e2 = std::abs(stencil_cumulants(k, 0.1).k2 - exact.k2);
  EXPECT_GT(e1 / e2, 12.0);
}

TEST(Counting, QuasiprobabilitiesInvertTheGeneratingFunction) {
  const auto s = samples_from(kSkewed, 32);
  const auto q = quasiprobabilities(s, 0, 8);
  for (const auto& [dn, w] : kSkewed) EXPECT_NEAR(q.at(dn), w, 1e-14);
  EXPECT_NEAR(q.sum(), 1.0, 1e-14);
  EXPECT_LT(q.imaginary_residue, 1e-14);
}

TEST(Counting, SpectralAndGridStencilCumulantsAgreeWithMoments) {
  // the stencil error scales with a high power of the grid spacing; 64 points
  // leave ~2e-4 in kappa3 for this skewed distribution, 256 points do not
  const auto exact = direct_cumulants(kSkewed);
  for (auto method : {CumulantMethod::kSpectral, CumulantMethod::kGridStencil}) {
    const auto s = samples_from(kSkewed, method == CumulantMethod::kSpectral ? 64 : 256);
    const auto c = cumulants(s, 0, method);
    const double tol = method == CumulantMethod::kSpectral ? 1e-12 : 1e-6;
    EXPECT_NEAR(c.k1, exact.k1, tol);
    EXPECT_NEAR(c.k2, exact.k2, tol);
    EXPECT_NEAR(c.k3, exact.k3, 10 * tol);
    EXPECT_NEAR(c.k4, exact.k4, 100 * tol);
  }
}

TEST(Counting, NarrowGridRaisesAliasingError) {
  const auto s = samples_from({{0, 0.5}, {6, 0.5}}, 8);
  EXPECT_THROW(quasiprobabilities(s, 0, 5), AliasingError);
  // a window that fits cannot see content folded into it; the 2N recheck does
  const auto folded = quasiprobabilities(s, 0, 3);
  EXPECT_NEAR(folded.at(-2), 0.5, 1e-14);
  const auto wide = quasiprobabilities(samples_from({{0, 0.5}, {6, 0.5}}, 16), 0, 7);
  EXPECT_NEAR(wide.at(-2), 0.0, 1e-14);
}

TEST(Counting, RedistributionConvolves) {
  Quasiprobabilities q;
  q.first = -1;
  q.values = {0.25, 0.5, 0.25};
  Distribution p0;
  p0.first = 10;
  p0.values = {0.5, 0.5};
  const auto p = redistribute(q, p0);
  EXPECT_EQ(p.first, 9);
  EXPECT_NEAR(p.at(9), 0.125, 1e-15);
  EXPECT_NEAR(p.at(10), 0.375, 1e-15);
  EXPECT_NEAR(p.at(11), 0.375, 1e-15);
  EXPECT_NEAR(p.at(12), 0.125, 1e-15);
  EXPECT_NEAR(p.variance(), p0.variance() + 0.5, 1e-14);
}

TEST(Counting, NegativeRedistributionIsReportedNotClipped) {
  Quasiprobabilities q;
  q.first = -1;
  q.values = {-0.1, 1.0, 0.1};
  Distribution p0;
  p0.first = 5;
  p0.values = {1.0};
  EXPECT_THROW(redistribute(q, p0), NegativeProbabilityError);
  const auto loose = redistribute(q, p0, 1.0);
  EXPECT_NEAR(loose.at(4), -0.1, 1e-15);
}

TEST(Counting, DynamicalMgfInvariants) {
  const auto sys = rabi_system(1.0, 2.0, 1.0, 0.2);
  const auto set = propagate_generalized(sys, CountingGrid(0, 64), {0.0, 1.0, 5.0});
  const auto m = dynamical_mgf(set, spin(0.6, cplx(0.0, 0.8)));
  for (int t = 0; t < m.num_times(); ++t) {
    EXPECT_NEAR(std::abs(m.at(t, 0) - 1.0), 0.0, 1e-12);
    for (int j = 1; j < 64; ++j) EXPECT_LT(std::abs(m.at(t, -j) - std::conj(m.at(t, j))), 1e-12);
  }
}

TEST(Counting, TwoModeMgfMatchesClosedForm) {
  TwoModeJcParams p;
  p.phi2 = kPi / 2.0;
  const auto sys = two_mode_jc_system(p.hz, p.omega, p.g1, p.g2, p.phi1, p.phi2);
  const CountingGrid grid(0, 64);
  const std::vector<double> times = {0.0, 20.0, 50.0};
  const auto psi = spin(0.8, 0.6);
  const auto numeric = dynamical_mgf(propagate_generalized(sys, grid, times), psi);
  const auto closed = two_mode_jc_mgf_closed_form(p, psi, grid, times, JcMgfVariant::kExact);
  for (int t = 0; t < 3; ++t)
    for (int j = 0; j < 64; ++j) EXPECT_LT(std::abs(numeric.at(t, j) - closed.at(t, j)), 1e-8);
}

TEST(Counting, EnergyCurrentIdentityForOneMode) {
  const auto sys = rabi_system(1.0, 3.0, 2.0, 0.1);
  const std::vector<double> times = {0.0, 0.7, 2.9, 8.0};
  const auto psi = spin(1.0, 0.0);
  const auto m = dynamical_mgf(propagate_generalized(sys, CountingGrid(0, 128), times), psi);
  const auto de = matter_energy_change(sys, psi, times);
  for (int t = 0; t < 4; ++t) EXPECT_NEAR(3.0 * cumulants(m, t).k1, -de[static_cast<std::size_t>(t)], 1e-8);
}

// unequal couplings keep the two quasienergies apart on the whole chi circle
TEST(Counting, AsymptoticSlopeMatchesFullPropagation) {
  const auto sys = two_mode_jc_system(1.0, 1.0, 0.2, 0.1, 0.0, kPi / 2.0);
  const auto d = quasienergy_phase_derivatives(sys, 0);
  const auto sol = floquet_decompose(sys, CountingGrid(0, 256));
  const std::vector<double> times = {0.0, 200.0};
  const Vector u1 = d.states.col(0);
  const auto coeffs = expand_in_floquet_basis(u1, sol.states());
  const auto asym = asymptotic_statistics(sol, d, coeffs, times);
  const auto full = dynamical_mgf(propagate_generalized(sys, CountingGrid(0, 256), times), u1);
  const double k1 = cumulants(full, 1).k1;
  EXPECT_NEAR(asym.mean_change[1], k1, 0.01 * std::abs(k1));
  EXPECT_NEAR(asym.variance_change[1], 0.0, 1e-9);
}

TEST(Counting, StandardFcsAgreesOnFirstCumulant) {
  const auto sys = two_mode_jc_system(1.0, 1.0, 0.2, 0.2, 0.0, kPi / 2.0);
  const auto d = quasienergy_phase_derivatives(sys, 0);
  const Vector u1 = d.states.col(0);
  const std::vector<double> times = {0.0, 300.0};
  const auto fcs = standard_fcs_cumulants(sys, 0, u1, times);
  const auto m = dynamical_mgf(propagate_generalized(sys, CountingGrid(0, 512), times), u1);
  const double k1 = cumulants(m, 1).k1;
  EXPECT_NEAR(fcs[1].k1, k1, 1e-6 * std::abs(k1));
}
