#include "prft/applications.hpp"
#include "prft/core.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace prft;

namespace {

LinkParameters reference_link() {
  LinkParameters l;
  l.omega = angular_frequency(400e12, FrequencyConvention::kOrdinary);
  return l;
}

}  // namespace

TEST(Applications, TransferRateNearReferenceValue) {
  const double f = transfer_rate(reference_link());
  EXPECT_NEAR(f, 122.0, 0.05 * 122.0);
}

TEST(Applications, TransferRateScalesWithAtomsSquared) {
  auto l = reference_link();
  const double f12 = transfer_rate(l);
  l.atoms = 24;
  EXPECT_NEAR(transfer_rate(l) / f12, 4.0, 1e-12);
  l.atoms = 12;
  l.distance *= 2.0;
  EXPECT_NEAR(transfer_rate(l) / f12, 0.5, 1e-12);
}

// At pulse 1/f the separation equals the loss broadening.
TEST(Applications, TransferRateIsWhereSeparationMeetsBroadening) {
  const auto l = reference_link();
  const double pulse = 1.0 / transfer_rate(l);
  const double s = peak_separation(l, pulse), b = loss_broadening(l, pulse);
  EXPECT_NEAR(s / b, 1.0, 1e-9);
}

TEST(Applications, FrequencyConventions) {
  EXPECT_NEAR(angular_frequency(1.0, FrequencyConvention::kOrdinary), kTwoPi, 1e-15);
  EXPECT_DOUBLE_EQ(angular_frequency(5.0, FrequencyConvention::kLiteral), 5.0);
  EXPECT_THROW(angular_frequency(0.0, FrequencyConvention::kLiteral), ValidationError);
}

TEST(Applications, TravelingCoherenceTimeScaling) {
  const std::vector<std::vector<double>> slopes = {{-2e7, 2e7}};
  const std::vector<double> omega = {angular_frequency(400e12, FrequencyConvention::kOrdinary)};
  const double t1 = coherence_time_traveling(slopes, {10e-6}, omega);
  EXPECT_NEAR(coherence_time_traveling(slopes, {20e-6}, omega) / t1, 2.0, 1e-12);
  const std::vector<std::vector<double>> doubled = {{-4e7, 4e7}};
  EXPECT_NEAR(coherence_time_traveling(doubled, {10e-6}, omega) / t1, 0.25, 1e-12);
  EXPECT_TRUE(std::isinf(coherence_time_traveling({{3.0, 3.0}}, {1.0}, {1.0})));
}

TEST(Applications, ClosedCoherenceTimeScaling) {
  const std::vector<std::vector<double>> slopes = {{-1e4, 1e4}};
  const std::vector<double> omega = {angular_frequency(10e6, FrequencyConvention::kOrdinary)};
  const double t1 = coherence_time_closed(slopes, 1.0, 1e-3, omega);
  EXPECT_NEAR(coherence_time_closed(slopes, 3.0, 1e-3, omega) / t1, 3.0, 1e-12);
  const double n = cavity_photon_number(1.0, 1e-3, omega[0]);
  EXPECT_NEAR(t1, std::sqrt(n) / 2e4, 1e-12 * t1);
}

TEST(Applications, EnsembleSplittingIsAdditive) {
  const std::vector<double> one = {-0.3, 0.3};
  const auto many = ghz_enhanced_splitting(12, one);
  EXPECT_NEAR(many[1] - many[0], 12.0 * (one[1] - one[0]), 1e-14);
  EXPECT_THROW(ghz_enhanced_splitting(0, one), ValidationError);
}

TEST(Applications, PurityLimits) {
  EXPECT_NEAR(purity_prediction(0.5, 0.5, -1.0, 1.0, 100.0, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(purity_prediction(0.5, 0.5, -1.0, 1.0, 100.0, 1e6), 0.5, 1e-15);
  EXPECT_NEAR(purity_prediction(1.0, 0.0, -1.0, 1.0, 100.0, 1e6), 1.0, 1e-15);
  // equal slopes never decohere
  EXPECT_NEAR(purity_prediction(0.3, 0.7, 0.2, 0.2, 1.0, 1e6), 1.0, 1e-15);
  EXPECT_THROW(purity_prediction(0.3, 0.3, 0.0, 1.0, 1.0, 1.0), ValidationError);
}

TEST(Applications, LosslessProtocolAcceptsHalf) {
  auto l = reference_link();
  l.loss_rate = 0.0;
  const auto r = protocol_simulate(l, 10e-3, 100000, 20240611u);
  EXPECT_NEAR(r.analytic_success, 0.5, 1e-6);
  EXPECT_NEAR(r.success_rate, r.analytic_success, 4.0 * r.success_standard_error);
  EXPECT_FALSE(r.information_loss);
}

TEST(Applications, IndistinguishableBranchesCarryNoInformation) {
  auto l = reference_link();
  l.rabi = 1e-30;
  const auto r = protocol_simulate(l, 1e-3, 1000, 1u, 1.0);
  EXPECT_TRUE(r.information_loss);
  EXPECT_NEAR(r.misclassification, 0.5, 1e-9);
}

TEST(Applications, ProtocolWindowMustBePositive) {
  EXPECT_THROW(protocol_simulate(reference_link(), 1e-3, 10, 1u, 0.0), ConfigurationError);
  EXPECT_THROW(protocol_simulate(reference_link(), 1e-3, 10, 1u, -2.0), ConfigurationError);
}

TEST(Applications, ProtocolIsDeterministicAcrossThreadCounts) {
  const auto l = reference_link();
  const auto a = protocol_simulate(l, 1.0 / transfer_rate(l), 50000, 99u, std::nullopt, 1);
  const auto b = protocol_simulate(l, 1.0 / transfer_rate(l), 50000, 99u, std::nullopt, 4);
  const auto c = protocol_simulate(l, 1.0 / transfer_rate(l), 50000, 100u, std::nullopt, 1);
  EXPECT_EQ(a.accepted, b.accepted);
  EXPECT_NE(a.accepted, c.accepted);
}
