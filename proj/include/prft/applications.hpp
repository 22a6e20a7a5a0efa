// SI-unit calculators: purity, coherence times, ensemble enhancement, transfer
// rate and a Monte-Carlo model of the heralded remote-entanglement protocol.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace prft {

inline constexpr double kHbar = 1.054571817e-34;        // J s
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m

// How a nominal photon frequency such as "400 THz" is turned into the angular
// frequency used in hbar*omega.
enum class FrequencyConvention {
  kOrdinary,  // nominal value is nu, omega = 2 pi nu (default)
  kLiteral,   // nominal value already is omega
};
double angular_frequency(double nominal, FrequencyConvention convention);

// Tr rho^2 of the matter system for a two-state Floquet superposition.
double purity_prediction(double weight1, double weight2, double slope1, double slope2,
                         double variance, double t);

// slopes[k][mu] = dE_mu/dphi_k in rad/s. Returns +infinity when every pair of
// states has the same slope for every mode.
double coherence_time_closed(const std::vector<std::vector<double>>& slopes, double field,
                             double volume, const std::vector<double>& omegas);
double coherence_time_traveling(const std::vector<std::vector<double>>& slopes,
                                const std::vector<double>& powers,
                                const std::vector<double>& omegas);
// Photon number n = eps0 E^2 V / (2 hbar omega) of a closed cavity mode.
double cavity_photon_number(double field, double volume, double omega);

// Quasienergies of N_A independent atoms in a collective product Floquet state.
std::vector<double> ghz_enhanced_splitting(int atoms, const std::vector<double>& single_atom);

struct LinkParameters {
  int atoms = 12;
  double rabi = 40e6;          // rad/s, dE'/dphi scale of one atom
  double omega = 0.0;          // photon angular frequency, rad/s
  double power = 10e-6;        // W
  double loss_rate = 0.051;    // 1/km
  double distance = 500.0;     // km
  void validate() const;
};

double transfer_rate(const LinkParameters& link);  // Hz
double peak_separation(const LinkParameters& link, double pulse);  // photons
double loss_broadening(const LinkParameters& link, double pulse);  // photons, one mode

struct ProtocolResult {
  double pulse = 0.0;
  long long trials = 0;
  long long accepted = 0;
  double success_rate = 0.0;
  double success_standard_error = 0.0;
  double analytic_success = 0.0;
  double misclassification = 0.0;   // analytic
  double fidelity_proxy = 0.0;      // 1 - misclassification
  double separation = 0.0;          // per-branch mean shift
  double broadening = 0.0;          // loss/amplification width, one mode
  double difference_width = 0.0;    // std dev of the intensity difference
  double window = 0.0;
  bool information_loss = false;    // branches indistinguishable
};

// `window` defaults to the separation (half of the distance between the
// accepted and rejected branch means); an explicit window <= 0 raises
// ConfigurationError.
ProtocolResult protocol_simulate(const LinkParameters& link, double pulse, long long trials,
                                 std::uint64_t seed, std::optional<double> window = std::nullopt,
                                 int threads = 0);

}  // namespace prft
