#include "prft/applications.hpp"

#include "prft/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace prft {

double angular_frequency(double nominal, FrequencyConvention convention) {
  if (!(nominal > 0.0)) throw ValidationError("frequency must be positive");
  return convention == FrequencyConvention::kOrdinary ? kTwoPi * nominal : nominal;
}

double purity_prediction(double weight1, double weight2, double slope1, double slope2,
                         double variance, double t) {
  if (weight1 < 0.0 || weight2 < 0.0 || std::abs(weight1 + weight2 - 1.0) > 1e-12) {
    throw ValidationError("Floquet weights must be non-negative and sum to 1");
  }
  if (!(variance > 0.0)) throw ValidationError("photonic variance must be positive");
  const double diff = weight1 - weight2;
  const double rate = slope2 - slope1;
  return 0.5 * (1.0 + diff * diff) +
         2.0 * weight1 * weight2 * std::exp(-rate * rate * t * t / (2.0 * variance));
}

namespace {

double largest_slope_gap(const std::vector<double>& slopes) {
  if (slopes.size() < 2) throw ValidationError("need at least one pair of Floquet states");
  const auto [lo, hi] = std::minmax_element(slopes.begin(), slopes.end());
  return *hi - *lo;
}

}  // namespace

double cavity_photon_number(double field, double volume, double omega) {
  if (!(field > 0.0) || !(volume > 0.0) || !(omega > 0.0)) {
    throw ValidationError("field, volume and frequency must be positive");
  }
  return kVacuumPermittivity * field * field * volume / (2.0 * kHbar * omega);
}

double coherence_time_closed(const std::vector<std::vector<double>>& slopes, double field,
                             double volume, const std::vector<double>& omegas) {
  if (slopes.size() != omegas.size() || slopes.empty()) {
    throw ValidationError("one slope list per mode frequency expected");
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < slopes.size(); ++k) {
    const double gap = largest_slope_gap(slopes[k]);
    if (gap == 0.0) continue;
    best = std::min(best, std::sqrt(cavity_photon_number(field, volume, omegas[k])) / gap);
  }
  return best;
}

double coherence_time_traveling(const std::vector<std::vector<double>>& slopes,
                                const std::vector<double>& powers,
                                const std::vector<double>& omegas) {
  if (slopes.size() != omegas.size() || powers.size() != omegas.size() || slopes.empty()) {
    throw ValidationError("one slope list and power per mode frequency expected");
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < slopes.size(); ++k) {
    if (!(powers[k] > 0.0) || !(omegas[k] > 0.0)) {
      throw ValidationError("powers and frequencies must be positive");
    }
    const double gap = largest_slope_gap(slopes[k]);
    if (gap == 0.0) continue;
    best = std::min(best, powers[k] / (kHbar * omegas[k] * gap * gap));
  }
  return best;
}

std::vector<double> ghz_enhanced_splitting(int atoms, const std::vector<double>& single_atom) {
  if (atoms < 1) throw ValidationError("atom count must be at least 1");
  std::vector<double> out(single_atom);
  for (auto& e : out) e *= atoms;
  return out;
}

void LinkParameters::validate() const {
  if (atoms < 1) throw ValidationError("atom count must be at least 1");
  if (!(rabi > 0.0) || !(omega > 0.0) || !(power > 0.0) || !(distance > 0.0) || loss_rate < 0.0) {
    throw ValidationError("link parameters must be positive (loss rate non-negative)");
  }
}

double transfer_rate(const LinkParameters& l) {
  l.validate();
  if (!(l.loss_rate > 0.0)) throw ValidationError("transfer rate needs a positive loss rate");
  const double n = l.atoms;
  return n * n * l.rabi * l.rabi * kHbar * l.omega / (2.0 * l.loss_rate * l.power * l.distance);
}

double peak_separation(const LinkParameters& l, double pulse) { return l.atoms * l.rabi * pulse; }

double loss_broadening(const LinkParameters& l, double pulse) {
  return std::sqrt(2.0 * l.loss_rate * l.distance * l.power * pulse / (kHbar * l.omega));
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

ProtocolResult protocol_simulate(const LinkParameters& link, double pulse, long long trials,
                                 std::uint64_t seed, std::optional<double> window, int threads) {
  link.validate();
  if (trials < 1) throw ValidationError("need at least one trial");
  if (!(pulse >= 0.0)) throw ValidationError("pulse duration must be non-negative");
  ProtocolResult r;
  r.pulse = pulse;
  r.trials = trials;
  r.separation = peak_separation(link, pulse);
  r.broadening = loss_broadening(link, pulse);
  const double shot = link.power * pulse / (kHbar * link.omega);
  // both modes carry shot noise plus loss/amplification noise
  r.difference_width = std::sqrt(2.0 * (shot + r.broadening * r.broadening));
  if (window && !(*window > 0.0)) throw ConfigurationError("acceptance window must be positive");
  // with no separation the branches coincide; fall back to one standard deviation
  r.window = window.value_or(r.separation > 0.0 ? r.separation : r.difference_width);
  if (!(r.window > 0.0)) throw ConfigurationError("zero pulse duration leaves no acceptance window");
  const double a = r.difference_width > 0.0 ? r.separation / r.difference_width
                                            : std::numeric_limits<double>::infinity();
  const double w = r.difference_width > 0.0 ? r.window / r.difference_width
                                            : std::numeric_limits<double>::infinity();
  // branch means of the intensity difference: -2s, 0, 0, +2s (equally likely)
  const double keep_centre = 1.0 - 2.0 * normal_cdf(-w);
  const double keep_side = normal_cdf(w - 2.0 * a) - normal_cdf(-w - 2.0 * a);
  r.analytic_success = 0.5 * keep_centre + 0.5 * keep_side;
  r.misclassification = 0.5 * (1.0 - keep_centre) + 0.5 * keep_side;
  r.fidelity_proxy = 1.0 - r.misclassification;
  r.information_loss = a < 1e-6;

  constexpr long long kChunk = 4096;
  const long long chunks = (trials + kChunk - 1) / kChunk;
  std::vector<long long> accepted(static_cast<std::size_t>(chunks), 0);
  parallel_for(static_cast<int>(chunks), threads, [&](int c) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(static_cast<std::uint64_t>(c) >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<int> branch(0, 3);
    std::normal_distribution<double> noise(0.0, 1.0);
    const long long begin = c * kChunk, end = std::min(trials, begin + kChunk);
    long long count = 0;
    for (long long i = begin; i < end; ++i) {
      const int b = branch(rng);
      const double mean = b == 0 ? -2.0 * r.separation : (b == 3 ? 2.0 * r.separation : 0.0);
      const double sample = mean + r.difference_width * noise(rng);
      if (std::abs(sample) <= r.window) ++count;
    }
    accepted[static_cast<std::size_t>(c)] = count;
  });
  for (long long c : accepted) r.accepted += c;
  r.success_rate = static_cast<double>(r.accepted) / static_cast<double>(trials);
  r.success_standard_error =
      std::sqrt(std::max(r.success_rate * (1.0 - r.success_rate), 1e-300) / static_cast<double>(trials));
  return r;
}

}  // namespace prft
