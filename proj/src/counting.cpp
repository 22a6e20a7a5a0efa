#include "prft/counting.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace prft {

cplx GeneratingFunctionSamples::at(int time_index, int j) const {
  const int n = grid.size();
  return values.at(static_cast<std::size_t>(time_index))[static_cast<std::size_t>(((j % n) + n) % n)];
}

std::vector<cplx> GeneratingFunctionSamples::unwrapped_log(int time_index) const {
  const int n = grid.size();
  std::vector<cplx> out(static_cast<std::size_t>(n));
  auto slot = [&](int j) -> cplx& { return out[static_cast<std::size_t>(j + n / 2 - 1)]; };
  auto continued = [&](int j, double ref_phase) {
    const cplx m = at(time_index, j);
    if (std::abs(m) == 0.0) {
      throw BranchError("generating function vanishes at chi=" + std::to_string(grid.point(j)));
    }
    double ph = std::arg(m);
    ph += kTwoPi * std::round((ref_phase - ph) / kTwoPi);
    return cplx(std::log(std::abs(m)), ph);
  };
  slot(0) = continued(0, 0.0);
  for (int j = 1; j <= n / 2; ++j) slot(j) = continued(j, slot(j - 1).imag());
  for (int j = -1; j > -n / 2; --j) slot(j) = continued(j, slot(j + 1).imag());
  return out;
}

namespace {

std::vector<Vector> evolved_states(const GeneralizedPropagatorSet& set, int time_index,
                                   const Vector& psi0) {
  const int n = set.grid().size();
  std::vector<Vector> v(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(j)] = set.at(time_index, j) * psi0;
  return v;
}

}  // namespace

GeneratingFunctionSamples dynamical_mgf(const GeneralizedPropagatorSet& set, const Vector& psi0) {
  if (psi0.size() != set.dim()) throw ValidationError("matter state has the wrong dimension");
  require_normalized(psi0, "matter initial state");
  const int n = set.grid().size();
  GeneratingFunctionSamples s;
  s.grid = set.grid();
  s.times = set.times();
  s.kind = MgfKind::kExactExpectation;
  for (int m = 0; m < set.num_times(); ++m) {
    const auto v = evolved_states(set, m, psi0);
    std::vector<cplx> row(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const Vector& minus = v[static_cast<std::size_t>((n - j) % n)];
      row[static_cast<std::size_t>(j)] =
          0.5 * (v[0].dot(v[static_cast<std::size_t>(j)]) + minus.dot(v[0]));
    }
    s.values.push_back(std::move(row));
  }
  return s;
}

GeneratingFunctionSamples standard_fcs_mgf(const GeneralizedPropagatorSet& fine, const Vector& psi0) {
  if (psi0.size() != fine.dim()) throw ValidationError("matter state has the wrong dimension");
  require_normalized(psi0, "matter initial state");
  const int nf = fine.grid().size();
  const int n = nf / 2;
  GeneratingFunctionSamples s;
  s.grid = CountingGrid(fine.grid().mode(), n);
  s.times = fine.times();
  s.kind = MgfKind::kProjective;
  for (int m = 0; m < fine.num_times(); ++m) {
    const auto v = evolved_states(fine, m, psi0);
    std::vector<cplx> row(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      row[static_cast<std::size_t>(j)] =
          v[static_cast<std::size_t>((nf - j) % nf)].dot(v[static_cast<std::size_t>(j)]);
    }
    s.values.push_back(std::move(row));
  }
  return s;
}

GeneratingFunctionSamples two_mode_jc_mgf_closed_form(const TwoModeJcParams& p, const Vector& psi0,
                                                      const CountingGrid& grid,
                                                      const std::vector<double>& times,
                                                      JcMgfVariant variant) {
  if (psi0.size() != 2) throw ValidationError("two-mode JC needs a spin-1/2 state");
  if (grid.mode() > 1) throw ValidationError("two-mode JC has modes 0 and 1 only");
  require_normalized(psi0, "matter initial state");
  const int n = grid.size();
  auto chis = [&](double chi) {
    return grid.mode() == 0 ? std::pair<double, double>{chi, 0.0} : std::pair<double, double>{0.0, chi};
  };
  GeneratingFunctionSamples s;
  s.grid = grid;
  s.times = times;
  s.kind = MgfKind::kClosedForm;
  const auto ops = spin_half_operators();
  const auto centre = two_mode_jc_spectrum(p.hz, p.omega, p.g1, p.g2, 0, 0, p.phi1, p.phi2);
  const Matrix axis = std::cos(centre.theta) * ops.z +
                      std::sin(centre.theta) * (std::cos(centre.azimuth) * ops.x +
                                                std::sin(centre.azimuth) * ops.y);
  const double sigma_mean = psi0.dot(axis * psi0).real();
  for (double t : times) {
    std::vector<cplx> row(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const double chi = grid.point(j);
      const auto [cp1, cp2] = chis(chi);
      const auto [cm1, cm2] = chis(-chi);
      if (variant == JcMgfVariant::kExact) {
        const Vector u0 = two_mode_jc_propagator(p.hz, p.omega, p.g1, p.g2, 0, 0, p.phi1, p.phi2, t) * psi0;
        const Vector up = two_mode_jc_propagator(p.hz, p.omega, p.g1, p.g2, cp1, cp2, p.phi1, p.phi2, t) * psi0;
        const Vector um = two_mode_jc_propagator(p.hz, p.omega, p.g1, p.g2, cm1, cm2, p.phi1, p.phi2, t) * psi0;
        row[static_cast<std::size_t>(j)] = 0.5 * (u0.dot(up) + um.dot(u0));
      } else {
        const double ep = two_mode_jc_spectrum(p.hz, p.omega, p.g1, p.g2, cp1, cp2, p.phi1, p.phi2).energy;
        const double em = two_mode_jc_spectrum(p.hz, p.omega, p.g1, p.g2, cm1, cm2, p.phi1, p.phi2).energy;
        const double a = (centre.energy - ep) * t;
        const double b = (centre.energy - em) * t;
        const cplx first(std::cos(a), std::sin(a) * sigma_mean);
        const cplx second(std::cos(b), -std::sin(b) * sigma_mean);
        row[static_cast<std::size_t>(j)] = 0.5 * (first + second);
      }
    }
    s.values.push_back(std::move(row));
  }
  return s;
}

double Quasiprobabilities::at(int dn) const {
  return (dn < first || dn > last()) ? 0.0 : values[static_cast<std::size_t>(dn - first)];
}

double Quasiprobabilities::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

double Quasiprobabilities::min() const { return *std::min_element(values.begin(), values.end()); }

namespace {

// q over m in (-N/2, N/2], position m + N/2 - 1.
std::vector<cplx> spectral_weights(const GeneratingFunctionSamples& s, int time_index) {
  const int n = s.grid.size();
  std::vector<cplx> in(s.values.at(static_cast<std::size_t>(time_index))), out;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  std::vector<cplx> q(static_cast<std::size_t>(n));
  for (int m = -n / 2 + 1; m <= n / 2; ++m) {
    q[static_cast<std::size_t>(m + n / 2 - 1)] = out[static_cast<std::size_t>(((m % n) + n) % n)] / static_cast<double>(n);
  }
  return q;
}

}  // namespace

Quasiprobabilities quasiprobabilities(const GeneratingFunctionSamples& samples, int time_index,
                                      int window, double tol) {
  const int n = samples.grid.size();
  if (window < 0) window = n / 2 - 1;
  if (n < 2 * window + 2) {
    std::ostringstream os;
    os << "counting grid of " << n << " points cannot resolve a window of +-" << window
       << " (needs at least " << 2 * window + 2 << ")";
    throw AliasingError(os.str());
  }
  const auto q = spectral_weights(samples, time_index);
  Quasiprobabilities out;
  out.first = -window;
  for (int m = -n / 2 + 1; m <= n / 2; ++m) {
    const cplx v = q[static_cast<std::size_t>(m + n / 2 - 1)];
    out.imaginary_residue = std::max(out.imaginary_residue, std::abs(v.imag()));
    if (std::abs(m) <= window) {
      out.values.push_back(v.real());
    } else {
      out.outside_mass += std::abs(v);
    }
  }
  if (out.outside_mass > tol) {
    std::ostringstream os;
    os << "quasiprobability mass " << out.outside_mass << " outside the window +-" << window
       << " at t=" << samples.times.at(static_cast<std::size_t>(time_index))
       << "; enlarge the counting grid";
    throw AliasingError(os.str());
  }
  return out;
}

double aliasing_discrepancy(const GeneratingFunctionSamples& coarse,
                            const GeneratingFunctionSamples& fine, int time_index) {
  const auto qc = spectral_weights(coarse, time_index);
  const auto qf = spectral_weights(fine, time_index);
  const int nc = coarse.grid.size(), nf = fine.grid.size();
  double worst = 0.0;
  for (int m = -nf / 2 + 1; m <= nf / 2; ++m) {
    const cplx c = (m > -nc / 2 && m <= nc / 2) ? qc[static_cast<std::size_t>(m + nc / 2 - 1)] : cplx(0.0);
    worst = std::max(worst, std::abs(c - qf[static_cast<std::size_t>(m + nf / 2 - 1)]));
  }
  return worst;
}

double Cumulants::operator[](int order) const {
  switch (order) {
    case 1: return k1;
    case 2: return k2;
    case 3: return k3;
    case 4: return k4;
    default: throw ValidationError("cumulant orders 1..4 only");
  }
}

namespace {

Cumulants from_log_derivatives(const cplx d[4]) {
  // kappa_n = (-i)^n d^n K / d chi^n
  const cplx mi(0.0, -1.0);
  cplx k[4];
  cplx f = 1.0;
  for (int i = 0; i < 4; ++i) {
    f *= mi;
    k[i] = f * d[i];
  }
  Cumulants c{k[0].real(), k[1].real(), k[2].real(), k[3].real(), 0.0};
  for (const auto& v : k) c.imaginary_residue = std::max(c.imaginary_residue, std::abs(v.imag()));
  return c;
}

// Nine-point central-difference weights at offsets -4..4, orders 1..4.
constexpr double kStencil9[4][9] = {
    {1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0.0, 4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280},
    {-1.0 / 560, 8.0 / 315, -1.0 / 5, 8.0 / 5, -205.0 / 72, 8.0 / 5, -1.0 / 5, 8.0 / 315, -1.0 / 560},
    {-7.0 / 240, 3.0 / 10, -169.0 / 120, 61.0 / 30, 0.0, -61.0 / 30, 169.0 / 120, -3.0 / 10, 7.0 / 240},
    {7.0 / 240, -2.0 / 5, 169.0 / 60, -122.0 / 15, 91.0 / 8, -122.0 / 15, 169.0 / 60, -2.0 / 5, 7.0 / 240},
};

}  // namespace

Cumulants cumulants(const GeneratingFunctionSamples& samples, int time_index, CumulantMethod method) {
  const int n = samples.grid.size();
  if (method == CumulantMethod::kSpectral) {
    const auto q = spectral_weights(samples, time_index);
    double norm = 0.0, mean = 0.0, residue = 0.0;
    for (int m = -n / 2 + 1; m <= n / 2; ++m) {
      const cplx v = q[static_cast<std::size_t>(m + n / 2 - 1)];
      norm += v.real();
      mean += m * v.real();
      residue = std::max(residue, std::abs(v.imag()));
    }
    mean /= norm;
    double mu2 = 0.0, mu3 = 0.0, mu4 = 0.0;
    for (int m = -n / 2 + 1; m <= n / 2; ++m) {
      const double w = q[static_cast<std::size_t>(m + n / 2 - 1)].real() / norm;
      const double x = m - mean;
      mu2 += w * x * x;
      mu3 += w * x * x * x;
      mu4 += w * x * x * x * x;
    }
    Cumulants c{mean, mu2, mu3, mu4 - 3.0 * mu2 * mu2, residue};
    return c;
  }
  if (n < 34) throw ValidationError("grid stencil needs at least 34 counting points");
  const auto k = samples.unwrapped_log(time_index);
  auto at = [&](int j) {
    const cplx v = k[static_cast<std::size_t>(j + n / 2 - 1)];
    if (std::exp(v.real()) < 1e-12) {
      throw BranchError("generating function nearly vanishes inside the stencil at chi=" +
                        std::to_string(samples.grid.point(j)));
    }
    return v;
  };
  for (int j = 1; j <= 8; ++j) {
    if (std::abs(at(j).imag() - at(j - 1).imag()) > 0.5 * kPi ||
        std::abs(at(-j).imag() - at(-j + 1).imag()) > 0.5 * kPi) {
      throw BranchError("log generating function is not continuous near chi=0; use the spectral method");
    }
  }
  const double h = samples.grid.spacing();
  cplx d[4];
  for (int order = 0; order < 4; ++order) {
    cplx fine = 0.0, coarse = 0.0;
    for (int o = -4; o <= 4; ++o) {
      fine += kStencil9[order][o + 4] * at(o);
      coarse += kStencil9[order][o + 4] * at(2 * o);
    }
    fine /= std::pow(h, order + 1);
    coarse /= std::pow(2.0 * h, order + 1);
    d[order] = (256.0 * fine - coarse) / 255.0;
  }
  return from_log_derivatives(d);
}

Cumulants stencil_cumulants(const std::function<cplx(double)>& log_mgf, double h) {
  if (!(h > 0.0)) throw ValidationError("stencil step must be positive");
  const cplx k0 = log_mgf(0.0);
  auto derivs = [&](double s, cplx out[4]) {
    const cplx p1 = log_mgf(s), m1 = log_mgf(-s), p2 = log_mgf(2 * s), m2 = log_mgf(-2 * s);
    out[0] = (p1 - m1) / (2.0 * s);
    out[1] = (p1 - 2.0 * k0 + m1) / (s * s);
    out[2] = (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * s * s * s);
    out[3] = (p2 - 4.0 * p1 + 6.0 * k0 - 4.0 * m1 + m2) / (s * s * s * s);
  };
  cplx coarse[4], fine[4], d[4];
  derivs(h, coarse);
  derivs(0.5 * h, fine);
  for (int i = 0; i < 4; ++i) d[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
  return from_log_derivatives(d);
}

std::vector<Cumulants> standard_fcs_cumulants(const DrivenSystem& system, int mode,
                                              const Vector& psi0, const std::vector<double>& times,
                                              double h, const IntegratorSpec& spec) {
  require_normalized(psi0, "matter initial state");
  const double phase0 = system.mode(mode).phase;
  // half-angles used by the stencil: chi in {0, +-h/2, +-h, +-2h}
  const std::vector<double> halves = {0.0, 0.25 * h, -0.25 * h, 0.5 * h, -0.5 * h, h, -h};
  std::vector<std::vector<Vector>> states;  // [half][time]
  for (double s : halves) {
    const auto u = propagate(system.with_phase(mode, phase0 + s), {}, times, spec);
    std::vector<Vector> v;
    for (const auto& m : u) v.push_back(m * psi0);
    states.push_back(std::move(v));
  }
  auto index_of = [&](double s) {
    for (std::size_t i = 0; i < halves.size(); ++i)
      if (std::abs(halves[i] - s) < 1e-15) return i;
    throw Error("stencil point not precomputed");
  };
  std::vector<Cumulants> out;
  for (std::size_t m = 0; m < times.size(); ++m) {
    auto log_mgf = [&](double chi) {
      const Vector& plus = states[index_of(0.5 * chi)][m];
      const Vector& minus = states[index_of(-0.5 * chi)][m];
      return std::log(minus.dot(plus));
    };
    out.push_back(stencil_cumulants(log_mgf, h));
  }
  return out;
}

double Distribution::at(int n) const {
  return (n < first || n > last()) ? 0.0 : values[static_cast<std::size_t>(n - first)];
}
double Distribution::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }
double Distribution::mean() const {
  double s = 0.0, w = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    s += values[i] * (first + static_cast<double>(i));
    w += values[i];
  }
  return s / w;
}
double Distribution::variance() const {
  const double mu = mean();
  double s = 0.0, w = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = first + static_cast<double>(i) - mu;
    s += values[i] * x * x;
    w += values[i];
  }
  return s / w;
}

Distribution redistribute(const Quasiprobabilities& q, const Distribution& initial, double tol) {
  Distribution out;
  out.first = initial.first + q.first;
  out.values.assign(initial.values.size() + q.values.size() - 1, 0.0);
  for (std::size_t a = 0; a < initial.values.size(); ++a) {
    if (initial.values[a] == 0.0) continue;
    for (std::size_t b = 0; b < q.values.size(); ++b) out.values[a + b] += initial.values[a] * q.values[b];
  }
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const int n = out.first + static_cast<int>(i);
    if (out.values[i] < -tol) {
      std::ostringstream os;
      os << "redistributed probability p_" << n << " = " << out.values[i]
         << " is negative; quasiprobability window too small or semiclassical assumptions violated";
      throw NegativeProbabilityError(os.str());
    }
    if (n < 0 && std::abs(out.values[i]) > tol) {
      throw NegativeProbabilityError("redistribution moves probability below n = 0");
    }
  }
  if (out.first < 0) {
    const auto drop = static_cast<std::size_t>(std::min<int>(-out.first, static_cast<int>(out.values.size())));
    out.values.erase(out.values.begin(), out.values.begin() + static_cast<std::ptrdiff_t>(drop));
    out.first = 0;
  }
  return out;
}

AsymptoticStatistics asymptotic_statistics(const FloquetSolution& solution,
                                           const QuasienergyDerivatives& derivatives,
                                           const std::vector<cplx>& coefficients,
                                           const std::vector<double>& times) {
  const int d = solution.size();
  if (static_cast<int>(coefficients.size()) != d) {
    throw ValidationError("expected one coefficient per Floquet state");
  }
  const int n = static_cast<int>(solution.points.size());
  if (n < 2 || (n & (n - 1)) != 0) {
    throw ValidationError("asymptotic statistics need a Floquet solution on a counting grid");
  }
  // align derivative labels with the solution labels
  const Eigen::MatrixXd overlap = (solution.states().adjoint() * derivatives.states).cwiseAbs();
  std::vector<double> slope(static_cast<std::size_t>(d));
  for (int mu = 0; mu < d; ++mu) {
    Eigen::Index best;
    overlap.row(mu).maxCoeff(&best);
    slope[static_cast<std::size_t>(mu)] = derivatives.first[static_cast<std::size_t>(best)];
  }
  const double w = solution.base_frequency;
  AsymptoticStatistics out;
  out.samples.grid = CountingGrid(derivatives.mode, n);
  out.samples.times = times;
  out.samples.kind = MgfKind::kFloquetAsymptotic;
  auto energy = [&](int j, int mu) {
    const auto& p = solution.points[static_cast<std::size_t>(j)];
    return cplx(p.quasienergy[static_cast<std::size_t>(mu)], p.growth[static_cast<std::size_t>(mu)]);
  };
  for (double t : times) {
    std::vector<cplx> row(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      cplx m = 0.0;
      for (int mu = 0; mu < d; ++mu) {
        const double weight = std::norm(coefficients[static_cast<std::size_t>(mu)]);
        const cplx e0 = energy(0, mu);
        const cplx ep = energy(j, mu);
        // E at -chi_j: continued forward to 2 pi - chi_j, minus the loop winding
        const cplx em = j == 0 ? e0 : energy(n - j, mu) - w * solution.winding[static_cast<std::size_t>(mu)];
        m += 0.5 * weight * (std::exp(cplx(0.0, 1.0) * (e0 - ep) * t) +
                             std::exp(cplx(0.0, 1.0) * (em - e0) * t));
      }
      row[static_cast<std::size_t>(j)] = m;
    }
    out.samples.values.push_back(std::move(row));
    double mean = 0.0, second = 0.0;
    for (int mu = 0; mu < d; ++mu) {
      const double weight = std::norm(coefficients[static_cast<std::size_t>(mu)]);
      mean += -weight * slope[static_cast<std::size_t>(mu)] * t;
      second += weight * std::pow(slope[static_cast<std::size_t>(mu)] * t, 2);
    }
    out.mean_change.push_back(mean);
    out.variance_change.push_back(second - mean * mean);
  }
  return out;
}

std::vector<double> matter_energy_change(const DrivenSystem& system, const Vector& psi0,
                                         const std::vector<double>& times,
                                         const IntegratorSpec& spec) {
  const auto u = propagate(system, {}, times, spec);
  const double e0 = psi0.dot(generalized_hamiltonian(system, {}, 0.0) * psi0).real();
  std::vector<double> out;
  for (std::size_t m = 0; m < times.size(); ++m) {
    const Vector v = u[m] * psi0;
    out.push_back(v.dot(generalized_hamiltonian(system, {}, times[m]) * v).real() - e0);
  }
  return out;
}

}  // namespace prft
