#include "prft/semiclassical.hpp"

#include <Eigen/SVD>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace prft {

namespace {

const double kSqrt3 = std::sqrt(3.0);
const double kNodeLo = 0.5 - kSqrt3 / 6.0;
const double kNodeHi = 0.5 + kSqrt3 / 6.0;
const double kWeightA = 0.25 + kSqrt3 / 6.0;
const double kWeightB = 0.25 - kSqrt3 / 6.0;

double chi_of(const std::vector<double>& chi, std::size_t k) { return k < chi.size() ? chi[k] : 0.0; }

double step_for(const DrivenSystem& system, const IntegratorSpec& spec) {
  if (spec.steps_per_period < 1) throw ValidationError("steps_per_period must be >= 1");
  const auto tau = system.period();
  double h = (tau ? *tau : 1.0) / spec.steps_per_period;
  if (spec.max_step > 0.0) h = std::min(h, spec.max_step);
  return h;
}

// Substep [a, b] with steps no longer than h.
void advance(const DrivenSystem& system, const std::vector<double>& chi, double a, double b,
             double h, Matrix& u) {
  if (b <= a) return;
  const long long n = std::max<long long>(1, static_cast<long long>(std::ceil((b - a) / h - 1e-9)));
  const double dt = (b - a) / static_cast<double>(n);
  if (!(dt > 0.0) || a + dt == a) {
    std::ostringstream os;
    os << "step size underflow at t=" << a;
    throw IntegrationError(os.str());
  }
  for (long long s = 0; s < n; ++s) u = cf4_step(system, chi, a + dt * static_cast<double>(s), dt) * u;
}

// Closest unitary in the Frobenius norm. Thousands of substeps per period
// leave a roundoff drift of ~1e-13 in U^dag U, which the period power would
// multiply by the cycle count.
Matrix nearest_unitary(const Matrix& u) {
  Eigen::JacobiSVD<Matrix> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

Matrix matrix_power(const Matrix& base, long long n) {
  Matrix result = Matrix::Identity(base.rows(), base.cols());
  Matrix b = base;
  while (n > 0) {
    if (n & 1) result = result * b;
    n >>= 1;
    if (n > 0) b = b * b;
  }
  return result;
}

}  // namespace

Matrix generalized_hamiltonian(const DrivenSystem& system, const std::vector<double>& chi, double t) {
  Matrix h = system.h0();
  const auto& cs = system.couplings();
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const auto& c = cs[k];
    const double theta = c.mode.frequency * t + c.mode.phase + chi_of(chi, k);
    const cplx e = std::polar(c.mode.coupling, -theta);
    h.noalias() += e * c.op;
    h.noalias() += std::conj(e) * c.op.adjoint();
  }
  return h;
}

Matrix hamiltonian_time_derivative(const DrivenSystem& system, const std::vector<double>& chi,
                                   double t) {
  Matrix d = Matrix::Zero(system.dim(), system.dim());
  const auto& cs = system.couplings();
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const auto& c = cs[k];
    const double theta = c.mode.frequency * t + c.mode.phase + chi_of(chi, k);
    const cplx e = std::polar(c.mode.coupling * c.mode.frequency, -theta) * cplx(0.0, -1.0);
    d.noalias() += e * c.op;
    d.noalias() += std::conj(e) * c.op.adjoint();
  }
  return d;
}

Matrix cf4_step(const DrivenSystem& system, const std::vector<double>& chi, double t, double h) {
  const Matrix h1 = generalized_hamiltonian(system, chi, t + kNodeLo * h);
  const Matrix h2 = generalized_hamiltonian(system, chi, t + kNodeHi * h);
  const cplx mih(0.0, -h);
  const Matrix first = expm(mih * (kWeightA * h1 + kWeightB * h2));
  const Matrix second = expm(mih * (kWeightB * h1 + kWeightA * h2));
  return second * first;
}

Matrix propagate_interval(const DrivenSystem& system, const std::vector<double>& chi, double t0,
                          double t1, const IntegratorSpec& spec) {
  Matrix u = Matrix::Identity(system.dim(), system.dim());
  advance(system, chi, t0, t1, step_for(system, spec), u);
  return u;
}

std::vector<Matrix> propagate(const DrivenSystem& system, const std::vector<double>& chi,
                              const std::vector<double>& times, const IntegratorSpec& spec) {
  for (std::size_t m = 0; m < times.size(); ++m) {
    if (times[m] < 0.0 || (m > 0 && times[m] < times[m - 1])) {
      throw ValidationError("propagation times must be ascending and non-negative");
    }
  }
  const int d = system.dim();
  const double h = step_for(system, spec);
  std::vector<Matrix> out(times.size());
  const auto tau = system.period();
  if (!tau) {
    Matrix u = Matrix::Identity(d, d);
    double t = 0.0;
    for (std::size_t m = 0; m < times.size(); ++m) {
      advance(system, chi, t, times[m], h, u);
      t = times[m];
      u = nearest_unitary(u);
      out[m] = u;
    }
    return out;
  }
  // Offsets within the period, integrated in one sweep.
  std::vector<long long> cycles(times.size());
  std::vector<double> offsets(times.size());
  for (std::size_t m = 0; m < times.size(); ++m) {
    double n = std::floor(times[m] / *tau);
    double s = times[m] - n * *tau;
    if (s > *tau * (1.0 - 1e-13)) {
      n += 1.0;
      s = 0.0;
    }
    cycles[m] = static_cast<long long>(n);
    offsets[m] = std::max(0.0, s);
  }
  std::vector<double> marks = offsets;
  marks.push_back(*tau);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  std::map<double, Matrix> at_offset;
  Matrix u = Matrix::Identity(d, d);
  double t = 0.0;
  for (double mark : marks) {
    advance(system, chi, t, mark, h, u);
    t = mark;
    u = nearest_unitary(u);
    at_offset.emplace(mark, u);
  }
  const Matrix& period_map = at_offset.at(*tau);
  std::map<long long, Matrix> powers;
  for (std::size_t m = 0; m < times.size(); ++m) {
    auto it = powers.find(cycles[m]);
    if (it == powers.end()) it = powers.emplace(cycles[m], matrix_power(period_map, cycles[m])).first;
    out[m] = at_offset.at(offsets[m]) * it->second;
  }
  return out;
}

GeneralizedPropagatorSet::GeneralizedPropagatorSet(CountingGrid grid, double phase_offset,
                                                   std::vector<double> times,
                                                   std::vector<std::vector<Matrix>> u)
    : grid_(grid), phase_offset_(phase_offset), times_(std::move(times)), u_(std::move(u)) {
  if (u_.size() != times_.size() || u_.empty()) {
    throw ValidationError("propagator set needs one row per time");
  }
  for (const auto& row : u_) {
    if (static_cast<int>(row.size()) != grid_.size()) {
      throw ValidationError("propagator set row does not match the grid size");
    }
  }
}

const Matrix& GeneralizedPropagatorSet::at(int time_index, int j) const {
  const int n = grid_.size();
  return u_.at(time_index)[static_cast<std::size_t>(((j % n) + n) % n)];
}

GeneralizedPropagatorSet propagate_generalized(const DrivenSystem& system, const CountingGrid& grid,
                                               const std::vector<double>& times,
                                               const IntegratorSpec& spec, int threads) {
  if (grid.mode() >= system.num_modes()) {
    throw ValidationError("counted mode " + std::to_string(grid.mode()) + " does not exist");
  }
  if (times.empty() || times.front() != 0.0) {
    throw ValidationError("propagation times must start at 0");
  }
  const int n = grid.size();
  std::vector<std::vector<Matrix>> by_point(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](int j) {
    std::vector<double> chi(static_cast<std::size_t>(system.num_modes()), 0.0);
    chi[static_cast<std::size_t>(grid.mode())] = grid.point(j);
    try {
      by_point[static_cast<std::size_t>(j)] = propagate(system, chi, times, spec);
    } catch (const IntegrationError& e) {
      throw IntegrationError(std::string(e.what()) + " (chi=" + std::to_string(grid.point(j)) + ")");
    }
  });
  std::vector<std::vector<Matrix>> u(times.size(), std::vector<Matrix>(static_cast<std::size_t>(n)));
  for (int j = 0; j < n; ++j) {
    for (std::size_t m = 0; m < times.size(); ++m) u[m][static_cast<std::size_t>(j)] = std::move(by_point[j][m]);
  }
  return GeneralizedPropagatorSet(grid, system.mode(grid.mode()).phase, times, std::move(u));
}

PhotonResolvedOperators::PhotonResolvedOperators(std::vector<Matrix> by_index, double phase_offset)
    : ops_(std::move(by_index)), phase_offset_(phase_offset) {}

const Matrix& PhotonResolvedOperators::operator()(int m) const {
  const int n = size();
  return ops_[static_cast<std::size_t>(((m % n) + n) % n)];
}

double PhotonResolvedOperators::aliasing_norm() const { return max_abs(ops_[ops_.size() / 2]); }

std::vector<int> PhotonResolvedOperators::active(double tol) const {
  std::vector<int> out;
  const int n = size();
  for (int m = -n / 2 + 1; m <= n / 2; ++m) {
    if (max_abs((*this)(m)) > tol) out.push_back(m);
  }
  return out;
}

Matrix PhotonResolvedOperators::resynthesize(double chi) const {
  const int n = size();
  Matrix u = Matrix::Zero(ops_.front().rows(), ops_.front().cols());
  for (int m = -n / 2 + 1; m <= n / 2; ++m) u += (*this)(m) * std::polar(1.0, m * chi);
  return u;
}

PhotonResolvedOperators photon_resolved_operators(const GeneralizedPropagatorSet& set,
                                                  int time_index) {
  const int n = set.grid().size();
  const int d = set.dim();
  std::vector<Matrix> ops(static_cast<std::size_t>(n), Matrix::Zero(d, d));
  Eigen::FFT<double> fft;
  std::vector<cplx> in(static_cast<std::size_t>(n)), out;
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      for (int j = 0; j < n; ++j) in[static_cast<std::size_t>(j)] = set.at(time_index, j)(r, c);
      fft.fwd(out, in);
      for (int m = 0; m < n; ++m) ops[static_cast<std::size_t>(m)](r, c) = out[static_cast<std::size_t>(m)] / static_cast<double>(n);
    }
  }
  return PhotonResolvedOperators(std::move(ops), set.phase_offset());
}

double fock_projector_expectation(const PhotonResolvedOperators& ops, const Vector& psi0,
                                  const FockAmplitudes& amplitudes, int n) {
  const std::vector<int> active = ops.active();
  const double edge = std::max(std::abs(amplitudes.values.front()), std::abs(amplitudes.values.back()));
  Vector w = Vector::Zero(psi0.size());
  for (int m : active) {
    const int src = n - m;
    if ((src < amplitudes.first || src > amplitudes.last()) && !amplitudes.complete && edge > 1e-6) {
      std::ostringstream os;
      os << "photonic window [" << amplitudes.first << ", " << amplitudes.last()
         << "] does not cover n - m = " << src;
      throw CoverageError(os.str());
    }
    const cplx a = amplitudes.at(src);
    if (a == cplx(0.0)) continue;
    // undo the grid shift so that the operators refer to zero drive phase
    w += a * std::polar(1.0, -m * ops.phase_offset()) * (ops(m) * psi0);
  }
  return w.squaredNorm();
}

JcSpectrum two_mode_jc_spectrum(double hz, double omega, double g1, double g2, double chi1,
                                double chi2, double phi1, double phi2) {
  const cplx big_g = std::polar(g1, -(chi1 + phi1)) + std::polar(g2, -(chi2 + phi2));
  const double detuning = hz - omega;
  JcSpectrum s;
  s.coupling_modulus = std::abs(big_g);
  s.energy = 0.5 * std::sqrt(detuning * detuning + 16.0 * std::norm(big_g));
  s.theta = std::atan2(4.0 * s.coupling_modulus, detuning);
  s.azimuth = s.coupling_modulus > 0.0 ? -std::arg(big_g) : 0.0;
  return s;
}

Matrix two_mode_jc_propagator(double hz, double omega, double g1, double g2, double chi1,
                              double chi2, double phi1, double phi2, double t) {
  const auto s = two_mode_jc_spectrum(hz, omega, g1, g2, chi1, chi2, phi1, phi2);
  const auto p = spin_half_operators();
  const Matrix axis = std::cos(s.theta) * p.z +
                      std::sin(s.theta) * (std::cos(s.azimuth) * p.x + std::sin(s.azimuth) * p.y);
  return std::cos(s.energy * t) * Matrix::Identity(2, 2) -
         cplx(0.0, std::sin(s.energy * t)) * axis;
}

Matrix jc_propagator(double hz, double omega, double g, double chi, double phi, double t) {
  return two_mode_jc_propagator(hz, omega, g, 0.0, chi, 0.0, phi, 0.0, t);
}

Matrix jc_frame(double omega, double t) {
  Matrix u = Matrix::Zero(2, 2);
  u(0, 0) = std::polar(1.0, -0.5 * omega * t);
  u(1, 1) = std::polar(1.0, 0.5 * omega * t);
  return u;
}

Matrix to_schrodinger_picture(const Matrix& u_rotating, double omega, double t) {
  return jc_frame(omega, t) * u_rotating;
}

DrivenSystem jc_system(double hz, double omega, double g, double phase) {
  const auto p = spin_half_operators();
  return DrivenSystem(0.5 * hz * p.z,
                      {{p.plus, ModeSpec::from_effective(omega, g, phase), CouplingForm::kRotatingWave}});
}

DrivenSystem rabi_system(double hz, double omega, double g, double phase) {
  const auto p = spin_half_operators();
  return DrivenSystem(0.5 * hz * p.z,
                      {{p.x, ModeSpec::from_effective(omega, g, phase), CouplingForm::kHermitian}});
}

DrivenSystem two_mode_jc_system(double hz, double omega, double g1, double g2, double phi1,
                                double phi2) {
  const auto p = spin_half_operators();
  return DrivenSystem(0.5 * hz * p.z,
                      {{p.plus, ModeSpec::from_effective(omega, g1, phi1), CouplingForm::kRotatingWave},
                       {p.plus, ModeSpec::from_effective(omega, g2, phi2), CouplingForm::kRotatingWave}});
}

DrivenSystem multimode_rabi_system(double hz, const std::vector<double>& omegas,
                                   const std::vector<double>& couplings,
                                   const std::vector<double>& phases) {
  if (omegas.size() != couplings.size() || omegas.size() != phases.size()) {
    throw ValidationError("multimode Rabi: frequencies, couplings and phases differ in length");
  }
  const auto p = spin_half_operators();
  std::vector<ModeCoupling> cs;
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    cs.push_back({p.x, ModeSpec::from_effective(omegas[k], couplings[k], phases[k]), CouplingForm::kHermitian});
  }
  return DrivenSystem(0.5 * hz * p.z, std::move(cs));
}

}  // namespace prft
