// Counting-field generalized Hamiltonians and propagators.
#pragma once

#include "prft/core.hpp"

#include <vector>

namespace prft {

struct IntegratorSpec {
  int steps_per_period = 2000;  // substeps per drive period (or per unit time if aperiodic)
  double max_step = 0.0;        // optional hard cap, 0 = none
};

// H_chi(t) = H0 + sum_k g_k [L_k e^{-i theta_k} + L_k^dag e^{i theta_k}],
// theta_k = omega_k t + phase_k + chi_k. `chi` may be empty (all zero).
Matrix generalized_hamiltonian(const DrivenSystem& system, const std::vector<double>& chi, double t);
Matrix hamiltonian_time_derivative(const DrivenSystem& system, const std::vector<double>& chi,
                                   double t);

// One fourth-order commutator-free step of length h from time t.
Matrix cf4_step(const DrivenSystem& system, const std::vector<double>& chi, double t, double h);

// U_chi(t) for ascending, non-negative times. Periodic systems integrate one
// period and compose U(n tau + s) = U(s) U(tau)^n.
std::vector<Matrix> propagate(const DrivenSystem& system, const std::vector<double>& chi,
                              const std::vector<double>& times, const IntegratorSpec& spec = {});

// U_chi(t1, t0) by direct substepping (no composition).
Matrix propagate_interval(const DrivenSystem& system, const std::vector<double>& chi, double t0,
                          double t1, const IntegratorSpec& spec = {});

// Propagators on a counting grid. Entry (m, j) is U at drive phase
// phase_k + chi_j of the counted mode, i.e. the grid is shifted by that phase.
class GeneralizedPropagatorSet {
 public:
  GeneralizedPropagatorSet(CountingGrid grid, double phase_offset, std::vector<double> times,
                           std::vector<std::vector<Matrix>> u);

  const CountingGrid& grid() const { return grid_; }
  double phase_offset() const { return phase_offset_; }
  const std::vector<double>& times() const { return times_; }
  int num_times() const { return static_cast<int>(times_.size()); }
  int dim() const { return static_cast<int>(u_.front().front().rows()); }
  // j is taken modulo the grid size, so at(m, -j) is U at phase - chi_j.
  const Matrix& at(int time_index, int j) const;

 private:
  CountingGrid grid_;
  double phase_offset_;
  std::vector<double> times_;
  std::vector<std::vector<Matrix>> u_;  // [time][grid point]
};

GeneralizedPropagatorSet propagate_generalized(const DrivenSystem& system, const CountingGrid& grid,
                                               const std::vector<double>& times,
                                               const IntegratorSpec& spec = {}, int threads = 0);

// U^(m)(t) = (1/N) sum_j U_{chi_j}(t) e^{-i m chi_j} on the (shifted) grid.
class PhotonResolvedOperators {
 public:
  PhotonResolvedOperators(std::vector<Matrix> by_index, double phase_offset);
  int size() const { return static_cast<int>(ops_.size()); }
  double phase_offset() const { return phase_offset_; }
  const Matrix& operator()(int m) const;
  // max-norm of the Nyquist component; large values mean the support exceeds the grid
  double aliasing_norm() const;
  // transfer numbers m in (-N/2, N/2] with max-norm above tol
  std::vector<int> active(double tol = 1e-12) const;
  Matrix resynthesize(double chi) const;  // sum_m U^(m) e^{i m chi}

 private:
  std::vector<Matrix> ops_;
  double phase_offset_;
};

PhotonResolvedOperators photon_resolved_operators(const GeneralizedPropagatorSet& set,
                                                  int time_index);

// <P_n> for a product initial state psi0 (x) sum_n a_n |n>. Amplitude phases
// follow the drive convention, arg a_n = -phase * n for a coherent-like state.
double fock_projector_expectation(const PhotonResolvedOperators& ops, const Vector& psi0,
                                  const FockAmplitudes& amplitudes, int n);

// Closed forms for the (two-mode) Jaynes-Cummings family in the frame rotating
// at the mode frequency, with G = sum_k g_k exp(-i(chi_k + phi_k)):
// H = (hz - omega)/2 sz + G s+ + G* s-, U = cos(Et) - i sin(Et) sigma_chi,
// sigma_chi = cos(theta) sz + sin(theta)(cos(az) sx + sin(az) sy), az = -arg G.
struct JcSpectrum {
  double energy = 0.0;
  double theta = 0.0;
  double azimuth = 0.0;
  double coupling_modulus = 0.0;  // |G|
};
JcSpectrum two_mode_jc_spectrum(double hz, double omega, double g1, double g2, double chi1,
                                double chi2, double phi1, double phi2);
Matrix jc_propagator(double hz, double omega, double g, double chi, double phi, double t);
Matrix two_mode_jc_propagator(double hz, double omega, double g1, double g2, double chi1,
                              double chi2, double phi1, double phi2, double t);

// exp(-i omega sz t / 2), the frame used by the closed forms.
Matrix jc_frame(double omega, double t);
Matrix to_schrodinger_picture(const Matrix& u_rotating, double omega, double t);

// Ready-made systems (drive phases are the photonic phases of each mode).
DrivenSystem jc_system(double hz, double omega, double g, double phase = 0.0);
DrivenSystem rabi_system(double hz, double omega, double g, double phase = 0.0);
DrivenSystem two_mode_jc_system(double hz, double omega, double g1, double g2, double phi1,
                                double phi2);
DrivenSystem multimode_rabi_system(double hz, const std::vector<double>& omegas,
                                   const std::vector<double>& couplings,
                                   const std::vector<double>& phases);

}  // namespace prft
