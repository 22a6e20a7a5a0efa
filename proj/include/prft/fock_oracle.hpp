// Exact truncated-Fock-space dynamics used as ground truth.
#pragma once

#include "prft/core.hpp"

#include <vector>

namespace prft {

// Retained Fock indices [first, last] of one mode.
struct FockWindow {
  int first = 0;
  int last = 0;
  int size() const { return last - first + 1; }
};

// Default half-width max(8 sigma, 40) + pad around round(mean), clamped at 0.
FockWindow default_window(double mean, double variance, int pad = 0);

// Discretized Gaussian amplitudes sqrt(N(n; mean, variance)) with phases -phase*n
// on `window`. Raises ValidationError if the Gaussian mass clipped by the
// window (including n < 0) exceeds 1e-12.
FockAmplitudes gaussian_fock_amplitudes(double mean, double variance, double phase,
                                        const FockWindow& window);
FockAmplitudes gaussian_fock_amplitudes(const PhotonicInitialState& state, int pad = 0);

struct PhotonMarginal {
  int first = 0;
  std::vector<double> p;
  double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0;
  double at(int n) const;
};
PhotonMarginal marginal_from_distribution(int first, std::vector<double> p);

struct SpinSnapshot {
  double x = 0.0, y = 0.0, z = 0.0;
  Eigen::Matrix2cd rho;
  double purity() const { return (rho * rho).trace().real(); }
};

// Quantum Rabi model H = hz/2 sz + w a^dag a + gt sx (a + a^dag), one photon
// mode, spin basis (up, down). Schroedinger picture.
struct RabiOracleOptions {
  double hz = 1.0;
  double omega = 1.0;
  double bare_coupling = 0.0;  // gt
  int pad = 40;                // Fock states kept beyond the initial window on each side
  double leakage_tol = 1e-8;
};
struct RabiSnapshot {
  double time = 0.0;
  PhotonMarginal photons;
  SpinSnapshot spin;
  double norm = 0.0;
};
std::vector<RabiSnapshot> evolve_rabi_fock(const RabiOracleOptions& options, const Vector& spin0,
                                           const FockAmplitudes& photons,
                                           const std::vector<double>& times);

// Single-mode JC with H = hz/2 sz + w a^dag a + gt (s+ a + s- a^dag), exact 2x2
// excitation blocks. Returns P_n(t) over [first, last + 1] of the photon window.
struct JcFockResult {
  int first = 0;
  std::vector<std::vector<double>> pn;  // [time][n - first]
};
JcFockResult evolve_jc_fock(double hz, double omega, double bare_coupling, const Vector& spin0,
                            const FockAmplitudes& photons, const std::vector<double>& times);

// Two-mode JC H = hz/2 sz + w (a1^dag a1 + a2^dag a2) + sum_k gt_k (s+ a_k + s- a_k^dag),
// evolved per excitation block in the frame rotating with w.
struct TwoModeJcOracleOptions {
  double hz = 1.0;
  double omega = 1.0;
  // Semiclassical elements: every sqrt(n_k) replaced by alpha_k so that the
  // link strengths are 2 g_k with g_k the effective couplings below.
  bool semiclassical_elements = true;
  double g1 = 0.2, g2 = 0.2;  // effective couplings g_k = gt_k * alpha_k
  int pad1 = 60;              // extra Fock states of mode 1 beyond its initial window per side
  double leakage_tol = 1e-8;
  bool schroedinger_spin = false;  // spin snapshot in the lab frame instead of the rotating one
};
struct TwoModeSnapshot {
  double time = 0.0;
  PhotonMarginal mode1;
  PhotonMarginal mode2;
  SpinSnapshot spin;
  double norm = 0.0;
  double mean_excitation = 0.0;
  std::vector<double> block_norms;  // by excitation number, ascending
};
struct TwoModeInitialState {
  Vector spin;                      // (up, down)
  PhotonicInitialState mode1;       // mean is alpha_1^2
  PhotonicInitialState mode2;
};
std::vector<TwoModeSnapshot> evolve_two_mode_jc_fock(const TwoModeJcOracleOptions& options,
                                                     const TwoModeInitialState& initial,
                                                     const std::vector<double>& times);

// Eigen-decomposition of a real symmetric tridiagonal matrix (LAPACK dstevr):
// returns eigenvalues and column eigenvectors.
void tridiagonal_eigensystem(const std::vector<double>& diagonal,
                             const std::vector<double>& offdiagonal, Eigen::VectorXd& values,
                             Eigen::MatrixXd& vectors);

}  // namespace prft
