// Photon counting statistics from counting-field propagators.
#pragma once

#include "prft/floquet.hpp"
#include "prft/semiclassical.hpp"

#include <functional>
#include <vector>

namespace prft {

enum class MgfKind { kExactExpectation, kFloquetAsymptotic, kClosedForm, kProjective };

// M(chi_j, t_m) on a uniform grid; values[m][j] with j in [0, N).
struct GeneratingFunctionSamples {
  CountingGrid grid{0, 2};
  std::vector<double> times;
  std::vector<std::vector<cplx>> values;
  MgfKind kind = MgfKind::kExactExpectation;

  int num_times() const { return static_cast<int>(times.size()); }
  cplx at(int time_index, int j) const;  // j modulo N
  // log M continued along the grid from chi = 0 in both directions; index j in
  // (-N/2, N/2] maps to position j + N/2 - 1.
  std::vector<cplx> unwrapped_log(int time_index) const;
};

// M = 1/2 <U_phi^dag U_{phi+chi} + U_{phi-chi}^dag U_phi> for every time of the set.
GeneratingFunctionSamples dynamical_mgf(const GeneralizedPropagatorSet& set, const Vector& psi0);

// Two-point projective comparator <U_{phi-chi/2}^dag U_{phi+chi/2}>. `fine` must
// live on a grid twice as large as the requested output grid.
GeneratingFunctionSamples standard_fcs_mgf(const GeneralizedPropagatorSet& fine, const Vector& psi0);

enum class JcMgfVariant { kExact, kApproximate };
struct TwoModeJcParams {
  double hz = 1.0, omega = 1.0, g1 = 0.2, g2 = 0.2, phi1 = 0.0, phi2 = 0.0;
  int counted_mode = 0;
};
GeneratingFunctionSamples two_mode_jc_mgf_closed_form(const TwoModeJcParams& params,
                                                      const Vector& psi0, const CountingGrid& grid,
                                                      const std::vector<double>& times,
                                                      JcMgfVariant variant);

// Quasiprobabilities q over [first, first + size).
struct Quasiprobabilities {
  int first = 0;
  std::vector<double> values;
  double imaginary_residue = 0.0;  // max |Im q| over the whole grid
  double outside_mass = 0.0;       // sum |q| outside the window, Nyquist included

  int last() const { return first + static_cast<int>(values.size()) - 1; }
  double at(int dn) const;
  double sum() const;
  double min() const;
};

// Inverse DFT of M. `window` < 0 selects the widest admissible window N/2 - 1.
// Mass outside the window above `tol` raises AliasingError.
Quasiprobabilities quasiprobabilities(const GeneratingFunctionSamples& samples, int time_index,
                                      int window = -1, double tol = 1e-8);

// Max |q_N - q_2N| between two grids for the same physics; small means no aliasing.
double aliasing_discrepancy(const GeneratingFunctionSamples& coarse,
                            const GeneratingFunctionSamples& fine, int time_index);

struct Cumulants {
  double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0;
  double imaginary_residue = 0.0;
  double operator[](int order) const;
};

enum class CumulantMethod {
  kSpectral,     // central moments of the quasiprobabilities (exact for band-limited M)
  kGridStencil,  // 9-point differences of the continued log M at grid spacing
};
Cumulants cumulants(const GeneratingFunctionSamples& samples, int time_index,
                    CumulantMethod method = CumulantMethod::kSpectral);

// Cumulants of a log-generating function sampled by a callback, by central
// differences with steps h and h/2 and Richardson extrapolation.
Cumulants stencil_cumulants(const std::function<cplx(double)>& log_mgf, double h);

// Projective comparator cumulants by direct fine stencil in the drive phase.
std::vector<Cumulants> standard_fcs_cumulants(const DrivenSystem& system, int mode,
                                              const Vector& psi0, const std::vector<double>& times,
                                              double h = 1e-3, const IntegratorSpec& spec = {});

// p_n(t) = sum_dn q_dn p_{n - dn}(t0). Entries below -tol raise NegativeProbabilityError.
struct Distribution {
  int first = 0;
  std::vector<double> values;
  int last() const { return first + static_cast<int>(values.size()) - 1; }
  double at(int n) const;
  double sum() const;
  double mean() const;
  double variance() const;
};
Distribution redistribute(const Quasiprobabilities& q, const Distribution& initial,
                          double tol = 1e-8);

// Floquet-asymptotic generating function and low cumulants for weights |c_mu|^2.
struct AsymptoticStatistics {
  GeneratingFunctionSamples samples;
  std::vector<double> mean_change;      // per time
  std::vector<double> variance_change;  // per time
};
AsymptoticStatistics asymptotic_statistics(const FloquetSolution& solution,
                                           const QuasienergyDerivatives& derivatives,
                                           const std::vector<cplx>& coefficients,
                                           const std::vector<double>& times);

// <H(t)> - <H(0)> under U_0; for one driven mode of frequency w the photon
// number changes by -(this)/w.
std::vector<double> matter_energy_change(const DrivenSystem& system, const Vector& psi0,
                                         const std::vector<double>& times,
                                         const IntegratorSpec& spec = {});

}  // namespace prft
