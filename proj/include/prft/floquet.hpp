// One-period Floquet analysis of counting-field propagators.
#pragma once

#include "prft/semiclassical.hpp"

#include <vector>

namespace prft {

struct FloquetPoint {
  double chi = 0.0;
  std::vector<double> quasienergy;  // continued labels, unwrapped along the grid
  std::vector<double> growth;       // log|lambda| / tau, zero when U(tau) is unitary
  Matrix states;                    // column mu is |u_mu>, unit norm
};

struct FloquetSolution {
  double period = 0.0;
  double base_frequency = 0.0;
  std::vector<FloquetPoint> points;              // grid order, points[0] at chi = 0
  std::vector<std::vector<int>> permutations;    // raw eigen index -> label, per point
  std::vector<int> winding;                      // per label, in units of base_frequency

  int size() const { return points.empty() ? 0 : static_cast<int>(points.front().quasienergy.size()); }
  // Quasienergies at chi = 0 folded into (-w/2, w/2].
  std::vector<double> folded_quasienergies() const;
  const Matrix& states() const { return points.front().states; }
};

// Folds e into (-w/2, w/2].
double fold_quasienergy(double e, double base_frequency);

// Raw eigen-decomposition of one one-period map. Labels sorted by folded quasienergy.
FloquetPoint decompose_period_map(const Matrix& period_map, double period, double chi = 0.0);

// Decomposition on every point of a propagator set; `time_index` must sit at one period.
FloquetSolution floquet_decompose(const GeneralizedPropagatorSet& set, int time_index,
                                  double period);
// Convenience: integrate one period on `grid` and decompose.
FloquetSolution floquet_decompose(const DrivenSystem& system, const CountingGrid& grid,
                                  const IntegratorSpec& spec = {}, int threads = 0);
// Single point at chi = 0.
FloquetSolution floquet_decompose(const DrivenSystem& system, const IntegratorSpec& spec = {});

struct QuasienergyDerivatives {
  int mode = 0;
  std::vector<double> energy;        // folded, chi = 0
  std::vector<double> first;         // dE/dphi_k
  std::vector<double> second;        // d2E/dphi_k^2
  std::vector<double> first_error;   // Richardson error estimates
  std::vector<double> second_error;
  Matrix states;
};

// Central differences in the drive phase of `mode` with steps delta and delta/2,
// combined by Richardson extrapolation. Labels follow maximal overlap with chi = 0.
QuasienergyDerivatives quasienergy_phase_derivatives(const DrivenSystem& system, int mode,
                                                     double delta = 1e-3,
                                                     const IntegratorSpec& spec = {});

// Coefficients c with state = sum_mu c_mu |u_mu>.
std::vector<cplx> expand_in_floquet_basis(const Vector& state, const Matrix& floquet_states);

}  // namespace prft
