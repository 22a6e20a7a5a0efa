// Shared types for the photon-resolved Floquet toolkit. Units: hbar = 1 everywhere
// except the SI calculators in applications.hpp.
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace prft {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ValidationError : public Error {
 public:
  using Error::Error;
};
class CommensurabilityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class ConfigurationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class IntegrationError : public Error {
 public:
  using Error::Error;
};
class DegeneracyError : public Error {
 public:
  using Error::Error;
};
class BranchError : public Error {
 public:
  using Error::Error;
};
class AliasingError : public Error {
 public:
  using Error::Error;
};
class CoverageError : public Error {
 public:
  using Error::Error;
};
class NegativeProbabilityError : public Error {
 public:
  using Error::Error;
};
class LeakageError : public Error {
 public:
  using Error::Error;
};

// One photonic mode as seen by the matter system. The drive phase enters the
// semiclassical Hamiltonian as a_k -> alpha_k exp(-i(omega_k t + phase)).
struct ModeSpec {
  double frequency = 1.0;
  double amplitude = 0.0;      // alpha_k, zero when only the effective coupling is known
  double phase = 0.0;
  double bare_coupling = 0.0;  // g~_k, zero when only the effective coupling is known
  double coupling = 0.0;       // g_k = g~_k alpha_k

  static ModeSpec from_bare(double frequency, double bare_coupling, double amplitude, double phase);
  static ModeSpec from_effective(double frequency, double coupling, double phase);
  void validate() const;
};

// Hermitian: op is an observable H_k and enters as 2 g cos(theta) H_k.
// RotatingWave: op multiplies a_k only (e.g. sigma_+ in the JC model), its
// adjoint multiplies a_k^dagger.
enum class CouplingForm { kHermitian, kRotatingWave };

struct ModeCoupling {
  Matrix op;
  ModeSpec mode;
  CouplingForm form = CouplingForm::kHermitian;
};

class DrivenSystem {
 public:
  DrivenSystem(Matrix h0, std::vector<ModeCoupling> couplings);

  int dim() const { return static_cast<int>(h0_.rows()); }
  int num_modes() const { return static_cast<int>(couplings_.size()); }
  const Matrix& h0() const { return h0_; }
  const std::vector<ModeCoupling>& couplings() const { return couplings_; }
  const ModeSpec& mode(int k) const { return couplings_.at(k).mode; }

  // Base frequency of the commensurate drive, nullopt for incommensurate modes
  // or an undriven system.
  std::optional<double> base_frequency() const { return base_frequency_; }
  std::optional<double> period() const;
  double require_period() const;  // throws CommensurabilityError

  // Copy with every coupling strength multiplied by `factor` (and H0 too when
  // `scale_h0` is set). Used for ensemble models with additive quasienergies.
  DrivenSystem scaled(double factor, bool scale_h0) const;
  DrivenSystem with_phase(int mode, double phase) const;

 private:
  Matrix h0_;
  std::vector<ModeCoupling> couplings_;
  std::optional<double> base_frequency_;
};

inline DrivenSystem build_driven_system(Matrix h0, std::vector<ModeCoupling> couplings) {
  return DrivenSystem(std::move(h0), std::move(couplings));
}

// Greatest common frequency of a commensurate set: ratios reconstructed with
// denominators <= max_denominator within tol.
std::optional<double> common_frequency(const std::vector<double>& frequencies, double tol = 1e-9,
                                       int max_denominator = 64);

// Pauli matrices with sigma_pm = sigma_x +- i sigma_y (no factor 1/2), basis
// order (up, down).
struct SpinOperators {
  Matrix x, y, z, plus, minus;
};
SpinOperators spin_half_operators();

struct PhotonicInitialState {
  enum class Family { kCoherent, kSqueezed };
  double mean = 0.0;
  double variance = 0.0;
  double phase = 0.0;
  Family family = Family::kCoherent;

  static PhotonicInitialState coherent(double mean, double phase);
  static PhotonicInitialState squeezed(double mean, double variance, double phase);
  void validate() const;
};

// Uniform counting-field grid chi_j = 2 pi j / size on one counted mode. Other
// modes keep chi = 0 (marginal statistics).
class CountingGrid {
 public:
  CountingGrid(int mode, int size);
  int mode() const { return mode_; }
  int size() const { return size_; }
  double spacing() const { return kTwoPi / size_; }
  double point(int j) const { return kTwoPi * j / size_; }
  // Largest |dn| the grid can represent without aliasing.
  int max_resolvable() const { return (size_ - 1) / 2; }
  bool resolves(int max_dn) const { return size_ >= 2 * max_dn + 1; }

 private:
  int mode_;
  int size_;
};

// Photonic Fock amplitudes a_n on a contiguous window [first, first+size). Zero
// outside the window.
struct FockAmplitudes {
  int first = 0;
  std::vector<cplx> values;
  bool complete = false;  // amplitudes outside the window are exactly zero

  int last() const { return first + static_cast<int>(values.size()) - 1; }
  cplx at(int n) const {
    return (n < first || n > last()) ? cplx(0.0) : values[static_cast<std::size_t>(n - first)];
  }
  double norm() const;
  static FockAmplitudes fock(int n);
};

double max_abs(const Matrix& m);
bool is_hermitian(const Matrix& m, double tol = 1e-12);
Vector normalized(const Vector& v);
void require_normalized(const Vector& v, const std::string& what, double tol = 1e-12);

// exp(a) for a general complex square matrix: closed form for 2x2, Pade-13
// scaling and squaring otherwise.
Matrix expm(const Matrix& a);

// Thread count from PRFT_THREADS, else hardware concurrency. Zero means "auto".
int resolve_threads(int requested);
void parallel_for(int count, int threads, const std::function<void(int)>& body);

}  // namespace prft
