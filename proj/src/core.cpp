#include "prft/core.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace prft {

ModeSpec ModeSpec::from_bare(double frequency, double bare_coupling, double amplitude, double phase) {
  ModeSpec m;
  m.frequency = frequency;
  m.bare_coupling = bare_coupling;
  m.amplitude = amplitude;
  m.phase = phase;
  m.coupling = bare_coupling * amplitude;
  m.validate();
  return m;
}

ModeSpec ModeSpec::from_effective(double frequency, double coupling, double phase) {
  ModeSpec m;
  m.frequency = frequency;
  m.coupling = coupling;
  m.phase = phase;
  m.validate();
  return m;
}

void ModeSpec::validate() const {
  if (!(frequency > 0.0) || !std::isfinite(frequency)) {
    throw ValidationError("mode frequency must be positive and finite");
  }
  if (amplitude < 0.0) throw ValidationError("mode amplitude must be non-negative");
  if (!std::isfinite(phase) || !std::isfinite(coupling)) {
    throw ValidationError("mode phase and coupling must be finite");
  }
}

namespace {

long long gcd_ll(long long a, long long b) { return std::gcd(a, b); }
long long lcm_ll(long long a, long long b) { return a / gcd_ll(a, b) * b; }

}  // namespace

std::optional<double> common_frequency(const std::vector<double>& frequencies, double tol,
                                       int max_denominator) {
  if (frequencies.empty()) return std::nullopt;
  const double ref = frequencies.front();
  std::vector<long long> num(frequencies.size()), den(frequencies.size());
  for (std::size_t k = 0; k < frequencies.size(); ++k) {
    const double r = frequencies[k] / ref;
    bool found = false;
    for (int q = 1; q <= max_denominator && !found; ++q) {
      const double p = std::round(r * q);
      if (p >= 1.0 && std::abs(r * q - p) <= tol * std::max(1.0, r * q)) {
        num[k] = static_cast<long long>(p);
        den[k] = q;
        found = true;
      }
    }
    if (!found) return std::nullopt;
  }
  long long l = 1;
  for (long long d : den) l = lcm_ll(l, d);
  long long g = 0;
  for (std::size_t k = 0; k < num.size(); ++k) g = gcd_ll(g, num[k] * (l / den[k]));
  return ref * static_cast<double>(g) / static_cast<double>(l);
}

DrivenSystem::DrivenSystem(Matrix h0, std::vector<ModeCoupling> couplings)
    : h0_(std::move(h0)), couplings_(std::move(couplings)) {
  if (h0_.rows() == 0 || h0_.rows() != h0_.cols()) {
    throw ValidationError("H0 must be a non-empty square matrix");
  }
  if (!is_hermitian(h0_)) throw ValidationError("H0 is not Hermitian");
  std::vector<double> freqs;
  for (std::size_t k = 0; k < couplings_.size(); ++k) {
    const auto& c = couplings_[k];
    if (c.op.rows() != h0_.rows() || c.op.cols() != h0_.cols()) {
      std::ostringstream os;
      os << "coupling operator H_" << k << " has dimension " << c.op.rows() << "x" << c.op.cols()
         << ", expected " << h0_.rows();
      throw ValidationError(os.str());
    }
    if (c.form == CouplingForm::kHermitian && !is_hermitian(c.op)) {
      throw ValidationError("coupling operator H_" + std::to_string(k) + " is not Hermitian");
    }
    c.mode.validate();
    freqs.push_back(c.mode.frequency);
  }
  base_frequency_ = common_frequency(freqs);
}

std::optional<double> DrivenSystem::period() const {
  if (!base_frequency_) return std::nullopt;
  return kTwoPi / *base_frequency_;
}

double DrivenSystem::require_period() const {
  if (couplings_.empty()) throw CommensurabilityError("system has no driven modes, no period");
  auto p = period();
  if (!p) {
    std::ostringstream os;
    os << "mode frequencies are not commensurate (tolerance 1e-9, denominators <= 64):";
    for (const auto& c : couplings_) os << ' ' << c.mode.frequency;
    throw CommensurabilityError(os.str());
  }
  return *p;
}

DrivenSystem DrivenSystem::scaled(double factor, bool scale_h0) const {
  std::vector<ModeCoupling> c = couplings_;
  for (auto& mc : c) {
    mc.mode.coupling *= factor;
    mc.mode.bare_coupling *= factor;
  }
  return DrivenSystem(scale_h0 ? Matrix(h0_ * factor) : h0_, std::move(c));
}

DrivenSystem DrivenSystem::with_phase(int mode, double phase) const {
  std::vector<ModeCoupling> c = couplings_;
  c.at(mode).mode.phase = phase;
  return DrivenSystem(h0_, std::move(c));
}

SpinOperators spin_half_operators() {
  SpinOperators s;
  const cplx i(0.0, 1.0);
  s.x = Matrix::Zero(2, 2);
  s.y = Matrix::Zero(2, 2);
  s.z = Matrix::Zero(2, 2);
  s.x(0, 1) = 1.0;
  s.x(1, 0) = 1.0;
  s.y(0, 1) = -i;
  s.y(1, 0) = i;
  s.z(0, 0) = 1.0;
  s.z(1, 1) = -1.0;
  s.plus = s.x + i * s.y;
  s.minus = s.x - i * s.y;
  return s;
}

PhotonicInitialState PhotonicInitialState::coherent(double mean, double phase) {
  PhotonicInitialState p{mean, mean, phase, Family::kCoherent};
  p.validate();
  return p;
}

PhotonicInitialState PhotonicInitialState::squeezed(double mean, double variance, double phase) {
  PhotonicInitialState p{mean, variance, phase, Family::kSqueezed};
  p.validate();
  return p;
}

void PhotonicInitialState::validate() const {
  if (!(variance > 0.0)) throw ValidationError("photonic variance must be positive");
  if (mean < 0.0) throw ValidationError("photonic mean must be non-negative");
  if (family == Family::kCoherent && std::abs(variance - mean) > 1e-12 * std::max(1.0, mean)) {
    throw ValidationError("coherent family requires variance == mean");
  }
}

CountingGrid::CountingGrid(int mode, int size) : mode_(mode), size_(size) {
  if (mode < 0) throw ValidationError("counted mode index must be non-negative");
  if (size < 2 || (size & (size - 1)) != 0) {
    throw ValidationError("counting grid size must be a power of two >= 2, got " +
                          std::to_string(size));
  }
}

double FockAmplitudes::norm() const {
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  return std::sqrt(s);
}

FockAmplitudes FockAmplitudes::fock(int n) {
  if (n < 0) throw ValidationError("Fock index must be non-negative");
  return FockAmplitudes{n, {cplx(1.0)}, true};
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

bool is_hermitian(const Matrix& m, double tol) {
  return m.rows() == m.cols() && max_abs(m - m.adjoint()) < tol;
}

Vector normalized(const Vector& v) {
  const double n = v.norm();
  if (n == 0.0) throw ValidationError("cannot normalize the zero vector");
  return v / n;
}

void require_normalized(const Vector& v, const std::string& what, double tol) {
  if (std::abs(v.norm() - 1.0) > tol) {
    throw ValidationError(what + " is not normalized (norm " + std::to_string(v.norm()) + ")");
  }
}

Matrix expm(const Matrix& a) {
  if (a.rows() == 2 && a.cols() == 2) {
    const cplx a0 = 0.5 * (a(0, 0) + a(1, 1));
    const cplx b = a(0, 0) - a0;
    const cplx s2 = b * b + a(0, 1) * a(1, 0);
    cplx c, sh;  // cosh(s), sinh(s)/s
    if (std::abs(s2) < 1e-8) {
      c = 1.0 + s2 / 2.0 + s2 * s2 / 24.0 + s2 * s2 * s2 / 720.0;
      sh = 1.0 + s2 / 6.0 + s2 * s2 / 120.0 + s2 * s2 * s2 / 5040.0;
    } else {
      const cplx s = std::sqrt(s2);
      c = std::cosh(s);
      sh = std::sinh(s) / s;
    }
    const cplx e = std::exp(a0);
    Matrix out(2, 2);
    out(0, 0) = e * (c + sh * b);
    out(1, 1) = e * (c - sh * b);
    out(0, 1) = e * sh * a(0, 1);
    out(1, 0) = e * sh * a(1, 0);
    return out;
  }
  return a.exp();
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PRFT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  const int workers = std::min(resolve_threads(threads), std::max(count, 1));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace prft
