#include "prft/fock_oracle.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace prft {

FockWindow default_window(double mean, double variance, int pad) {
  if (!(variance > 0.0)) throw ValidationError("photonic variance must be positive");
  const int centre = static_cast<int>(std::lround(mean));
  const int half = static_cast<int>(std::ceil(std::max(8.0 * std::sqrt(variance), 40.0))) + std::max(pad, 0);
  return FockWindow{std::max(0, centre - half), centre + half};
}

FockAmplitudes gaussian_fock_amplitudes(double mean, double variance, double phase,
                                        const FockWindow& window) {
  if (!(variance > 0.0)) throw ValidationError("photonic variance must be positive");
  if (window.first < 0 || window.last < window.first) throw ValidationError("invalid Fock window");
  const double sigma = std::sqrt(variance);
  const double lo = (window.first - 0.5 - mean) / (sigma * std::sqrt(2.0));
  const double hi = (window.last + 0.5 - mean) / (sigma * std::sqrt(2.0));
  const double clipped = 0.5 * (std::erfc(-lo) + std::erfc(hi));
  if (clipped > 1e-12) {
    std::ostringstream os;
    os << "Fock window [" << window.first << ", " << window.last << "] clips " << clipped
       << " of the Gaussian mass (mean " << mean << ", variance " << variance << ")";
    throw ValidationError(os.str());
  }
  FockAmplitudes a;
  a.first = window.first;
  double total = 0.0;
  std::vector<double> w;
  for (int n = window.first; n <= window.last; ++n) {
    const double x = n - mean;
    w.push_back(std::exp(-x * x / (2.0 * variance)));
    total += w.back();
  }
  for (int n = window.first; n <= window.last; ++n) {
    const double m = std::sqrt(w[static_cast<std::size_t>(n - window.first)] / total);
    // keep the phase argument small: phase * n mod 2 pi
    const double arg = -std::fmod(phase * static_cast<double>(n), kTwoPi);
    a.values.push_back(std::polar(m, arg));
  }
  return a;
}

FockAmplitudes gaussian_fock_amplitudes(const PhotonicInitialState& state, int pad) {
  state.validate();
  return gaussian_fock_amplitudes(state.mean, state.variance, state.phase,
                                  default_window(state.mean, state.variance, pad));
}

double PhotonMarginal::at(int n) const {
  const int i = n - first;
  return (i < 0 || i >= static_cast<int>(p.size())) ? 0.0 : p[static_cast<std::size_t>(i)];
}

PhotonMarginal marginal_from_distribution(int first, std::vector<double> p) {
  PhotonMarginal m;
  m.first = first;
  m.p = std::move(p);
  double w = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < m.p.size(); ++i) {
    w += m.p[i];
    mean += m.p[i] * (first + static_cast<double>(i));
  }
  mean /= w;
  double mu2 = 0.0, mu3 = 0.0, mu4 = 0.0;
  for (std::size_t i = 0; i < m.p.size(); ++i) {
    const double x = first + static_cast<double>(i) - mean;
    const double v = m.p[i] / w;
    mu2 += v * x * x;
    mu3 += v * x * x * x;
    mu4 += v * x * x * x * x;
  }
  m.k1 = mean;
  m.k2 = mu2;
  m.k3 = mu3;
  m.k4 = mu4 - 3.0 * mu2 * mu2;
  return m;
}

void tridiagonal_eigensystem(const std::vector<double>& diagonal,
                             const std::vector<double>& offdiagonal, Eigen::VectorXd& values,
                             Eigen::MatrixXd& vectors) {
  const auto n = static_cast<lapack_int>(diagonal.size());
  if (n == 0 || offdiagonal.size() + 1 != diagonal.size()) {
    throw ValidationError("tridiagonal matrix has inconsistent sizes");
  }
  std::vector<double> d = diagonal, e = offdiagonal;
  e.push_back(0.0);
  values.resize(n);
  vectors.resize(n, n);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'A', n, d.data(), e.data(), 0.0, 0.0,
                                         0, 0, 0.0, &found, values.data(), vectors.data(), n,
                                         support.data());
  if (info != 0 || found != n) {
    throw Error("dstevr failed with info=" + std::to_string(info));
  }
}

namespace {

struct Chain {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

Chain solve_chain(const std::vector<double>& diag, const std::vector<double>& off) {
  Chain c;
  tridiagonal_eigensystem(diag, off, c.values, c.vectors);
  return c;
}

// psi(t) = V exp(-i L t) V^T psi0 for a batch of columns.
Eigen::MatrixXcd evolve_columns(const Chain& chain, const Eigen::MatrixXcd& coeffs, double t) {
  const Eigen::Index n = coeffs.rows();
  Eigen::MatrixXd re(n, coeffs.cols()), im(n, coeffs.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const cplx ph = std::polar(1.0, -chain.values(i) * t);
    for (Eigen::Index b = 0; b < coeffs.cols(); ++b) {
      const cplx v = ph * coeffs(i, b);
      re(i, b) = v.real();
      im(i, b) = v.imag();
    }
  }
  Eigen::MatrixXcd out(n, coeffs.cols());
  out.real() = chain.vectors * re;
  out.imag() = chain.vectors * im;
  return out;
}

Eigen::MatrixXcd project(const Chain& chain, const Eigen::MatrixXcd& psi) {
  Eigen::MatrixXcd c(psi.rows(), psi.cols());
  c.real() = chain.vectors.transpose() * psi.real();
  c.imag() = chain.vectors.transpose() * psi.imag();
  return c;
}

void leakage_error(const std::string& what, double weight, double t) {
  std::ostringstream os;
  os << "truncation leakage " << weight << " at the " << what << " edge at t=" << t
     << "; enlarge the Fock window";
  throw LeakageError(os.str());
}

Eigen::Matrix2cd spin_projector_density(double uu, double dd, cplx ud) {
  Eigen::Matrix2cd rho;
  rho << uu, ud, std::conj(ud), dd;
  return rho;
}

SpinSnapshot spin_from_density(const Eigen::Matrix2cd& rho) {
  SpinSnapshot s;
  s.rho = rho;
  s.z = (rho(0, 0) - rho(1, 1)).real();
  s.x = 2.0 * rho(0, 1).real();
  s.y = -2.0 * rho(0, 1).imag();
  return s;
}

}  // namespace

std::vector<RabiSnapshot> evolve_rabi_fock(const RabiOracleOptions& o, const Vector& spin0,
                                           const FockAmplitudes& photons,
                                           const std::vector<double>& times) {
  if (spin0.size() != 2) throw ValidationError("Rabi oracle needs a spin-1/2 state");
  require_normalized(spin0, "matter initial state");
  const int lo = std::max(0, photons.first - o.pad);
  const int hi = photons.last() + o.pad;
  const int len = hi - lo + 1;
  const double nref = 0.5 * (lo + hi);
  // chain c holds (spin (n + c) % 2, n) for n in [lo, hi]; spin 0 is up
  Chain chains[2];
  Eigen::MatrixXcd coeffs[2];
  for (int c = 0; c < 2; ++c) {
    std::vector<double> diag, off;
    Eigen::MatrixXcd psi0(len, 1);
    for (int n = lo; n <= hi; ++n) {
      const int s = (n + c) % 2;
      diag.push_back((s == 0 ? 0.5 : -0.5) * o.hz + o.omega * (n - nref));
      if (n < hi) off.push_back(o.bare_coupling * std::sqrt(static_cast<double>(n + 1)));
      psi0(n - lo, 0) = spin0(s) * photons.at(n);
    }
    chains[c] = solve_chain(diag, off);
    coeffs[c] = project(chains[c], psi0);
  }
  std::vector<RabiSnapshot> out;
  for (double t : times) {
    const Eigen::VectorXcd psi[2] = {evolve_columns(chains[0], coeffs[0], t).col(0),
                                     evolve_columns(chains[1], coeffs[1], t).col(0)};
    std::vector<double> p(static_cast<std::size_t>(len), 0.0);
    double uu = 0.0, dd = 0.0;
    cplx ud = 0.0;
    for (int n = lo; n <= hi; ++n) {
      const int i = n - lo;
      const int cu = n % 2;  // chain holding (up, n)
      const cplx up = psi[cu](i), down = psi[1 - cu](i);
      p[static_cast<std::size_t>(i)] = std::norm(up) + std::norm(down);
      uu += std::norm(up);
      dd += std::norm(down);
      ud += up * std::conj(down);
    }
    const double top = p[static_cast<std::size_t>(len - 1)] + p[static_cast<std::size_t>(len - 2)];
    if (top > o.leakage_tol) leakage_error("upper", top, t);
    if (lo > 0) {
      const double bottom = p[0] + p[1];
      if (bottom > o.leakage_tol) leakage_error("lower", bottom, t);
    }
    RabiSnapshot snap;
    snap.time = t;
    snap.norm = uu + dd;
    snap.photons = marginal_from_distribution(lo, std::move(p));
    snap.spin = spin_from_density(spin_projector_density(uu, dd, ud));
    out.push_back(std::move(snap));
  }
  return out;
}

JcFockResult evolve_jc_fock(double hz, double omega, double bare_coupling, const Vector& spin0,
                            const FockAmplitudes& photons, const std::vector<double>& times) {
  if (spin0.size() != 2) throw ValidationError("JC oracle needs a spin-1/2 state");
  require_normalized(spin0, "matter initial state");
  JcFockResult r;
  r.first = std::max(0, photons.first - 1);
  const int last = photons.last() + 1;
  const int len = last - r.first + 1;
  for (double t : times) {
    std::vector<double> p(static_cast<std::size_t>(len), 0.0);
    // lone (down, 0) never couples
    if (r.first == 0) p[0] += std::norm(spin0(1) * photons.at(0));
    // block n: (up, n), (down, n + 1)
    for (int n = r.first; n < last; ++n) {
      const cplx up0 = spin0(0) * photons.at(n), down0 = spin0(1) * photons.at(n + 1);
      if (up0 == cplx(0.0) && down0 == cplx(0.0)) continue;
      Matrix h(2, 2);
      const double link = 2.0 * bare_coupling * std::sqrt(static_cast<double>(n + 1));
      h << 0.5 * hz, link, link, -0.5 * hz + omega;
      Vector v(2);
      v << up0, down0;
      const Vector w = expm(cplx(0.0, -t) * h) * v;
      p[static_cast<std::size_t>(n - r.first)] += std::norm(w(0));
      p[static_cast<std::size_t>(n + 1 - r.first)] += std::norm(w(1));
    }
    r.pn.push_back(std::move(p));
  }
  return r;
}

namespace {

struct TwoModeAccumulator {
  int lo1 = 0, hi1 = 0;
  int lo2 = 0, hi2 = 0;
  std::vector<double> p1, p2;
  double uu = 0.0, dd = 0.0;
  cplx ud = 0.0;
  double norm = 0.0, excitation = 0.0;
  std::vector<double> block_norms;

  void init(int l1, int h1, int l2, int h2) {
    lo1 = l1;
    hi1 = h1;
    lo2 = l2;
    hi2 = h2;
    p1.assign(static_cast<std::size_t>(h1 - l1 + 1), 0.0);
    p2.assign(static_cast<std::size_t>(h2 - l2 + 1), 0.0);
  }
};

// chain node (s, n1) with s = 0 down, 1 up sits at 2 (n1 - chain_lo) + s
void accumulate_block(TwoModeAccumulator& acc, int excitation, int chain_lo,
                      const Eigen::VectorXcd& psi, int prev_lo, const Eigen::VectorXcd* prev) {
  double bn = 0.0;
  const int nodes = static_cast<int>(psi.size()) / 2;
  for (int i = 0; i < nodes; ++i) {
    const int n1 = chain_lo + i;
    for (int s = 0; s < 2; ++s) {
      const double w = std::norm(psi(2 * i + s));
      if (w == 0.0) continue;
      bn += w;
      acc.p1[static_cast<std::size_t>(n1 - acc.lo1)] += w;
      const int n2 = excitation - n1 - s;
      if (n2 < acc.lo2 || n2 > acc.hi2) throw Error("mode-2 photon number left the bookkeeping range");
      acc.p2[static_cast<std::size_t>(n2 - acc.lo2)] += w;
      (s == 1 ? acc.uu : acc.dd) += w;
    }
    if (prev) {
      const int j = n1 - prev_lo;
      if (j >= 0 && 2 * j < prev->size()) acc.ud += psi(2 * i + 1) * std::conj((*prev)(2 * j));
    }
  }
  acc.block_norms.push_back(bn);
  acc.norm += bn;
  acc.excitation += excitation * bn;
}

void check_chain_edges(const Eigen::VectorXcd& psi, bool lower_physical, double tol, double t) {
  const Eigen::Index n = psi.size();
  const double top = std::norm(psi(n - 1)) + std::norm(psi(n - 2));
  if (top > tol) leakage_error("upper mode-1", top, t);
  if (!lower_physical) {
    const double bottom = std::norm(psi(0)) + std::norm(psi(1));
    if (bottom > tol) leakage_error("lower mode-1", bottom, t);
  }
}

}  // namespace

std::vector<TwoModeSnapshot> evolve_two_mode_jc_fock(const TwoModeJcOracleOptions& o,
                                                     const TwoModeInitialState& init,
                                                     const std::vector<double>& times) {
  if (init.spin.size() != 2) throw ValidationError("two-mode JC oracle needs a spin-1/2 state");
  require_normalized(init.spin, "matter initial state");
  const auto a1 = gaussian_fock_amplitudes(init.mode1);
  const auto a2 = gaussian_fock_amplitudes(init.mode2);
  const double detuning = o.hz - o.omega;
  const int lo1 = std::max(0, a1.first - o.pad1);
  const int hi1 = a1.last() + o.pad1;
  const int n_lo = a1.first + a2.first;
  const int n_hi = a1.last() + a2.last() + 1;
  const int lo2 = std::max(0, n_lo - hi1 - 1);
  const int hi2 = n_hi - lo1;
  const double gt1 = o.g1 / std::sqrt(std::max(init.mode1.mean, 1e-300));
  const double gt2 = o.g2 / std::sqrt(std::max(init.mode2.mean, 1e-300));
  const Vector& b = init.spin;  // (up, down)

  auto initial_block = [&](int excitation, int chain_lo, int chain_hi) {
    Eigen::MatrixXcd psi = Eigen::MatrixXcd::Zero(2 * (chain_hi - chain_lo + 1), 1);
    for (int n1 = std::max(chain_lo, a1.first); n1 <= std::min(chain_hi, a1.last()); ++n1) {
      const int i = n1 - chain_lo;
      psi(2 * i, 0) = b(1) * a1.at(n1) * a2.at(excitation - n1);
      psi(2 * i + 1, 0) = b(0) * a1.at(n1) * a2.at(excitation - n1 - 1);
    }
    return psi;
  };
  auto chain_matrix = [&](int excitation, int chain_lo, int chain_hi, bool semiclassical) {
    std::vector<double> diag, off;
    for (int n1 = chain_lo; n1 <= chain_hi; ++n1) {
      diag.push_back(0.0);
      diag.push_back(detuning);
      // (down, n1) -- (up, n1): sigma_+ a_2 with n2 = N - n1 photons before absorption
      const int n2 = excitation - n1;
      off.push_back(semiclassical ? 2.0 * o.g2 : 2.0 * gt2 * std::sqrt(std::max(n2, 0)));
      // (up, n1) -- (down, n1 + 1): sigma_- a_1^dag
      if (n1 < chain_hi) {
        off.push_back(semiclassical ? 2.0 * o.g1 : 2.0 * gt1 * std::sqrt(static_cast<double>(n1 + 1)));
      }
    }
    return std::pair<std::vector<double>, std::vector<double>>{diag, off};
  };

  const int blocks = n_hi - n_lo + 1;
  std::vector<TwoModeAccumulator> acc(times.size());
  for (auto& a : acc) a.init(lo1, hi1, lo2, hi2);
  auto finish = [&]() {
    std::vector<TwoModeSnapshot> out;
    for (std::size_t m = 0; m < times.size(); ++m) {
      auto& a = acc[m];
      TwoModeSnapshot snap;
      snap.time = times[m];
      snap.norm = a.norm;
      snap.mean_excitation = a.excitation / a.norm;
      snap.block_norms = a.block_norms;
      snap.mode1 = marginal_from_distribution(a.lo1, a.p1);
      snap.mode2 = marginal_from_distribution(a.lo2, a.p2);
      cplx ud = a.ud;
      if (o.schroedinger_spin) ud *= std::polar(1.0, -o.omega * times[m]);
      snap.spin = spin_from_density(spin_projector_density(a.uu, a.dd, ud));
      out.push_back(std::move(snap));
    }
    return out;
  };

  if (o.semiclassical_elements) {
    if (n_lo - hi1 - 1 < 0) {
      throw ValidationError("mode-2 mean photon number too small for the semiclassical chain");
    }
    const auto [diag, off] = chain_matrix(0, lo1, hi1, true);
    const Chain chain = solve_chain(diag, off);
    const int len = 2 * (hi1 - lo1 + 1);
    Eigen::MatrixXcd psi0(len, blocks);
    for (int k = 0; k < blocks; ++k) psi0.col(k) = initial_block(n_lo + k, lo1, hi1).col(0);
    const Eigen::MatrixXcd coeffs = project(chain, psi0);
    for (std::size_t m = 0; m < times.size(); ++m) {
      const Eigen::MatrixXcd psi = evolve_columns(chain, coeffs, times[m]);
      for (int k = 0; k < blocks; ++k) {
        const Eigen::VectorXcd col = psi.col(k);
        check_chain_edges(col, lo1 == 0, o.leakage_tol, times[m]);
        Eigen::VectorXcd prev;
        if (k > 0) prev = psi.col(k - 1);
        accumulate_block(acc[m], n_lo + k, lo1, col, lo1, k > 0 ? &prev : nullptr);
      }
    }
    return finish();
  }

  std::vector<Eigen::VectorXcd> prev_states;
  int prev_lo = 0;
  for (int k = 0; k < blocks; ++k) {
    const int excitation = n_lo + k;
    // mode-1 photons of this block's initial support, padded
    const int support_lo = std::max(a1.first, excitation - a2.last() - 1);
    const int support_hi = std::min(a1.last(), excitation - a2.first);
    const int c_lo = std::max({0, support_lo - o.pad1});
    const int c_hi = std::min(support_hi + o.pad1, excitation);
    const auto [diag, off] = chain_matrix(excitation, c_lo, c_hi, false);
    const Chain chain = solve_chain(diag, off);
    const Eigen::MatrixXcd coeffs = project(chain, initial_block(excitation, c_lo, c_hi));
    std::vector<Eigen::VectorXcd> states;
    for (std::size_t m = 0; m < times.size(); ++m) {
      states.push_back(evolve_columns(chain, coeffs, times[m]).col(0));
      const auto& col = states.back();
      // the top node of a block whose chain reaches n2 = 0 is a physical edge
      if (c_hi < excitation) {
        const double top = std::norm(col(col.size() - 1)) + std::norm(col(col.size() - 2));
        if (top > o.leakage_tol) leakage_error("upper mode-1", top, times[m]);
      }
      if (c_lo > 0) {
        const double bottom = std::norm(col(0)) + std::norm(col(1));
        if (bottom > o.leakage_tol) leakage_error("lower mode-1", bottom, times[m]);
      }
      accumulate_block(acc[m], excitation, c_lo, col, prev_lo, k > 0 ? &prev_states[m] : nullptr);
    }
    prev_states = std::move(states);
    prev_lo = c_lo;
  }
  return finish();
}

}  // namespace prft
