#include "prft/floquet.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace prft {

double fold_quasienergy(double e, double base_frequency) {
  const double w = base_frequency;
  double f = e - w * std::floor(e / w + 0.5);
  if (f <= -0.5 * w) f += w;
  if (f > 0.5 * w) f -= w;
  return f;
}

std::vector<double> FloquetSolution::folded_quasienergies() const {
  std::vector<double> out;
  for (double e : points.front().quasienergy) out.push_back(fold_quasienergy(e, base_frequency));
  return out;
}

namespace {

double circular_distance(double a, double b, double w) {
  return std::abs(fold_quasienergy(a - b, w));
}

void check_degeneracy(const FloquetPoint& p, double w) {
  const auto& e = p.quasienergy;
  for (std::size_t a = 0; a < e.size(); ++a) {
    for (std::size_t b = a + 1; b < e.size(); ++b) {
      if (circular_distance(e[a], e[b], w) < 1e-10 && std::abs(p.growth[a] - p.growth[b]) < 1e-10) {
        std::ostringstream os;
        os << "quasienergies " << a << " and " << b << " collide at chi=" << p.chi << " (E="
           << e[a] << ")";
        throw DegeneracyError(os.str());
      }
    }
  }
}

// label[i] = column of `next` matched to column i of `prev`.
std::vector<int> match_by_overlap(const Matrix& prev, const Matrix& next) {
  const int d = static_cast<int>(prev.cols());
  const Eigen::MatrixXd overlap = (prev.adjoint() * next).cwiseAbs();
  std::vector<int> label(static_cast<std::size_t>(d), -1);
  std::vector<bool> used(static_cast<std::size_t>(d), false);
  bool ambiguous = false;
  for (int i = 0; i < d; ++i) {
    int best = -1;
    double best_v = -1.0, second_v = -1.0;
    for (int j = 0; j < d; ++j) {
      const double v = overlap(i, j);
      if (v > best_v) {
        second_v = best_v;
        best_v = v;
        best = j;
      } else if (v > second_v) {
        second_v = v;
      }
    }
    if (used[static_cast<std::size_t>(best)] || second_v > 0.9 * best_v) ambiguous = true;
    label[static_cast<std::size_t>(i)] = best;
    used[static_cast<std::size_t>(best)] = true;
  }
  if (!ambiguous) return label;
  if (d > 8) {
    // greedy over the global ordering of overlaps
    std::vector<std::tuple<double, int, int>> entries;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) entries.emplace_back(-overlap(i, j), i, j);
    std::sort(entries.begin(), entries.end());
    std::fill(label.begin(), label.end(), -1);
    std::fill(used.begin(), used.end(), false);
    for (const auto& [v, i, j] : entries) {
      if (label[static_cast<std::size_t>(i)] < 0 && !used[static_cast<std::size_t>(j)]) {
        label[static_cast<std::size_t>(i)] = j;
        used[static_cast<std::size_t>(j)] = true;
      }
    }
    return label;
  }
  std::vector<int> perm(static_cast<std::size_t>(d));
  std::iota(perm.begin(), perm.end(), 0);
  double best_score = -1.0;
  do {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += overlap(i, perm[static_cast<std::size_t>(i)]);
    if (s > best_score) {
      best_score = s;
      label = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return label;
}

double nearest_branch(double raw, double reference, double w) {
  return raw + w * std::round((reference - raw) / w);
}

}  // namespace

FloquetPoint decompose_period_map(const Matrix& period_map, double period, double chi) {
  Eigen::ComplexEigenSolver<Matrix> solver(period_map, true);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition of the period map failed");
  const int d = static_cast<int>(period_map.rows());
  const double w = kTwoPi / period;
  std::vector<double> e(static_cast<std::size_t>(d)), growth(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    const cplx lambda = solver.eigenvalues()(i);
    e[static_cast<std::size_t>(i)] = fold_quasienergy(-std::arg(lambda) / period, w);
    growth[static_cast<std::size_t>(i)] = std::log(std::abs(lambda)) / period;
  }
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return e[a] < e[b]; });
  FloquetPoint p;
  p.chi = chi;
  p.states.resize(d, d);
  for (int i = 0; i < d; ++i) {
    const int src = order[static_cast<std::size_t>(i)];
    p.quasienergy.push_back(e[static_cast<std::size_t>(src)]);
    p.growth.push_back(growth[static_cast<std::size_t>(src)]);
    p.states.col(i) = solver.eigenvectors().col(src).normalized();
  }
  check_degeneracy(p, w);
  return p;
}

FloquetSolution floquet_decompose(const GeneralizedPropagatorSet& set, int time_index,
                                  double period) {
  if (std::abs(set.times().at(static_cast<std::size_t>(time_index)) - period) > 1e-9 * period) {
    throw ValidationError("floquet_decompose needs the propagator at exactly one period");
  }
  const int n = set.grid().size();
  FloquetSolution sol;
  sol.period = period;
  sol.base_frequency = kTwoPi / period;
  const double w = sol.base_frequency;
  std::vector<FloquetPoint> raw(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    raw[static_cast<std::size_t>(j)] = decompose_period_map(set.at(time_index, j), period, set.grid().point(j));
  }
  sol.points.push_back(raw[0]);
  const int d = sol.points.front().states.cols();
  std::vector<int> ident(static_cast<std::size_t>(d));
  std::iota(ident.begin(), ident.end(), 0);
  sol.permutations.push_back(ident);
  for (int j = 1; j < n; ++j) {
    const FloquetPoint& prev = sol.points.back();
    const FloquetPoint& cur = raw[static_cast<std::size_t>(j)];
    const auto label = match_by_overlap(prev.states, cur.states);
    FloquetPoint next;
    next.chi = cur.chi;
    next.states.resize(d, d);
    for (int mu = 0; mu < d; ++mu) {
      const int src = label[static_cast<std::size_t>(mu)];
      const double e = nearest_branch(cur.quasienergy[static_cast<std::size_t>(src)],
                                      prev.quasienergy[static_cast<std::size_t>(mu)], w);
      if (std::abs(e - prev.quasienergy[static_cast<std::size_t>(mu)]) >= 0.25 * w) {
        std::ostringstream os;
        os << "quasienergy " << mu << " jumps by more than a quarter of the drive frequency at chi="
           << cur.chi;
        throw BranchError(os.str());
      }
      next.quasienergy.push_back(e);
      next.growth.push_back(cur.growth[static_cast<std::size_t>(src)]);
      next.states.col(mu) = cur.states.col(src);
    }
    sol.permutations.push_back(label);
    sol.points.push_back(std::move(next));
  }
  // close the loop back to chi = 2 pi == chi = 0
  sol.winding.assign(static_cast<std::size_t>(d), 0);
  if (n > 1) {
    const auto label = match_by_overlap(sol.points.back().states, sol.points.front().states);
    for (int mu = 0; mu < d; ++mu) {
      const int dst = label[static_cast<std::size_t>(mu)];
      const double e = nearest_branch(sol.points.front().quasienergy[static_cast<std::size_t>(dst)],
                                      sol.points.back().quasienergy[static_cast<std::size_t>(mu)], w);
      sol.winding[static_cast<std::size_t>(mu)] = static_cast<int>(std::lround(
          (e - sol.points.front().quasienergy[static_cast<std::size_t>(mu)]) / w));
    }
  }
  return sol;
}

FloquetSolution floquet_decompose(const DrivenSystem& system, const CountingGrid& grid,
                                  const IntegratorSpec& spec, int threads) {
  const double tau = system.require_period();
  const auto set = propagate_generalized(system, grid, {0.0, tau}, spec, threads);
  return floquet_decompose(set, 1, tau);
}

FloquetSolution floquet_decompose(const DrivenSystem& system, const IntegratorSpec& spec) {
  const double tau = system.require_period();
  FloquetSolution sol;
  sol.period = tau;
  sol.base_frequency = kTwoPi / tau;
  sol.points.push_back(decompose_period_map(propagate_interval(system, {}, 0.0, tau, spec), tau));
  std::vector<int> ident(static_cast<std::size_t>(sol.size()));
  std::iota(ident.begin(), ident.end(), 0);
  sol.permutations.push_back(ident);
  sol.winding.assign(ident.size(), 0);
  return sol;
}

QuasienergyDerivatives quasienergy_phase_derivatives(const DrivenSystem& system, int mode,
                                                     double delta, const IntegratorSpec& spec) {
  if (!(delta > 0.0)) throw ValidationError("finite-difference step must be positive");
  const double tau = system.require_period();
  const double w = kTwoPi / tau;
  const double phase0 = system.mode(mode).phase;
  const FloquetPoint centre =
      decompose_period_map(propagate_interval(system, {}, 0.0, tau, spec), tau);
  const int d = static_cast<int>(centre.states.cols());
  auto shifted = [&](double offset) {
    const auto sys = system.with_phase(mode, phase0 + offset);
    FloquetPoint p = decompose_period_map(propagate_interval(sys, {}, 0.0, tau, spec), tau, offset);
    const auto label = match_by_overlap(centre.states, p.states);
    std::vector<double> e(static_cast<std::size_t>(d));
    for (int mu = 0; mu < d; ++mu) {
      e[static_cast<std::size_t>(mu)] = nearest_branch(p.quasienergy[static_cast<std::size_t>(label[static_cast<std::size_t>(mu)])],
                                                       centre.quasienergy[static_cast<std::size_t>(mu)], w);
    }
    return e;
  };
  const auto ep = shifted(delta), em = shifted(-delta);
  const auto ehp = shifted(0.5 * delta), ehm = shifted(-0.5 * delta);
  QuasienergyDerivatives out;
  out.mode = mode;
  out.energy = centre.quasienergy;
  out.states = centre.states;
  const double h = delta, hh = 0.5 * delta;
  for (int mu = 0; mu < d; ++mu) {
    const auto m = static_cast<std::size_t>(mu);
    const double e0 = centre.quasienergy[m];
    const double d1 = (ep[m] - em[m]) / (2.0 * h);
    const double d1h = (ehp[m] - ehm[m]) / (2.0 * hh);
    const double d2 = (ep[m] - 2.0 * e0 + em[m]) / (h * h);
    const double d2h = (ehp[m] - 2.0 * e0 + ehm[m]) / (hh * hh);
    out.first.push_back((4.0 * d1h - d1) / 3.0);
    out.second.push_back((4.0 * d2h - d2) / 3.0);
    out.first_error.push_back(std::abs(d1h - d1) / 3.0);
    out.second_error.push_back(std::abs(d2h - d2) / 3.0);
  }
  return out;
}

std::vector<cplx> expand_in_floquet_basis(const Vector& state, const Matrix& floquet_states) {
  if (state.size() != floquet_states.rows()) {
    throw ValidationError("state dimension does not match the Floquet basis");
  }
  const Matrix gram = floquet_states.adjoint() * floquet_states;
  Vector c;
  if (max_abs(gram - Matrix::Identity(gram.rows(), gram.cols())) < 1e-10) {
    c = floquet_states.adjoint() * state;
  } else {
    c = floquet_states.colPivHouseholderQr().solve(state);
  }
  return std::vector<cplx>(c.data(), c.data() + c.size());
}

}  // namespace prft
