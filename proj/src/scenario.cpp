#include "prft/scenario.hpp"

#include "prft/applications.hpp"
#include "prft/counting.hpp"
#include "prft/fock_oracle.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#ifndef PRFT_SCENARIO_DIR
#define PRFT_SCENARIO_DIR "scenarios"
#endif

namespace prft::scenario {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kVersion = "1.0.0";

using KeySet = std::set<std::string>;

const KeySet kTopKeys = {"name",     "description", "model",     "parameters", "initial_states",
                         "photons",  "counting",    "times",     "snapshots",  "tasks",
                         "oracle",   "integrator",  "tolerances", "applications", "seed",
                         "variants", "output"};
const KeySet kTasks = {"propagate", "cumulants",      "quasiprob",      "redistribute", "purity",
                       "oracle_compare", "coherence_time", "transfer_rate", "protocol"};
const KeySet kPhysicsTasks = {"propagate", "cumulants", "quasiprob", "redistribute", "purity",
                              "oracle_compare"};
const std::map<std::string, KeySet> kParamKeys = {
    {"jc", {"hz", "omega", "g", "phase"}},
    {"rabi", {"hz", "omega", "g", "phase"}},
    {"two_mode_jc", {"hz", "omega", "g1", "g2", "phi1", "phi2"}},
    {"three_mode_rabi", {"hz", "omegas", "couplings", "phases"}},
    {"custom", {"h0", "modes"}},
};
const KeySet kOracleModels = {"jc", "rabi", "two_mode_jc"};
const KeySet kStateKeys = {"label", "spin", "matter", "floquet", "superposition", "enforce"};
const KeySet kEnforceable = {"k1", "k2", "spin", "pn", "purity"};
const KeySet kPhotonKeys = {"mean", "variance", "fock"};
const KeySet kCountingKeys = {"mode", "n_chi", "window", "recheck"};
const KeySet kOracleKeys = {"semiclassical_elements", "pad", "leakage_tol"};
const KeySet kIntegratorKeys = {"steps_per_period"};
const KeySet kTolKeys = {"k1_abs", "k1_rel",      "k2_abs",         "k2_rel",
                         "spin_abs", "pn_abs",    "pn_l1",          "purity_abs",
                         "invariant", "energy_current", "floquet_purity_min"};
const KeySet kTimeKeys = {"start", "stop", "count", "step", "values", "unit"};
const KeySet kAppKeys = {"convention", "coherence", "link", "protocol"};
const KeySet kCoherenceKeys = {"kind", "frequency", "power", "slope_gap", "field", "volume", "reference"};
const KeySet kLinkKeys = {"atoms", "rabi", "frequency", "power", "loss_rate", "distance", "reference_rate"};
const KeySet kProtocolKeys = {"trials", "pulse", "window", "lossless", "expected_success"};
const KeySet kCustomModeKeys = {"op", "frequency", "coupling", "bare_coupling", "amplitude", "phase", "form"};

void check_keys(const json& obj, const KeySet& allowed, const std::string& where,
                std::vector<std::string>& report) {
  if (!obj.is_object()) {
    report.push_back(where + ": expected an object");
    return;
  }
  std::vector<std::string> unknown;
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = where + ": unknown keys";
    for (const auto& k : unknown) msg += " '" + k + "'";
    report.push_back(msg);
  }
}

double num(const json& obj, const std::string& key, std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ValidationError("missing numeric field '" + key + "'");
  }
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ValidationError("field '" + key + "' must be a number");
  return v.get<double>();
}

std::vector<double> num_list(const json& obj, const std::string& key) {
  if (!obj.contains(key) || !obj.at(key).is_array()) {
    throw ValidationError("field '" + key + "' must be an array of numbers");
  }
  std::vector<double> out;
  for (const auto& v : obj.at(key)) {
    if (!v.is_number()) throw ValidationError("field '" + key + "' must contain numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}

cplx parse_complex(const json& v) {
  if (v.is_number()) return cplx(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return cplx(v[0].get<double>(), v[1].get<double>());
  }
  throw ValidationError("complex numbers are written as x or [re, im]");
}

Matrix parse_matrix(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty()) throw ValidationError(what + " must be a non-empty list of rows");
  const auto n = static_cast<Eigen::Index>(v.size());
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw ValidationError(what + " must be square");
    }
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = parse_complex(row[static_cast<std::size_t>(c)]);
  }
  return m;
}

std::string model_of(const json& s) {
  if (!s.contains("model") || !s.at("model").is_string()) throw ValidationError("missing 'model'");
  const auto m = s.at("model").get<std::string>();
  if (!kParamKeys.count(m)) throw ValidationError("unknown model '" + m + "'");
  return m;
}

std::set<std::string> tasks_of(const json& s) {
  std::set<std::string> out;
  if (!s.contains("tasks")) return out;
  if (!s.at("tasks").is_array()) throw ValidationError("'tasks' must be an array");
  for (const auto& t : s.at("tasks")) {
    if (!t.is_string() || !kTasks.count(t.get<std::string>())) {
      throw ValidationError("unknown task " + t.dump());
    }
    out.insert(t.get<std::string>());
  }
  return out;
}

bool needs_physics(const std::set<std::string>& tasks) {
  for (const auto& t : tasks)
    if (kPhysicsTasks.count(t)) return true;
  return false;
}

DrivenSystem build_system(const json& s) {
  const auto model = model_of(s);
  if (!s.contains("parameters")) throw ValidationError("missing 'parameters'");
  const auto& p = s.at("parameters");
  if (model == "jc") return jc_system(num(p, "hz"), num(p, "omega"), num(p, "g"), num(p, "phase", 0.0));
  if (model == "rabi") return rabi_system(num(p, "hz"), num(p, "omega"), num(p, "g"), num(p, "phase", 0.0));
  if (model == "two_mode_jc") {
    return two_mode_jc_system(num(p, "hz"), num(p, "omega"), num(p, "g1"), num(p, "g2"),
                              num(p, "phi1", 0.0), num(p, "phi2", 0.0));
  }
  if (model == "three_mode_rabi") {
    return multimode_rabi_system(num(p, "hz"), num_list(p, "omegas"), num_list(p, "couplings"),
                                 num_list(p, "phases"));
  }
  const Matrix h0 = parse_matrix(p.at("h0"), "h0");
  std::vector<ModeCoupling> couplings;
  if (!p.contains("modes") || !p.at("modes").is_array()) throw ValidationError("custom model needs 'modes'");
  for (const auto& m : p.at("modes")) {
    ModeCoupling c;
    c.op = parse_matrix(m.at("op"), "mode operator");
    const double freq = num(m, "frequency");
    const double phase = num(m, "phase", 0.0);
    if (m.contains("coupling") == (m.contains("bare_coupling") || m.contains("amplitude"))) {
      throw ValidationError("give either 'coupling' or both 'bare_coupling' and 'amplitude'");
    }
    c.mode = m.contains("coupling") ? ModeSpec::from_effective(freq, num(m, "coupling"), phase)
                                    : ModeSpec::from_bare(freq, num(m, "bare_coupling"), num(m, "amplitude"), phase);
    const std::string form = m.value("form", std::string("hermitian"));
    if (form == "hermitian") {
      c.form = CouplingForm::kHermitian;
    } else if (form == "rotating_wave") {
      c.form = CouplingForm::kRotatingWave;
    } else {
      throw ValidationError("coupling form must be 'hermitian' or 'rotating_wave'");
    }
    couplings.push_back(std::move(c));
  }
  return build_driven_system(h0, std::move(couplings));
}

std::vector<double> parse_times(const json& s, const DrivenSystem& sys) {
  if (!s.contains("times")) throw ValidationError("missing 'times'");
  const auto& t = s.at("times");
  std::vector<double> out;
  double scale = 1.0;
  if (t.is_array()) {
    for (const auto& v : t) {
      if (!v.is_number()) throw ValidationError("'times' must contain numbers");
      out.push_back(v.get<double>());
    }
  } else if (t.is_object()) {
    const std::string unit = t.value("unit", std::string("natural"));
    if (unit == "period") {
      scale = sys.require_period();
    } else if (unit != "natural") {
      throw ValidationError("time unit must be 'natural' or 'period'");
    }
    if (t.contains("values")) {
      out = num_list(t, "values");
    } else {
      const double start = num(t, "start", 0.0), stop = num(t, "stop");
      int count = 0;
      if (t.contains("count")) {
        count = static_cast<int>(num(t, "count"));
      } else {
        const double step = num(t, "step");
        if (!(step > 0.0)) throw ValidationError("time step must be positive");
        count = static_cast<int>(std::llround((stop - start) / step)) + 1;
      }
      if (count < 1) throw ValidationError("time grid needs at least one point");
      for (int i = 0; i < count; ++i) {
        out.push_back(count == 1 ? start : start + (stop - start) * i / (count - 1));
      }
    }
  } else {
    throw ValidationError("'times' must be an array or an object");
  }
  for (auto& v : out) v *= scale;
  if (out.empty() || out.front() != 0.0) throw ValidationError("times must start at 0");
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (!(out[i] > out[i - 1])) throw ValidationError("times must be strictly increasing");
  }
  return out;
}

struct PhotonSpec {
  bool fock = false;
  int n = 0;
  double mean = 0.0;
  double variance = 0.0;
};

std::vector<PhotonSpec> parse_photons(const json& s) {
  std::vector<PhotonSpec> out;
  if (!s.contains("photons")) return out;
  for (const auto& p : s.at("photons")) {
    PhotonSpec ps;
    if (p.contains("fock")) {
      ps.fock = true;
      ps.n = static_cast<int>(num(p, "fock"));
      if (ps.n < 0) throw ValidationError("Fock index must be non-negative");
      ps.mean = ps.n;
    } else {
      ps.mean = num(p, "mean");
      ps.variance = num(p, "variance", ps.mean);
      PhotonicInitialState::squeezed(ps.mean, ps.variance, 0.0);
    }
    out.push_back(ps);
  }
  return out;
}

FockAmplitudes amplitudes_for(const PhotonSpec& p, double phase) {
  if (p.fock) return FockAmplitudes::fock(p.n);
  return gaussian_fock_amplitudes(p.mean, p.variance, phase, default_window(p.mean, p.variance));
}

Distribution distribution_of(const FockAmplitudes& a) {
  Distribution d;
  d.first = a.first;
  for (const auto& v : a.values) d.values.push_back(std::norm(v));
  return d;
}

struct CountingSpec {
  int mode = 0;
  int n_chi = 256;
  int window = -1;
  bool recheck = false;
};

CountingSpec parse_counting(const json& s) {
  CountingSpec c;
  if (s.contains("counting")) {
    const auto& j = s.at("counting");
    c.mode = static_cast<int>(num(j, "mode", 0.0));
    c.n_chi = static_cast<int>(num(j, "n_chi", 256.0));
    c.window = static_cast<int>(num(j, "window", -1.0));
    c.recheck = j.value("recheck", false);
  }
  CountingGrid(c.mode, c.n_chi);  // validates
  if (c.window < 0) c.window = c.n_chi / 2 - 1;
  if (c.n_chi < 2 * c.window + 2) {
    std::ostringstream os;
    os << "aliasing: N_chi=" << c.n_chi << " cannot resolve a window of +-" << c.window
       << " (needs N_chi >= " << 2 * c.window + 2 << ")";
    throw ValidationError(os.str());
  }
  return c;
}

struct Tolerances {
  double k1_abs = 0.5, k1_rel = 0.02, k2_abs = 1.0, k2_rel = 0.05;
  double spin_abs = 1e-2, pn_abs = 1e-8, pn_l1 = kNaN, purity_abs = 0.05;
  double invariant = 1e-8, energy_current = 1e-6, floquet_purity_min = 0.99;
};

Tolerances parse_tolerances(const json& s) {
  Tolerances t;
  if (!s.contains("tolerances")) return t;
  const auto& j = s.at("tolerances");
  t.k1_abs = num(j, "k1_abs", t.k1_abs);
  t.k1_rel = num(j, "k1_rel", t.k1_rel);
  t.k2_abs = num(j, "k2_abs", t.k2_abs);
  t.k2_rel = num(j, "k2_rel", t.k2_rel);
  t.spin_abs = num(j, "spin_abs", t.spin_abs);
  t.pn_abs = num(j, "pn_abs", t.pn_abs);
  t.pn_l1 = num(j, "pn_l1", t.pn_l1);
  t.purity_abs = num(j, "purity_abs", t.purity_abs);
  t.invariant = num(j, "invariant", t.invariant);
  t.energy_current = num(j, "energy_current", t.energy_current);
  t.floquet_purity_min = num(j, "floquet_purity_min", t.floquet_purity_min);
  return t;
}

bool needs_floquet(const json& s, const std::set<std::string>& tasks) {
  if (tasks.count("purity")) return true;
  if (!s.contains("initial_states")) return false;
  for (const auto& st : s.at("initial_states")) {
    if (st.contains("floquet") || st.contains("superposition")) return true;
  }
  return false;
}

struct MatterInit {
  std::string label;
  Vector psi;
  std::vector<cplx> coefficients;  // Floquet basis, empty when unavailable
  std::set<std::string> enforce;
};

Vector spin_state(const std::string& name) {
  Vector v(2);
  const double r = 1.0 / std::sqrt(2.0);
  if (name == "up") {
    v << 1.0, 0.0;
  } else if (name == "down") {
    v << 0.0, 1.0;
  } else if (name == "+x") {
    v << r, r;
  } else if (name == "-x") {
    v << r, -r;
  } else if (name == "+y") {
    v << r, cplx(0.0, r);
  } else if (name == "-y") {
    v << r, cplx(0.0, -r);
  } else {
    throw ValidationError("unknown spin state '" + name + "'");
  }
  return v;
}

std::vector<MatterInit> resolve_states(const json& s, int dim, const QuasienergyDerivatives* floquet) {
  if (!s.contains("initial_states") || !s.at("initial_states").is_array() || s.at("initial_states").empty()) {
    throw ValidationError("'initial_states' must be a non-empty array");
  }
  std::vector<MatterInit> out;
  int index = 0;
  for (const auto& st : s.at("initial_states")) {
    MatterInit m;
    m.label = st.value("label", "state" + std::to_string(index));
    m.enforce = kEnforceable;
    if (st.contains("enforce")) {
      m.enforce.clear();
      for (const auto& e : st.at("enforce")) m.enforce.insert(e.get<std::string>());
    }
    int kinds = 0;
    if (st.contains("spin")) {
      ++kinds;
      if (dim != 2) throw ValidationError("'spin' initial states need a two-level system");
      m.psi = spin_state(st.at("spin").get<std::string>());
    }
    if (st.contains("matter")) {
      ++kinds;
      const auto& a = st.at("matter");
      if (!a.is_array() || static_cast<int>(a.size()) != dim) {
        throw ValidationError("'matter' needs " + std::to_string(dim) + " amplitudes");
      }
      m.psi.resize(dim);
      for (int i = 0; i < dim; ++i) m.psi(i) = parse_complex(a[static_cast<std::size_t>(i)]);
      m.psi = normalized(m.psi);
    }
    if (st.contains("floquet")) {
      ++kinds;
      const int mu = st.at("floquet").get<int>();
      if (!floquet || mu < 0 || mu >= dim) throw ValidationError("invalid Floquet index");
      m.psi = floquet->states.col(mu);
    }
    if (st.contains("superposition")) {
      ++kinds;
      const auto& a = st.at("superposition");
      if (!floquet || !a.is_array() || static_cast<int>(a.size()) != dim) {
        throw ValidationError("'superposition' needs one coefficient per Floquet state");
      }
      Vector c(dim);
      for (int i = 0; i < dim; ++i) c(i) = parse_complex(a[static_cast<std::size_t>(i)]);
      m.psi = floquet->states * normalized(c);
    }
    if (kinds != 1) {
      throw ValidationError("initial state '" + m.label + "' needs exactly one of spin, matter, floquet, superposition");
    }
    if (floquet) m.coefficients = expand_in_floquet_basis(m.psi, floquet->states);
    out.push_back(std::move(m));
    ++index;
  }
  return out;
}

double fit_slope(const std::vector<double>& t, const std::vector<double>& y) {
  const auto n = static_cast<double>(t.size());
  if (t.size() < 2) return kNaN;
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sxy += (t[i] - mt) * (y[i] - my);
    sxx += (t[i] - mt) * (t[i] - mt);
  }
  return sxy / sxx;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---- SI quantities -------------------------------------------------------

double quantity(const json& obj, const std::string& key, const std::map<std::string, double>& units,
                const std::string& default_unit) {
  if (!obj.contains(key)) throw ValidationError("missing quantity '" + key + "'");
  const auto& q = obj.at(key);
  if (q.is_number()) return q.get<double>() * units.at(default_unit);
  if (!q.is_object() || !q.contains("value")) {
    throw ValidationError("quantity '" + key + "' must be a number or {value, unit}");
  }
  const std::string unit = q.value("unit", default_unit);
  const auto it = units.find(unit);
  if (it == units.end()) throw ValidationError("unknown unit '" + unit + "' for '" + key + "'");
  return num(q, "value") * it->second;
}

const std::map<std::string, double> kFrequencyUnits = {
    {"Hz", 1.0}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}, {"THz", 1e12}};
const std::map<std::string, double> kAngularUnits = {{"rad/s", 1.0}, {"krad/s", 1e3}, {"Mrad/s", 1e6}};
const std::map<std::string, double> kPowerUnits = {{"W", 1.0}, {"mW", 1e-3}, {"uW", 1e-6}, {"nW", 1e-9}};
const std::map<std::string, double> kDistanceUnits = {{"km", 1.0}, {"m", 1e-3}};
const std::map<std::string, double> kLossUnits = {{"1/km", 1.0}};
const std::map<std::string, double> kTimeUnits = {{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}};
const std::map<std::string, double> kFieldUnits = {{"V/m", 1.0}};
const std::map<std::string, double> kVolumeUnits = {{"m^3", 1.0}, {"cm^3", 1e-6}};

// Photon frequencies: Hz-family values are nominal and follow the convention,
// rad/s values are taken literally.
double photon_omega(const json& obj, const std::string& key, FrequencyConvention conv) {
  const auto& q = obj.at(key);
  if (q.is_object() && kAngularUnits.count(q.value("unit", std::string()))) {
    return quantity(obj, key, kAngularUnits, "rad/s");
  }
  return angular_frequency(quantity(obj, key, kFrequencyUnits, "Hz"), conv);
}

FrequencyConvention parse_convention(const json& apps) {
  const std::string c = apps.value("convention", std::string("ordinary"));
  if (c == "ordinary") return FrequencyConvention::kOrdinary;
  if (c == "literal") return FrequencyConvention::kLiteral;
  throw ValidationError("convention must be 'ordinary' or 'literal'");
}

FrequencyConvention other(FrequencyConvention c) {
  return c == FrequencyConvention::kOrdinary ? FrequencyConvention::kLiteral : FrequencyConvention::kOrdinary;
}

const char* name_of(FrequencyConvention c) {
  return c == FrequencyConvention::kOrdinary ? "ordinary" : "literal";
}

LinkParameters parse_link(const json& link, FrequencyConvention conv) {
  LinkParameters l;
  l.atoms = static_cast<int>(num(link, "atoms", 12.0));
  l.rabi = quantity(link, "rabi", kAngularUnits, "rad/s");
  l.omega = photon_omega(link, "frequency", conv);
  l.power = quantity(link, "power", kPowerUnits, "W");
  l.loss_rate = quantity(link, "loss_rate", kLossUnits, "1/km");
  l.distance = quantity(link, "distance", kDistanceUnits, "km");
  l.validate();
  return l;
}

// ---- run context ---------------------------------------------------------

struct Context {
  RunResult* result = nullptr;
  int threads = 0;
  std::uint64_t seed = 1;
  std::vector<std::pair<std::string, double>> timings;

  void check(const std::string& name, int variant, const std::string& state, double value,
             double tolerance, bool enforced = true, bool upper_bound = true) {
    Invariant inv;
    inv.name = name;
    inv.variant = variant;
    inv.state = state;
    inv.value = value;
    inv.tolerance = tolerance;
    inv.enforced = enforced;
    inv.passed = std::isfinite(value) && (upper_bound ? value <= tolerance : value >= tolerance);
    result->invariants.push_back(inv);
  }
};

class Stopwatch {
 public:
  Stopwatch(Context& ctx, std::string name)
      : ctx_(ctx), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() {
    ctx_.timings.emplace_back(
        name_, std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count());
  }

 private:
  Context& ctx_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

int time_index(const std::vector<double>& times, double t) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> snapshot_indices(const json& s, const std::vector<double>& times, double scale) {
  std::vector<int> out;
  if (!s.contains("snapshots")) {
    for (std::size_t i = 0; i < times.size(); ++i) out.push_back(static_cast<int>(i));
    return out;
  }
  for (const auto& v : s.at("snapshots")) {
    if (!v.is_number()) throw ValidationError("'snapshots' must contain numbers");
    const int i = time_index(times, v.get<double>() * scale);
    if (i < 0) throw ValidationError("snapshot time " + v.dump() + " is not on the time grid");
    out.push_back(i);
  }
  return out;
}

struct StateRun {
  std::vector<Cumulants> prft;
  std::vector<Vector> spin_states;  // U_0(t) psi
  std::vector<std::optional<Quasiprobabilities>> q;
  std::map<int, std::map<int, std::array<double, 3>>> pn;  // time index -> n -> (redistributed, projector, oracle)
  std::vector<double> oracle_k[4];
  std::vector<std::array<double, 3>> oracle_spin;
  std::vector<double> purity_prft, purity_oracle;
  json summary = json::object();
};

void put_pn(StateRun& r, int m, int n, int slot, double v) {
  r.pn[m][n][static_cast<std::size_t>(slot)] = v;
}

void init_pn_row(StateRun& r, int m, int n) {
  if (!r.pn[m].count(n)) r.pn[m][n] = {kNaN, kNaN, kNaN};
}

std::array<double, 3> spin_vector(const Vector& v) {
  const auto ops = spin_half_operators();
  return {v.dot(ops.x * v).real(), v.dot(ops.y * v).real(), v.dot(ops.z * v).real()};
}

// Redistributed PRFT distribution against the oracle marginal at one time.
double l1_to_oracle(const StateRun& r, int m) {
  const auto it = r.pn.find(m);
  if (it == r.pn.end()) return kNaN;
  double dist = 0.0;
  for (const auto& [k, row] : it->second) {
    const double a = std::isnan(row[0]) ? 0.0 : row[0];
    const double b = std::isnan(row[2]) ? 0.0 : row[2];
    dist += std::abs(a - b);
  }
  return dist;
}

double allowed(double reference, double rel, double abs_tol) {
  return std::max(rel * std::abs(reference), abs_tol);
}

// ---- physics ---------------------------------------------------------------

void run_physics(const json& s, int vi, const DrivenSystem& sys, const std::set<std::string>& tasks,
                 Context& ctx, json& vsum) {
  const std::string model = model_of(s);
  const auto times = parse_times(s, sys);
  double time_scale = 1.0;
  if (s.at("times").is_object() && s.at("times").value("unit", std::string()) == "period") {
    time_scale = sys.require_period();
  }
  const auto snaps = snapshot_indices(s, times, time_scale);
  const auto counting = parse_counting(s);
  if (counting.mode >= sys.num_modes()) throw ValidationError("counted mode does not exist");
  const auto photons = parse_photons(s);
  const auto tol = parse_tolerances(s);
  IntegratorSpec integ;
  if (s.contains("integrator")) {
    integ.steps_per_period = static_cast<int>(num(s.at("integrator"), "steps_per_period", 2000.0));
  }
  const bool have_photons = static_cast<int>(photons.size()) == sys.num_modes();
  if ((tasks.count("redistribute") || tasks.count("oracle_compare") || tasks.count("purity")) && !have_photons) {
    throw ValidationError("'photons' must list one entry per mode for redistribute/oracle_compare/purity");
  }
  const double counted_phase = sys.mode(counting.mode).phase;

  std::optional<QuasienergyDerivatives> floquet;
  if (needs_floquet(s, tasks) || sys.period()) {
    Stopwatch sw(ctx, "floquet");
    if (needs_floquet(s, tasks)) sys.require_period();
    floquet = quasienergy_phase_derivatives(sys, counting.mode, 1e-3, integ);
    vsum["quasienergies"] = floquet->energy;
    vsum["quasienergy_slopes"] = floquet->first;
    vsum["quasienergy_curvatures"] = floquet->second;
    vsum["slope_error_estimates"] = floquet->first_error;
  }
  const auto states = resolve_states(s, sys.dim(), floquet ? &*floquet : nullptr);

  const CountingGrid grid(counting.mode, counting.n_chi);
  std::optional<GeneralizedPropagatorSet> set;
  {
    Stopwatch sw(ctx, "propagate");
    set.emplace(propagate_generalized(sys, grid, times, integ, ctx.threads));
  }
  std::optional<GeneralizedPropagatorSet> fine;
  if (counting.recheck) {
    Stopwatch sw(ctx, "propagate_recheck");
    fine.emplace(propagate_generalized(sys, CountingGrid(counting.mode, 2 * counting.n_chi), times, integ, ctx.threads));
  }

  // Parseval sum rule and aliasing indicator, state independent
  std::vector<PhotonResolvedOperators> resolved;
  {
    Stopwatch sw(ctx, "photon_resolved");
    double parseval = 0.0, nyquist = 0.0;
    for (int m = 0; m < set->num_times(); ++m) {
      resolved.push_back(photon_resolved_operators(*set, m));
      const auto& ops = resolved.back();
      Matrix acc = Matrix::Zero(sys.dim(), sys.dim());
      for (int k = 0; k < ops.size(); ++k) acc += ops(k).adjoint() * ops(k);
      parseval = std::max(parseval, max_abs(acc - Matrix::Identity(sys.dim(), sys.dim())));
      nyquist = std::max(nyquist, ops.aliasing_norm());
    }
    ctx.check("parseval_sum_rule", vi, "", parseval, 1e-10);
    vsum["nyquist_component"] = nyquist;
    if (nyquist > 1e-8) vsum["aliasing_warning"] = "photon-resolved operators reach the Nyquist index";
  }

  std::vector<StateRun> runs(states.size());
  for (std::size_t si = 0; si < states.size(); ++si) {
    Stopwatch sw(ctx, "statistics:" + states[si].label);
    const auto& st = states[si];
    auto& r = runs[si];
    const auto mgf = dynamical_mgf(*set, st.psi);
    double norm_err = 0.0, conj_err = 0.0, qsum_err = 0.0, imag_q = 0.0;
    const int n = grid.size();
    for (int m = 0; m < mgf.num_times(); ++m) {
      norm_err = std::max(norm_err, std::abs(mgf.at(m, 0) - 1.0));
      for (int j = 1; j < n; ++j) conj_err = std::max(conj_err, std::abs(mgf.at(m, -j) - std::conj(mgf.at(m, j))));
      r.prft.push_back(cumulants(mgf, m));
      r.spin_states.push_back(set->at(m, 0) * st.psi);
      try {
        r.q.push_back(quasiprobabilities(mgf, m, counting.window));
        qsum_err = std::max(qsum_err, std::abs(r.q.back()->sum() - 1.0));
        imag_q = std::max(imag_q, r.q.back()->imaginary_residue);
      } catch (const AliasingError& e) {
        r.q.push_back(std::nullopt);
        ctx.check("quasiprobability_window", vi, st.label, kNaN, 0.0);
        r.summary["aliasing_error"] = e.what();
      }
    }
    ctx.check("mgf_normalization", vi, st.label, norm_err, tol.invariant);
    ctx.check("mgf_conjugation_symmetry", vi, st.label, conj_err, tol.invariant);
    ctx.check("quasiprobability_sum", vi, st.label, qsum_err, tol.invariant);
    ctx.check("quasiprobability_imaginary_residue", vi, st.label, imag_q, 1e-10);
    if (fine) {
      const auto mgf2 = dynamical_mgf(*fine, st.psi);
      double worst = 0.0;
      for (int m = 0; m < mgf.num_times(); ++m) worst = std::max(worst, aliasing_discrepancy(mgf, mgf2, m));
      ctx.check("aliasing_recheck_2N", vi, st.label, worst, tol.invariant);
    }
    if (sys.num_modes() == 1) {
      const auto de = matter_energy_change(sys, st.psi, times, integ);
      double worst = 0.0, scale = 1.0;
      for (std::size_t m = 0; m < times.size(); ++m) {
        worst = std::max(worst, std::abs(sys.mode(0).frequency * r.prft[m].k1 + de[m]));
        scale = std::max(scale, std::abs(de[m]));
      }
      ctx.check("energy_current_identity", vi, st.label, worst / scale, tol.energy_current);
    }
    // summary numbers
    std::vector<double> k1s, k2s;
    for (const auto& c : r.prft) {
      k1s.push_back(c.k1);
      k2s.push_back(c.k2);
    }
    r.summary["label"] = st.label;
    r.summary["kappa1_slope"] = fit_slope(times, k1s);
    r.summary["kappa1_final"] = k1s.back();
    r.summary["kappa2_final"] = k2s.back();
    double k2max = 0.0;
    for (double v : k2s) k2max = std::max(k2max, std::abs(v));
    r.summary["kappa2_max_abs"] = k2max;
    if (!st.coefficients.empty()) {
      std::vector<double> w;
      double predicted = 0.0;
      for (std::size_t mu = 0; mu < st.coefficients.size(); ++mu) {
        w.push_back(std::norm(st.coefficients[mu]));
        predicted -= w.back() * floquet->first[mu];
      }
      r.summary["floquet_weights"] = w;
      r.summary["floquet_slope_prediction"] = predicted;
    }
    json minq = json::array();
    for (int m : snaps) {
      if (r.q[static_cast<std::size_t>(m)]) {
        minq.push_back({{"t", times[static_cast<std::size_t>(m)]}, {"min_q", r.q[static_cast<std::size_t>(m)]->min()},
                        {"sum_q", r.q[static_cast<std::size_t>(m)]->sum()}});
      }
    }
    r.summary["quasiprobability_minima"] = minq;

    if (tasks.count("redistribute") && have_photons) {
      const auto amps = amplitudes_for(photons[static_cast<std::size_t>(counting.mode)], counted_phase);
      const auto p0 = distribution_of(amps);
      double psum = 0.0, negative = 0.0;
      for (int m : snaps) {
        if (!r.q[static_cast<std::size_t>(m)]) continue;
        // negativity is reported as an invariant, never clipped
        const auto p = redistribute(*r.q[static_cast<std::size_t>(m)], p0,
                                    std::numeric_limits<double>::infinity());
        psum = std::max(psum, std::abs(p.sum() - 1.0));
        for (int k = p.first; k <= p.last(); ++k) {
          negative = std::max(negative, -p.at(k));
          init_pn_row(r, m, k);
          put_pn(r, m, k, 0, p.at(k));
        }
        // direct projector expectation on the same support
        const auto& ops = resolved[static_cast<std::size_t>(m)];
        int lo = amps.first - counting.window, hi = amps.last() + counting.window;
        if (!r.pn[m].empty()) {
          lo = r.pn[m].begin()->first;
          hi = r.pn[m].rbegin()->first;
        }
        for (int k = std::max(0, lo); k <= hi; ++k) {
          init_pn_row(r, m, k);
          put_pn(r, m, k, 1, fock_projector_expectation(ops, st.psi, amps, k));
        }
      }
      ctx.check("redistributed_probability_sum", vi, st.label, psum, tol.invariant);
      ctx.check("redistributed_negative_residue", vi, st.label, negative, tol.invariant);
      r.summary["redistributed_negative_residue"] = negative;
    }
  }

  // ---- oracle ----------------------------------------------------------------
  if (tasks.count("oracle_compare")) {
    Stopwatch sw(ctx, "oracle");
    const auto& p = s.at("parameters");
    const json oracle = s.value("oracle", json::object());
    for (std::size_t si = 0; si < states.size(); ++si) {
      const auto& st = states[si];
      auto& r = runs[si];
      const bool enforce_k1 = st.enforce.count("k1"), enforce_k2 = st.enforce.count("k2");
      double k1_dev = 0.0, k2_dev = 0.0, spin_dev = 0.0;
      if (model == "rabi") {
        const auto& ph = photons[0];
        RabiOracleOptions o;
        o.hz = num(p, "hz");
        o.omega = num(p, "omega");
        o.bare_coupling = num(p, "g") / std::sqrt(ph.fock ? ph.n + 1.0 : ph.mean);
        o.pad = static_cast<int>(num(oracle, "pad", 40.0));
        o.leakage_tol = num(oracle, "leakage_tol", 1e-8);
        const auto amps = amplitudes_for(ph, counted_phase);
        const auto snap = evolve_rabi_fock(o, st.psi, amps, times);
        for (std::size_t m = 0; m < times.size(); ++m) {
          const double k1 = snap[m].photons.k1 - snap[0].photons.k1;
          const double k2 = snap[m].photons.k2 - snap[0].photons.k2;
          r.oracle_k[0].push_back(k1);
          r.oracle_k[1].push_back(k2);
          r.oracle_k[2].push_back(snap[m].photons.k3 - snap[0].photons.k3);
          r.oracle_k[3].push_back(snap[m].photons.k4 - snap[0].photons.k4);
          r.oracle_spin.push_back({snap[m].spin.x, snap[m].spin.y, snap[m].spin.z});
          r.purity_oracle.push_back(snap[m].spin.purity());
          k1_dev = std::max(k1_dev, std::abs(r.prft[m].k1 - k1) / allowed(k1, tol.k1_rel, tol.k1_abs));
          k2_dev = std::max(k2_dev, std::abs(r.prft[m].k2 - k2) / allowed(k2, tol.k2_rel, tol.k2_abs));
          const auto sv = spin_vector(r.spin_states[m]);
          for (int c = 0; c < 3; ++c) {
            spin_dev = std::max(spin_dev, std::abs(sv[static_cast<std::size_t>(c)] - r.oracle_spin.back()[static_cast<std::size_t>(c)]));
          }
        }
        double l1 = 0.0;
        for (int m : snaps) {
          const auto& marg = snap[static_cast<std::size_t>(m)].photons;
          for (std::size_t i = 0; i < marg.p.size(); ++i) {
            const int k = marg.first + static_cast<int>(i);
            if (marg.p[i] < 1e-300 && !r.pn[m].count(k)) continue;
            init_pn_row(r, m, k);
            put_pn(r, m, k, 2, marg.p[i]);
          }
          l1 = std::max(l1, l1_to_oracle(r, m));
        }
        if (std::isfinite(tol.pn_l1) && tasks.count("redistribute")) {
          ctx.check("oracle_distribution_l1", vi, st.label, l1, tol.pn_l1, st.enforce.count("pn") > 0);
          r.summary["oracle_distribution_l1_max"] = l1;
        }
        ctx.check("oracle_spin_deviation", vi, st.label, spin_dev, tol.spin_abs, st.enforce.count("spin") > 0);
      } else if (model == "jc") {
        const auto& ph = photons[0];
        const double bare = num(p, "g") / std::sqrt(ph.fock ? ph.n + 1.0 : ph.mean);
        const auto amps = amplitudes_for(ph, counted_phase);
        const auto res = evolve_jc_fock(num(p, "hz"), num(p, "omega"), bare, st.psi, amps, times);
        double pn_dev = 0.0, sum_dev = 0.0;
        for (std::size_t m = 0; m < times.size(); ++m) {
          const auto& ops = resolved[m];
          double total = 0.0;
          std::vector<double> pvals;
          for (std::size_t i = 0; i < res.pn[m].size(); ++i) {
            const int k = res.first + static_cast<int>(i);
            const double prft = fock_projector_expectation(ops, st.psi, amps, k);
            pvals.push_back(prft);
            total += prft;
            pn_dev = std::max(pn_dev, std::abs(prft - res.pn[m][i]));
          }
          sum_dev = std::max(sum_dev, std::abs(total - 1.0));
          const auto marg = marginal_from_distribution(res.first, res.pn[m]);
          const auto marg0 = marginal_from_distribution(res.first, res.pn[0]);
          r.oracle_k[0].push_back(marg.k1 - marg0.k1);
          r.oracle_k[1].push_back(marg.k2 - marg0.k2);
          r.oracle_k[2].push_back(marg.k3 - marg0.k3);
          r.oracle_k[3].push_back(marg.k4 - marg0.k4);
          k1_dev = std::max(k1_dev, std::abs(r.prft[m].k1 - r.oracle_k[0].back()) / allowed(r.oracle_k[0].back(), tol.k1_rel, tol.k1_abs));
          k2_dev = std::max(k2_dev, std::abs(r.prft[m].k2 - r.oracle_k[1].back()) / allowed(r.oracle_k[1].back(), tol.k2_rel, tol.k2_abs));
          if (std::find(snaps.begin(), snaps.end(), static_cast<int>(m)) != snaps.end()) {
            for (std::size_t i = 0; i < res.pn[m].size(); ++i) {
              const int k = res.first + static_cast<int>(i);
              init_pn_row(r, static_cast<int>(m), k);
              put_pn(r, static_cast<int>(m), k, 1, pvals[i]);
              put_pn(r, static_cast<int>(m), k, 2, res.pn[m][i]);
            }
          }
        }
        ctx.check("oracle_occupation_deviation", vi, st.label, pn_dev, tol.pn_abs, st.enforce.count("pn") > 0);
        ctx.check("occupation_sum_rule", vi, st.label, sum_dev, 1e-12);
      } else if (model == "two_mode_jc") {
        TwoModeJcOracleOptions o;
        o.hz = num(p, "hz");
        o.omega = num(p, "omega");
        o.g1 = num(p, "g1");
        o.g2 = num(p, "g2");
        o.semiclassical_elements = oracle.value("semiclassical_elements", true);
        o.leakage_tol = num(oracle, "leakage_tol", 1e-8);
        o.schroedinger_spin = true;
        if (oracle.contains("pad")) {
          o.pad1 = static_cast<int>(num(oracle, "pad"));
        } else {
          double drift = 0.0;
          if (floquet) {
            for (double e : floquet->first) drift = std::max(drift, std::abs(e));
          }
          o.pad1 = 60 + static_cast<int>(std::ceil(1.2 * drift * times.back()));
        }
        TwoModeInitialState init;
        init.spin = st.psi;
        for (int k = 0; k < 2; ++k) {
          const auto& ph = photons[static_cast<std::size_t>(k)];
          if (ph.fock) throw ValidationError("two-mode oracle needs Gaussian photon states");
          (k == 0 ? init.mode1 : init.mode2) =
              PhotonicInitialState::squeezed(ph.mean, ph.variance, sys.mode(k).phase);
        }
        const auto snap = evolve_two_mode_jc_fock(o, init, times);
        double nex = 0.0, blocks = 0.0, l1 = 0.0;
        for (std::size_t m = 0; m < times.size(); ++m) {
          const auto& marg = counting.mode == 0 ? snap[m].mode1 : snap[m].mode2;
          const auto& marg0 = counting.mode == 0 ? snap[0].mode1 : snap[0].mode2;
          r.oracle_k[0].push_back(marg.k1 - marg0.k1);
          r.oracle_k[1].push_back(marg.k2 - marg0.k2);
          r.oracle_k[2].push_back(marg.k3 - marg0.k3);
          r.oracle_k[3].push_back(marg.k4 - marg0.k4);
          r.oracle_spin.push_back({snap[m].spin.x, snap[m].spin.y, snap[m].spin.z});
          r.purity_oracle.push_back(snap[m].spin.purity());
          k1_dev = std::max(k1_dev, std::abs(r.prft[m].k1 - r.oracle_k[0].back()) / allowed(r.oracle_k[0].back(), tol.k1_rel, tol.k1_abs));
          k2_dev = std::max(k2_dev, std::abs(r.prft[m].k2 - r.oracle_k[1].back()) / allowed(r.oracle_k[1].back(), tol.k2_rel, tol.k2_abs));
          nex = std::max(nex, std::abs(snap[m].mean_excitation - snap[0].mean_excitation));
          for (std::size_t b = 0; b < snap[m].block_norms.size(); ++b) {
            blocks = std::max(blocks, std::abs(snap[m].block_norms[b] - snap[0].block_norms[b]));
          }
          blocks = std::max(blocks, std::abs(snap[m].norm - 1.0));
          if (std::find(snaps.begin(), snaps.end(), static_cast<int>(m)) != snaps.end()) {
            for (std::size_t i = 0; i < marg.p.size(); ++i) {
              const int k = marg.first + static_cast<int>(i);
              if (marg.p[i] < 1e-300 && !r.pn[static_cast<int>(m)].count(k)) continue;
              init_pn_row(r, static_cast<int>(m), k);
              put_pn(r, static_cast<int>(m), k, 2, marg.p[i]);
            }
            l1 = std::max(l1, l1_to_oracle(r, static_cast<int>(m)));
          }
        }
        ctx.check("excitation_number_conservation", vi, st.label, nex, 1e-9);
        ctx.check("excitation_block_norms", vi, st.label, blocks, 1e-9);
        if (std::isfinite(tol.pn_l1) && tasks.count("redistribute")) {
          ctx.check("oracle_distribution_l1", vi, st.label, l1, tol.pn_l1, st.enforce.count("pn") > 0);
          r.summary["oracle_distribution_l1_max"] = l1;
        }
      }
      ctx.check("oracle_kappa1 (deviation/allowed)", vi, st.label, k1_dev, 1.0, enforce_k1);
      ctx.check("oracle_kappa2 (deviation/allowed)", vi, st.label, k2_dev, 1.0, enforce_k2);
      r.summary["oracle_kappa1_slope"] = fit_slope(times, r.oracle_k[0]);
      r.summary["oracle_kappa1_final"] = r.oracle_k[0].back();
      r.summary["oracle_kappa2_final"] = r.oracle_k[1].back();
      r.summary["oracle_kappa1_deviation_ratio"] = k1_dev;
      r.summary["oracle_kappa2_deviation_ratio"] = k2_dev;
    }
  }

  // ---- purity ------------------------------------------------------------------
  if (tasks.count("purity")) {
    const auto& ph = photons[static_cast<std::size_t>(counting.mode)];
    for (std::size_t si = 0; si < states.size(); ++si) {
      const auto& st = states[si];
      auto& r = runs[si];
      const bool two_level = st.coefficients.size() == 2;
      double worst = 0.0, lowest = 1.0;
      const bool floquet_state =
          two_level && std::max(std::norm(st.coefficients[0]), std::norm(st.coefficients[1])) > 1.0 - 1e-9;
      for (std::size_t m = 0; m < times.size(); ++m) {
        const double pr = two_level ? purity_prediction(std::norm(st.coefficients[0]), std::norm(st.coefficients[1]),
                                                        floquet->first[0], floquet->first[1],
                                                        ph.fock ? 1.0 : ph.variance, times[m])
                                    : kNaN;
        r.purity_prft.push_back(pr);
        if (!r.purity_oracle.empty()) {
          worst = std::max(worst, std::abs(pr - r.purity_oracle[m]));
          lowest = std::min(lowest, r.purity_oracle[m]);
        }
      }
      if (!r.purity_oracle.empty() && two_level) {
        ctx.check("purity_prediction_vs_oracle", vi, st.label, worst, tol.purity_abs, st.enforce.count("purity") > 0);
        if (floquet_state) {
          ctx.check("floquet_state_purity_minimum", vi, st.label, lowest, tol.floquet_purity_min, true, false);
        }
        r.summary["purity_oracle_final"] = r.purity_oracle.back();
      }
      r.summary["purity_prft_final"] = finite_or_null(r.purity_prft.back());
    }
  }

  // ---- tables ------------------------------------------------------------------
  auto& res = *ctx.result;
  json state_summaries = json::array();
  for (std::size_t si = 0; si < states.size(); ++si) {
    auto& r = runs[si];
    const double sidx = static_cast<double>(si);
    for (std::size_t m = 0; m < times.size(); ++m) {
      const auto& c = r.prft[m];
      auto ok = [&](int k) { return r.oracle_k[k].empty() ? kNaN : r.oracle_k[k][m]; };
      res.cumulants.add_row({static_cast<double>(vi), sidx, times[m], static_cast<double>(counting.mode), c.k1, c.k2,
                             c.k3, c.k4, ok(0), ok(1), ok(2), ok(3)});
      const auto sv = spin_vector(r.spin_states[m]);
      const bool has = !r.oracle_spin.empty();
      res.spin.add_row({static_cast<double>(vi), sidx, times[m], sv[0], sv[1], sv[2],
                        has ? r.oracle_spin[m][0] : kNaN, has ? r.oracle_spin[m][1] : kNaN,
                        has ? r.oracle_spin[m][2] : kNaN});
      if (!r.purity_prft.empty() || !r.purity_oracle.empty()) {
        res.purity.add_row({static_cast<double>(vi), sidx, times[m],
                            r.purity_prft.empty() ? kNaN : r.purity_prft[m],
                            r.purity_oracle.empty() ? kNaN : r.purity_oracle[m]});
      }
    }
    if (tasks.count("quasiprob")) {
      for (int m : snaps) {
        const auto& q = r.q[static_cast<std::size_t>(m)];
        if (!q) continue;
        for (int k = q->first; k <= q->last(); ++k) {
          res.quasiprob.add_row({static_cast<double>(vi), sidx, times[static_cast<std::size_t>(m)], static_cast<double>(k), q->at(k)});
        }
      }
    }
    for (const auto& [m, rows] : r.pn) {
      for (const auto& [k, row] : rows) {
        res.pn.add_row({static_cast<double>(vi), sidx, times[static_cast<std::size_t>(m)], static_cast<double>(k), row[0], row[1], row[2]});
      }
    }
    state_summaries.push_back(r.summary);
  }
  vsum["states"] = state_summaries;
}

// ---- applications -----------------------------------------------------------

void run_applications(const json& s, int vi, const std::set<std::string>& tasks, Context& ctx, json& vsum) {
  if (!s.contains("applications")) throw ValidationError("application tasks need an 'applications' block");
  const auto& apps = s.at("applications");
  const auto conv = parse_convention(apps);
  json out = json::object();
  out["convention"] = name_of(conv);
  if (tasks.count("coherence_time")) {
    const auto& c = apps.at("coherence");
    const std::string kind = c.value("kind", std::string("traveling"));
    const double gap = quantity(c, "slope_gap", kAngularUnits, "rad/s");
    auto compute = [&](FrequencyConvention cv) {
      const double w = photon_omega(c, "frequency", cv);
      if (kind == "traveling") {
        return coherence_time_traveling({{0.0, gap}}, {quantity(c, "power", kPowerUnits, "W")}, {w});
      }
      if (kind == "closed") {
        return coherence_time_closed({{0.0, gap}}, quantity(c, "field", kFieldUnits, "V/m"),
                                     quantity(c, "volume", kVolumeUnits, "m^3"), {w});
      }
      throw ValidationError("coherence kind must be 'traveling' or 'closed'");
    };
    const double declared = compute(conv), alternative = compute(other(conv));
    out["coherence_time"] = {{"kind", kind},
                             {"declared_convention", name_of(conv)},
                             {"t_c", finite_or_null(declared)},
                             {"alternative_convention", name_of(other(conv))},
                             {"t_c_alternative", finite_or_null(alternative)}};
    if (c.contains("reference")) {
      const double ref = num(c.at("reference"), "value");
      const double factor = num(c.at("reference"), "factor", 10.0);
      const double ratio = std::max(declared / ref, ref / declared);
      out["coherence_time"]["reference"] = ref;
      out["coherence_time"]["ratio_to_reference"] = ratio;
      out["coherence_time"]["ratio_to_reference_alternative"] =
          std::max(alternative / ref, ref / alternative);
      ctx.check("coherence_time_order_of_magnitude", vi, "", ratio, factor);
    }
  }
  std::optional<LinkParameters> link;
  std::optional<double> rate;
  if (apps.contains("link")) link = parse_link(apps.at("link"), conv);
  if (tasks.count("transfer_rate")) {
    if (!link) throw ValidationError("transfer_rate needs a 'link' block");
    rate = transfer_rate(*link);
    const double pulse = 1.0 / *rate;
    const double sep = peak_separation(*link, pulse), broad = loss_broadening(*link, pulse);
    out["transfer_rate"] = {{"f_hz", *rate},
                            {"pulse_s", pulse},
                            {"peak_separation", sep},
                            {"broadening", broad},
                            {"identity_residual", std::abs(sep - broad) / sep}};
    LinkParameters alt = parse_link(apps.at("link"), other(conv));
    out["transfer_rate"]["f_hz_alternative_convention"] = transfer_rate(alt);
    ctx.check("separation_equals_broadening_at_inverse_rate", vi, "", std::abs(sep - broad) / sep, 1e-9);
    if (apps.at("link").contains("reference_rate")) {
      const auto& ref = apps.at("link").at("reference_rate");
      const double target = num(ref, "value");
      const double rel = std::abs(*rate - target) / target;
      out["transfer_rate"]["relative_deviation_from_reference"] = rel;
      ctx.check("transfer_rate_reference", vi, "", rel, num(ref, "rel", 0.05));
    }
  }
  if (tasks.count("protocol")) {
    if (!link) throw ValidationError("protocol needs a 'link' block");
    const auto& pj = apps.at("protocol");
    LinkParameters l = *link;
    if (pj.value("lossless", false)) l.loss_rate = 0.0;
    double pulse = 0.0;
    if (pj.contains("pulse") && pj.at("pulse").is_string()) {
      if (pj.at("pulse").get<std::string>() != "inverse_rate") throw ValidationError("pulse must be a time or 'inverse_rate'");
      pulse = 1.0 / transfer_rate(*link);
    } else {
      pulse = quantity(pj, "pulse", kTimeUnits, "s");
    }
    std::optional<double> window;
    if (pj.contains("window")) window = num(pj, "window");
    const auto trials = static_cast<long long>(num(pj, "trials", 100000.0));
    const auto r = protocol_simulate(l, pulse, trials, ctx.seed, window, ctx.threads);
    out["protocol"] = {{"pulse_s", r.pulse},
                       {"trials", r.trials},
                       {"accepted", r.accepted},
                       {"success_rate", r.success_rate},
                       {"success_standard_error", r.success_standard_error},
                       {"analytic_success", r.analytic_success},
                       {"misclassification", r.misclassification},
                       {"fidelity_proxy", r.fidelity_proxy},
                       {"peak_separation", r.separation},
                       {"broadening", r.broadening},
                       {"difference_width", r.difference_width},
                       {"window", r.window},
                       {"information_loss", r.information_loss},
                       {"seed", ctx.seed}};
    ctx.check("protocol_success_vs_analytic (standard errors)", vi, "",
              std::abs(r.success_rate - r.analytic_success) / std::max(r.success_standard_error, 1e-12), 3.0);
    if (pj.contains("expected_success")) {
      const auto& e = pj.at("expected_success");
      ctx.check("protocol_expected_success", vi, "", std::abs(r.success_rate - num(e, "value")), num(e, "abs", 0.005));
    }
  }
  vsum["applications"] = out;
}

json merged_variant(const json& base, const json& patch) {
  json v = base;
  v.erase("variants");
  v.merge_patch(patch);
  return v;
}

std::vector<json> variants_of(const json& s) {
  std::vector<json> out;
  if (s.contains("variants")) {
    if (!s.at("variants").is_array() || s.at("variants").empty()) {
      throw ValidationError("'variants' must be a non-empty array of overrides");
    }
    for (const auto& p : s.at("variants")) {
      if (!p.is_object()) throw ValidationError("each variant must be an object");
      out.push_back(merged_variant(s, p));
    }
  } else {
    json v = s;
    out.push_back(v);
  }
  return out;
}

void schema_report(const json& s, const std::string& where, std::vector<std::string>& report) {
  check_keys(s, kTopKeys, where, report);
  if (!s.is_object()) return;
  try {
    const auto model = model_of(s);
    if (s.contains("parameters")) check_keys(s.at("parameters"), kParamKeys.at(model), where + ".parameters", report);
    const auto tasks = tasks_of(s);
    if (tasks.count("oracle_compare") && !kOracleModels.count(model)) {
      report.push_back(where + ": oracle_compare has no exact oracle for model '" + model + "'");
    }
    if (model == "custom" && s.contains("parameters") && s.at("parameters").contains("modes")) {
      for (const auto& m : s.at("parameters").at("modes")) check_keys(m, kCustomModeKeys, where + ".parameters.modes[]", report);
    }
  } catch (const std::exception& e) {
    report.push_back(where + ": " + e.what());
  }
  if (s.contains("initial_states") && s.at("initial_states").is_array()) {
    for (const auto& st : s.at("initial_states")) {
      check_keys(st, kStateKeys, where + ".initial_states[]", report);
      if (st.is_object() && st.contains("enforce")) {
        for (const auto& e : st.at("enforce")) {
          if (!e.is_string() || !kEnforceable.count(e.get<std::string>())) {
            report.push_back(where + ": unknown enforce entry " + e.dump());
          }
        }
      }
    }
  }
  if (s.contains("photons") && s.at("photons").is_array()) {
    for (const auto& p : s.at("photons")) check_keys(p, kPhotonKeys, where + ".photons[]", report);
  }
  if (s.contains("counting")) check_keys(s.at("counting"), kCountingKeys, where + ".counting", report);
  if (s.contains("oracle")) check_keys(s.at("oracle"), kOracleKeys, where + ".oracle", report);
  if (s.contains("integrator")) check_keys(s.at("integrator"), kIntegratorKeys, where + ".integrator", report);
  if (s.contains("tolerances")) check_keys(s.at("tolerances"), kTolKeys, where + ".tolerances", report);
  if (s.contains("times") && s.at("times").is_object()) check_keys(s.at("times"), kTimeKeys, where + ".times", report);
  if (s.contains("applications")) {
    const auto& a = s.at("applications");
    check_keys(a, kAppKeys, where + ".applications", report);
    if (a.is_object()) {
      if (a.contains("coherence")) check_keys(a.at("coherence"), kCoherenceKeys, where + ".applications.coherence", report);
      if (a.contains("link")) check_keys(a.at("link"), kLinkKeys, where + ".applications.link", report);
      if (a.contains("protocol")) check_keys(a.at("protocol"), kProtocolKeys, where + ".applications.protocol", report);
    }
  }
}

// Physics checks that need no propagation.
void physics_report(const json& s, const std::string& where, std::vector<std::string>& report) {
  try {
    const auto tasks = tasks_of(s);
    if (needs_physics(tasks)) {
      const auto sys = build_system(s);
      if (needs_floquet(s, tasks)) sys.require_period();
      parse_times(s, sys);
      const auto counting = parse_counting(s);
      if (counting.mode >= sys.num_modes()) report.push_back(where + ": counted mode does not exist");
      const auto photons = parse_photons(s);
      for (std::size_t k = 0; k < photons.size(); ++k) {
        if (!photons[k].fock) {
          const auto w = default_window(photons[k].mean, photons[k].variance);
          gaussian_fock_amplitudes(photons[k].mean, photons[k].variance, 0.0, w);
        }
      }
      parse_tolerances(s);
    }
    if (tasks.count("coherence_time") || tasks.count("transfer_rate") || tasks.count("protocol")) {
      if (!s.contains("applications")) throw ValidationError("application tasks need an 'applications' block");
      const auto& apps = s.at("applications");
      const auto conv = parse_convention(apps);
      if (apps.contains("link")) parse_link(apps.at("link"), conv);
      if (apps.contains("protocol") && apps.at("protocol").contains("window")) {
        if (!(num(apps.at("protocol"), "window") > 0.0)) {
          report.push_back(where + ": protocol acceptance window must be positive");
        }
      }
    }
  } catch (const std::exception& e) {
    report.push_back(where + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> RunResult::failures() const {
  std::vector<std::string> out;
  for (const auto& inv : invariants) {
    if (inv.enforced && !inv.passed) {
      std::ostringstream os;
      os << inv.name << " [variant " << inv.variant;
      if (!inv.state.empty()) os << ", state " << inv.state;
      os << "] value=" << inv.value << " tolerance=" << inv.tolerance;
      out.push_back(os.str());
    }
  }
  return out;
}

std::string scenario_directory() {
  if (const char* env = std::getenv("PRFT_SCENARIO_DIR")) return env;
  return PRFT_SCENARIO_DIR;
}

std::vector<std::string> bundled_names() {
  std::vector<std::string> out;
  const fs::path dir(scenario_directory());
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

json load(const std::string& path_or_name) {
  fs::path p(path_or_name);
  if (!fs::exists(p)) {
    const fs::path bundled = fs::path(scenario_directory()) / (path_or_name + ".json");
    if (!fs::exists(bundled)) throw ValidationError("no scenario file or bundled scenario named '" + path_or_name + "'");
    p = bundled;
  }
  try {
    return json::parse(read_text(p.string()));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
  }
}

std::vector<std::string> validate(const json& s) {
  std::vector<std::string> report;
  if (!s.is_object()) return {"scenario must be a JSON object"};
  schema_report(s, "scenario", report);
  if (!report.empty()) return report;
  try {
    const auto vs = variants_of(s);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const std::string where = vs.size() > 1 ? "variant " + std::to_string(i) : "scenario";
      if (vs.size() > 1) schema_report(vs[i], where, report);
      physics_report(vs[i], where, report);
    }
  } catch (const std::exception& e) {
    report.push_back(e.what());
  }
  return report;
}

RunResult run(const json& s, const RunOptions& options) {
  const auto report = validate(s);
  if (!report.empty()) {
    std::string msg = "invalid scenario:";
    for (const auto& r : report) msg += "\n  " + r;
    throw ValidationError(msg);
  }
  RunResult result;
  result.name = s.value("name", std::string("scenario"));
  result.cumulants.columns = {"variant", "state", "t", "mode", "k1", "k2", "k3", "k4",
                              "oracle_k1", "oracle_k2", "oracle_k3", "oracle_k4"};
  result.quasiprob.columns = {"variant", "state", "t", "dn", "q"};
  result.pn.columns = {"variant", "state", "t", "n", "p", "p_projector", "p_oracle"};
  result.purity.columns = {"variant", "state", "t", "purity_prft", "purity_oracle"};
  result.spin.columns = {"variant", "state", "t", "x", "y", "z", "oracle_x", "oracle_y", "oracle_z"};
  Context ctx;
  ctx.result = &result;
  ctx.threads = options.threads;
  ctx.seed = options.seed.value_or(static_cast<std::uint64_t>(s.value("seed", 1)));
  const auto start = std::chrono::steady_clock::now();
  json variants = json::array();
  const auto vs = variants_of(s);
  for (std::size_t vi = 0; vi < vs.size(); ++vi) {
    const auto& v = vs[vi];
    const auto tasks = tasks_of(v);
    json vsum = json::object();
    vsum["index"] = vi;
    if (s.contains("variants")) vsum["overrides"] = s.at("variants")[vi];
    if (needs_physics(tasks)) {
      const auto sys = build_system(v);
      run_physics(v, static_cast<int>(vi), sys, tasks, ctx, vsum);
    }
    if (tasks.count("coherence_time") || tasks.count("transfer_rate") || tasks.count("protocol")) {
      run_applications(v, static_cast<int>(vi), tasks, ctx, vsum);
    }
    variants.push_back(vsum);
  }
  json invariants = json::array(), diagnostics = json::array();
  for (const auto& inv : result.invariants) {
    json j = {{"name", inv.name},         {"variant", inv.variant}, {"state", inv.state},
              {"value", finite_or_null(inv.value)}, {"tolerance", inv.tolerance}, {"passed", inv.passed}};
    (inv.enforced ? invariants : diagnostics).push_back(j);
  }
  const auto fails = result.failures();
  result.summary = {{"scenario", result.name},
                    {"status", fails.empty() ? "ok" : "tolerance_failure"},
                    {"failures", fails},
                    {"variants", variants},
                    {"invariants", invariants},
                    {"diagnostics", diagnostics}};
  json timing = json::object();
  for (const auto& [k, v] : ctx.timings) timing[k] = timing.value(k, 0.0) + v;
  timing["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.manifest = {{"tool", "prft"},
                     {"version", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                   "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__},
                     {"threads", resolve_threads(options.threads)},
                     {"seed", ctx.seed},
                     {"scenario", s},
                     {"timings_s", timing}};
  return result;
}

void write_outputs(const RunResult& r, const std::string& directory) {
  fs::create_directories(directory);
  const fs::path d(directory);
  json files = json::array();
  auto table = [&](const char* name, const Table& t, bool always) {
    if (!always && t.rows.empty()) return;
    write_csv((d / name).string(), t);
    files.push_back(name);
  };
  table("cumulants.csv", r.cumulants, true);
  table("quasiprob.csv", r.quasiprob, true);
  table("pn.csv", r.pn, true);
  table("purity.csv", r.purity, true);
  table("spin.csv", r.spin, false);
  write_text((d / "summary.json").string(), r.summary.dump(2) + "\n");
  files.push_back("summary.json");
  json manifest = r.manifest;
  files.push_back("manifest.json");
  manifest["files"] = files;
  write_text((d / "manifest.json").string(), manifest.dump(2) + "\n");
}

}  // namespace prft::scenario
