#include "prft/applications.hpp"
#include "prft/counting.hpp"
#include "prft/floquet.hpp"
#include "prft/scenario.hpp"
#include "prft/semiclassical.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace prft;

namespace {

// rows = times, columns = counting points
py::array_t<cplx> mgf_array(const GeneratingFunctionSamples& s) {
  const auto nt = static_cast<py::ssize_t>(s.values.size());
  const auto nc = static_cast<py::ssize_t>(s.grid.size());
  py::array_t<cplx> out({nt, nc});
  auto w = out.mutable_unchecked<2>();
  for (py::ssize_t t = 0; t < nt; ++t)
    for (py::ssize_t j = 0; j < nc; ++j) w(t, j) = s.at(static_cast<int>(t), static_cast<int>(j));
  return out;
}

py::array_t<double> cumulant_array(const std::vector<Cumulants>& cs) {
  py::array_t<double> out({static_cast<py::ssize_t>(cs.size()), py::ssize_t{4}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const auto t = static_cast<py::ssize_t>(i);
    w(t, 0) = cs[i].k1;
    w(t, 1) = cs[i].k2;
    w(t, 2) = cs[i].k3;
    w(t, 3) = cs[i].k4;
  }
  return out;
}

GeneratingFunctionSamples mgf_of(const DrivenSystem& sys, const Vector& psi, const std::vector<double>& times,
                                 int n_chi, int mode, int threads) {
  return dynamical_mgf(propagate_generalized(sys, CountingGrid(mode, n_chi), times, {}, threads), psi);
}

py::object to_python(const scenario::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_prft, m) {
  m.doc() = "Photon-resolved Floquet theory: counting statistics of driven two-level systems";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<AliasingError>(m, "AliasingError", base.ptr());
  py::register_exception<NegativeProbabilityError>(m, "NegativeProbabilityError", base.ptr());
  py::register_exception<DegeneracyError>(m, "DegeneracyError", base.ptr());

  py::class_<DrivenSystem>(m, "DrivenSystem")
      .def_property_readonly("dim", &DrivenSystem::dim)
      .def_property_readonly("num_modes", &DrivenSystem::num_modes)
      .def_property_readonly("period", &DrivenSystem::period)
      .def("with_phase", &DrivenSystem::with_phase, py::arg("mode"), py::arg("phase"));

  m.def("jc", &jc_system, py::arg("hz"), py::arg("omega"), py::arg("g"), py::arg("phase") = 0.0);
  m.def("rabi", &rabi_system, py::arg("hz"), py::arg("omega"), py::arg("g"), py::arg("phase") = 0.0);
  m.def("two_mode_jc", &two_mode_jc_system, py::arg("hz"), py::arg("omega"), py::arg("g1"), py::arg("g2"),
        py::arg("phi1"), py::arg("phi2"));
  m.def("multimode_rabi", &multimode_rabi_system, py::arg("hz"), py::arg("omegas"), py::arg("couplings"),
        py::arg("phases"));

  m.def(
      "propagate",
      [](const DrivenSystem& sys, const std::vector<double>& times, const std::vector<double>& chi) {
        return propagate(sys, chi, times);
      },
      py::arg("system"), py::arg("times"), py::arg("chi") = std::vector<double>{},
      "Propagators U_chi(t) for each time (list of complex matrices).");

  m.def(
      "mgf",
      [](const DrivenSystem& sys, const Vector& psi, const std::vector<double>& times, int n_chi, int mode,
         int threads) { return mgf_array(mgf_of(sys, psi, times, n_chi, mode, threads)); },
      py::arg("system"), py::arg("psi"), py::arg("times"), py::arg("n_chi") = 256, py::arg("mode") = 0,
      py::arg("threads") = 0, "Dynamical moment-generating function on the counting grid, shape (times, n_chi).");

  m.def(
      "cumulants",
      [](const DrivenSystem& sys, const Vector& psi, const std::vector<double>& times, int n_chi, int mode,
         int threads) {
        const auto s = mgf_of(sys, psi, times, n_chi, mode, threads);
        std::vector<Cumulants> out;
        for (int t = 0; t < s.num_times(); ++t) out.push_back(cumulants(s, t));
        return cumulant_array(out);
      },
      py::arg("system"), py::arg("psi"), py::arg("times"), py::arg("n_chi") = 256, py::arg("mode") = 0,
      py::arg("threads") = 0, "First four cumulants of the photon-number change, shape (times, 4).");

  m.def(
      "quasiprobabilities",
      [](const DrivenSystem& sys, const Vector& psi, double t, int n_chi, int mode, int window) {
        const auto s = mgf_of(sys, psi, {0.0, t}, n_chi, mode, 0);
        const auto q = quasiprobabilities(s, 1, window);
        return py::make_tuple(q.first, py::array_t<double>(static_cast<py::ssize_t>(q.values.size()), q.values.data()));
      },
      py::arg("system"), py::arg("psi"), py::arg("t"), py::arg("n_chi") = 256, py::arg("mode") = 0,
      py::arg("window") = -1, "Returns (first photon-number change, q values).");

  m.def(
      "standard_fcs_cumulants",
      [](const DrivenSystem& sys, const Vector& psi, const std::vector<double>& times, int mode) {
        return cumulant_array(standard_fcs_cumulants(sys, mode, psi, times));
      },
      py::arg("system"), py::arg("psi"), py::arg("times"), py::arg("mode") = 0);

  m.def(
      "quasienergy_derivatives",
      [](const DrivenSystem& sys, int mode) {
        const auto d = quasienergy_phase_derivatives(sys, mode);
        py::dict out;
        out["energy"] = d.energy;
        out["first"] = d.first;
        out["second"] = d.second;
        out["states"] = d.states;
        return out;
      },
      py::arg("system"), py::arg("mode") = 0,
      "Folded quasienergies, their first and second phase derivatives and the Floquet states (columns).");

  m.def("purity_prediction", &purity_prediction, py::arg("weight1"), py::arg("weight2"), py::arg("slope1"),
        py::arg("slope2"), py::arg("variance"), py::arg("t"));

  m.def(
      "transfer_rate",
      [](int atoms, double rabi, double frequency_hz, double power, double loss_rate, double distance) {
        LinkParameters l;
        l.atoms = atoms;
        l.rabi = rabi;
        l.omega = angular_frequency(frequency_hz, FrequencyConvention::kOrdinary);
        l.power = power;
        l.loss_rate = loss_rate;
        l.distance = distance;
        return transfer_rate(l);
      },
      py::arg("atoms") = 12, py::arg("rabi") = 40e6, py::arg("frequency_hz") = 400e12, py::arg("power") = 10e-6,
      py::arg("loss_rate") = 0.051, py::arg("distance") = 500.0, "Entanglement transfer rate in Hz.");

  m.def("bundled_scenarios", &scenario::bundled_names);
  m.def(
      "validate_scenario", [](const std::string& name) { return scenario::validate(scenario::load(name)); },
      py::arg("name_or_path"), "Empty list when the scenario is valid.");
  m.def(
      "run_scenario",
      [](const std::string& name, int threads, std::optional<std::uint64_t> seed, std::optional<std::string> out) {
        scenario::RunOptions o;
        o.threads = threads;
        o.seed = seed;
        scenario::RunResult r;
        {
          py::gil_scoped_release release;
          r = scenario::run(scenario::load(name), o);
          if (out) scenario::write_outputs(r, *out);
        }
        return to_python(r.summary);
      },
      py::arg("name_or_path"), py::arg("threads") = 0, py::arg("seed") = py::none(), py::arg("out") = py::none(),
      "Run a scenario; returns the summary as a dict and optionally writes the CSV outputs.");
}
