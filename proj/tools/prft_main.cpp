#include "prft/core.hpp"
#include "prft/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

enum ExitCode { kOk = 0, kOther = 1, kInvalid = 2, kNumerical = 3 };

int run_command(const std::string& target, const std::string& out, int threads, std::optional<std::uint64_t> seed) {
  namespace sc = prft::scenario;
  const auto scenario = sc::load(target);
  sc::RunOptions opts;
  opts.threads = threads;
  opts.seed = seed;
  const auto result = sc::run(scenario, opts);
  const std::string dir = out.empty() ? "out/" + result.name : out;
  sc::write_outputs(result, dir);
  std::cout << "scenario " << result.name << ": wrote " << dir << "\n";
  int enforced = 0, diag_fail = 0;
  for (const auto& inv : result.invariants) {
    if (inv.enforced) {
      ++enforced;
    } else if (!inv.passed) {
      ++diag_fail;
    }
  }
  std::cout << "  " << enforced << " enforced checks, " << result.failures().size() << " failed";
  if (diag_fail) std::cout << " (" << diag_fail << " unenforced diagnostics outside tolerance)";
  std::cout << "\n";
  for (const auto& f : result.failures()) std::cerr << "FAILED " << f << "\n";
  return result.ok() ? kOk : kNumerical;
}

int validate_command(const std::string& target) {
  const auto report = prft::scenario::validate(prft::scenario::load(target));
  if (report.empty()) {
    std::cout << target << ": valid\n";
    return kOk;
  }
  for (const auto& r : report) std::cerr << r << "\n";
  return kInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photon-resolved counting statistics for driven quantum systems"};
  app.require_subcommand(1);

  std::string target, out;
  int threads = 0;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run a scenario file or bundled scenario");
  run->add_option("scenario", target, "Path to a JSON file or a bundled scenario name")->required();
  run->add_option("--out", out, "Output directory (default out/<name>)");
  run->add_option("--threads", threads, "Worker threads (default PRFT_THREADS or hardware)");
  run->add_option("--seed", seed, "Override the scenario RNG seed");

  auto* val = app.add_subcommand("validate", "Check a scenario without running it");
  val->add_option("scenario", target, "Path to a JSON file or a bundled scenario name")->required();

  auto* list = app.add_subcommand("list-scenarios", "List bundled scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      for (const auto& n : prft::scenario::bundled_names()) std::cout << n << "\n";
      return kOk;
    }
    if (val->parsed()) return validate_command(target);
    return run_command(target, out, threads, seed);
  } catch (const prft::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const prft::AliasingError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const prft::LeakageError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const prft::NegativeProbabilityError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const prft::BranchError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const prft::DegeneracyError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const prft::CoverageError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
