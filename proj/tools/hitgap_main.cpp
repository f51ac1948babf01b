#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hitgap/config.hpp"
#include "hitgap/error.hpp"
#include "hitgap/run.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

const char* describe(const std::string& name) {
  if (name == "gap") return "spectral gap and Poincare constant";
  if (name == "threshold") return "blow-up threshold by eigenvalue and bisection";
  if (name == "potential") return "exponential-moment and z-potentials";
  if (name == "psi") return "psi-potentials, direct and contour";
  if (name == "mc") return "Monte Carlo hitting times and moment estimates";
  if (name == "verify") return "run the verification suite";
  return "alpha sweep of the exponential-moment potential";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hitting-time exponential moments and spectral gaps"};
  app.require_subcommand(1);
  Flags flags;
  for (const auto& name : hitgap::command_names()) {
    CLI::App* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--alpha", flags.alpha, "single alpha, replaces the configured list");
    sub->add_option("--seed", flags.seed, "seed; beats HITGAP_SEED and the config");
    sub->add_option("--out", flags.out, "report path");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? hitgap::kExitPass : hitgap::kExitUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const hitgap::ExperimentConfig config =
        flags.config.empty() ? hitgap::parse_config(nlohmann::json::object()) : hitgap::parse_config_file(flags.config);
    return hitgap::run_and_emit(command, config, {flags.alpha, flags.seed, flags.out}, std::cout, std::cerr);
  } catch (const hitgap::ConfigError& e) {
    for (const auto& p : e.problems()) std::cerr << "config error: " << p << '\n';
    return hitgap::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return hitgap::kExitInternal;
  }
}
