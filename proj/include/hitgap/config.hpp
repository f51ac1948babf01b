#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitgap/chain.hpp"
#include "hitgap/linalg.hpp"
#include "hitgap/psi.hpp"
#include "hitgap/verify.hpp"

namespace hitgap {

/// Where the chain comes from. `doc` is the inner document, echoed verbatim.
struct InstanceSpec {
  enum class Kind { None, Chain, Builder, Diffusion, Benchmark };
  Kind kind = Kind::None;
  nlohmann::json doc;
};

/// A built instance; `diffusion` is set for discretized diffusions.
struct Instance {
  std::string id;
  FiniteChain chain;
  std::optional<DiffusionSpec1D> diffusion;
};

/// Explicit state list or a coordinate interval.
struct TargetSpec {
  std::vector<int> states;
  std::optional<Interval> interval;

  TargetSet resolve(const FiniteChain& chain) const;
  std::string label() const;
};

struct AlphaSpec {
  std::vector<double> values;
  std::vector<double> fractions;  ///< of alpha*, each in (0, 1)
  bool by_fraction() const { return !fractions.empty(); }
};

struct McConfig {
  std::size_t n_samples = 20000;
  double dt = 1e-3;
  std::optional<double> time_cap;  ///< default 50 / gap
  std::optional<std::uint64_t> seed;
  std::optional<double> x0;        ///< state index (chains) or coordinate (diffusions)
  bool bridge = true;
};

struct ContourConfig {
  std::vector<double> sigmas{0.5, 1.0, 2.0};
  double tolerance = 1e-6;
};

struct CycleConfig {
  TargetSpec k;
  TargetSpec s;
  double a = 1.0;
  double alpha_fraction = 0.5;
  double horizon = 1.0;
};

struct OutputConfig {
  std::string path;  ///< empty writes JSON to stdout
  std::vector<std::string> formats{"json"};
};

struct ExperimentConfig {
  InstanceSpec instance;
  std::vector<TargetSpec> targets;
  AlphaSpec alphas;
  std::vector<Complex> z_values;
  McConfig mc;
  std::optional<nlohmann::json> psi;
  ContourConfig contour;
  std::optional<CycleConfig> cycle;
  CorpusSpec corpus;
  std::vector<std::string> checks;
  OutputConfig output;
  std::optional<std::uint64_t> seed;
  int workers = 0;
};

/// Validates every field and throws ConfigError listing all problems found.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::string& path);

/// Effective configuration with defaults filled; parse_config reproduces it.
nlohmann::json to_json(const ExperimentConfig& config);

Instance build_instance(const InstanceSpec& spec);

/// Seed resolution: flag > HITGAP_SEED > config > 0.
struct ResolvedSeed {
  std::uint64_t value = 0;
  std::string source;  ///< "flag", "env", "config" or "default"
};
ResolvedSeed resolve_seed(std::optional<std::uint64_t> flag, const ExperimentConfig& config);

}  // namespace hitgap
