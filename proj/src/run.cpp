#include "hitgap/run.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <ostream>
#include <sstream>

#include "hitgap/error.hpp"
#include "hitgap/montecarlo.hpp"
#include "hitgap/potentials.hpp"
#include "hitgap/spectral.hpp"

namespace hitgap {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects records, converting module errors into error records.
class Recorder {
 public:
  explicit Recorder(std::string instance) : instance_(std::move(instance)) {}

  void attempt(const std::string& item, const std::function<void(json&)>& body) {
    const auto start = Clock::now();
    json rec = {{"instance_id", instance_}, {"item", item}};
    try {
      body(rec);
    } catch (const InternalError& e) {
      internal_ = true;
      rec["error"] = e.what();
      rec["error_type"] = "internal";
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      rec["error"] = e.what();
      rec["error_type"] = error_type(e);
    }
    if (rec.contains("error")) ++errors_;
    seconds_[instance_ + "|" + item] = seconds_since(start);
    records_.push_back(std::move(rec));
  }

  json& records() { return records_; }
  json& seconds() { return seconds_; }
  int errors() const { return errors_; }
  bool internal() const { return internal_; }

 private:
  static const char* error_type(const Error& e) {
    if (dynamic_cast<const BlowUpError*>(&e)) return "blow_up";
    if (dynamic_cast<const TruncationError*>(&e)) return "truncation";
    if (dynamic_cast<const ModeError*>(&e)) return "mode";
    if (dynamic_cast<const UnsupportedModeError*>(&e)) return "unsupported_mode";
    if (dynamic_cast<const GeometryError*>(&e)) return "geometry";
    if (dynamic_cast<const DomainError*>(&e)) return "domain";
    if (dynamic_cast<const ValidationError*>(&e)) return "validation";
    return "error";
  }

  std::string instance_;
  json records_ = json::array();
  json seconds_ = json::object();
  int errors_ = 0;
  bool internal_ = false;
};

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::vector<double> alphas_for(const ExperimentConfig& c, double alpha_star) {
  if (!c.alphas.by_fraction()) return c.alphas.values;
  std::vector<double> out;
  for (double f : c.alphas.fractions) out.push_back(f * alpha_star);
  return out;
}

void require_targets(const ExperimentConfig& c, const std::string& command) {
  if (c.targets.empty()) throw ConfigError({"targets: required by " + command});
}

int start_state(const ExperimentConfig& c, const TargetSet& k) {
  if (c.mc.x0) {
    const double x = *c.mc.x0;
    if (x != std::floor(x) || x < 0 || x >= k.state_count()) {
      throw DomainError("mc.x0 must be a state index for chains");
    }
    return static_cast<int>(x);
  }
  const auto free = k.complement();
  if (free.empty()) throw DomainError("K is the whole space; no start state outside K");
  return free.front();
}

void gap_command(const Instance& inst, Recorder& rec) {
  rec.attempt("gap", [&](json& r) {
    const InvariantMeasure pi = invariant_measure(inst.chain);
    const SpectralReport s = spectral_gap(inst.chain, pi);
    r["n"] = inst.chain.size();
    r["gap"] = s.gap;
    r["poincare_c"] = s.poincare_c;
    r["method"] = s.method;
    r["residual"] = s.residual;
    r["reversible"] = pi.reversible;
    r["pi"] = vector_json(pi.pi);
  });
}

void threshold_command(const ExperimentConfig& c, const Instance& inst, Recorder& rec) {
  const InvariantMeasure pi = invariant_measure(inst.chain);
  const double gap = spectral_gap(inst.chain, pi).gap;
  for (const auto& t : c.targets) {
    rec.attempt(t.label(), [&](json& r) {
      const TargetSet k = t.resolve(inst.chain);
      const ThresholdReport th = blowup_threshold(inst.chain, pi, k);
      const double pi_k = pi.mass(k.members());
      r["threshold"] = to_json(th);
      r["alpha_star"] = th.alpha_star;
      r["agreement"] = th.agreement;
      r["pi_K"] = pi_k;
      r["gap"] = gap;
      r["pi_K_gap"] = pi_k * gap;
      r["slack"] = th.alpha_star - pi_k * gap;
    });
  }
}

void potential_command(const ExperimentConfig& c, const Instance& inst, Recorder& rec) {
  const InvariantMeasure pi = invariant_measure(inst.chain);
  for (const auto& t : c.targets) {
    const TargetSet k = t.resolve(inst.chain);
    double alpha_star = std::numeric_limits<double>::infinity();
    if (!k.is_full()) alpha_star = dirichlet_eigenvalue(inst.chain, pi, k);
    for (double alpha : alphas_for(c, alpha_star)) {
      char item[96];
      std::snprintf(item, sizeof item, "%s/alpha=%.17g", t.label().c_str(), alpha);
      rec.attempt(item, [&](json& r) {
        const Potential p = exp_moment_potential(inst.chain, pi, k, alpha, alpha_star);
        r["kind"] = "exp_moment";
        r["alpha"] = alpha;
        r["alpha_star"] = alpha_star;
        r["pi_mean"] = pi.pi.dot(p.real());
        r["max"] = p.real().maxCoeff();
        r["potential"] = to_json(p);
      });
    }
    for (Complex z : c.z_values) {
      char item[128];
      std::snprintf(item, sizeof item, "%s/z=%.17g%+.17gi", t.label().c_str(), z.real(), z.imag());
      rec.attempt(item, [&](json& r) {
        const Potential p = z_potential(inst.chain, k, z);
        r["kind"] = "z";
        r["z_re"] = z.real();
        r["z_im"] = z.imag();
        r["max_abs"] = p.values.cwiseAbs().maxCoeff();
        r["potential"] = to_json(p);
      });
    }
  }
}

void psi_command(const ExperimentConfig& c, const Instance& inst, Recorder& rec) {
  const PsiFunction psi = c.psi ? PsiFunction::from_json(*c.psi) : PsiFunction::bump(1.0, 2.0);
  for (const auto& t : c.targets) {
    const TargetSet k = t.resolve(inst.chain);
    Vector direct;
    rec.attempt(t.label() + "/direct", [&](json& r) {
      const DirectResult d = psi_potential_direct(inst.chain, k, psi);
      direct = d.potential.real();
      r["mode"] = "direct";
      r["psi"] = psi.id();
      r["horizon"] = d.horizon;
      r["truncation_estimate"] = d.truncation_estimate;
      r["quadrature_error"] = d.quadrature_error;
      r["potential"] = to_json(d.potential);
    });
    for (double sigma : c.contour.sigmas) {
      char item[96];
      std::snprintf(item, sizeof item, "%s/contour/sigma=%.17g", t.label().c_str(), sigma);
      rec.attempt(item, [&](json& r) {
        require_lemma_mode(psi);
        ContourOptions o;
        o.sigma = sigma;
        o.tolerance = c.contour.tolerance;
        const ContourResult cr = psi_potential_contour(inst.chain, k, psi, o);
        r["mode"] = "contour";
        r["psi"] = psi.id();
        r["sigma"] = sigma;
        r["t_im"] = cr.options.t_im;
        r["step"] = cr.options.step;
        r["nodes"] = cr.nodes;
        r["truncation_bound"] = cr.truncation_bound;
        r["aliasing_bound"] = cr.aliasing_bound;
        r["imag_residue"] = cr.imag_residue;
        if (direct.size() == cr.potential.values.size()) {
          r["max_abs_diff_vs_direct"] = (cr.potential.real() - direct).cwiseAbs().maxCoeff();
        }
        r["potential"] = to_json(cr.potential);
      });
    }
  }
}

void mc_command(const ExperimentConfig& c, const Instance& inst, std::uint64_t seed, Recorder& rec,
                std::vector<std::pair<std::string, std::string>>& extra_csv) {
  const InvariantMeasure pi = invariant_measure(inst.chain);
  const double gap = spectral_gap(inst.chain, pi).gap;
  const bool csv = std::find(c.output.formats.begin(), c.output.formats.end(), "csv") != c.output.formats.end();
  for (std::size_t ti = 0; ti < c.targets.size(); ++ti) {
    const TargetSpec& t = c.targets[ti];
    const TargetSet k = t.resolve(inst.chain);
    const double alpha_star = k.is_full() ? std::numeric_limits<double>::infinity()
                                          : dirichlet_eigenvalue(inst.chain, pi, k);
    SamplingOptions so;
    so.time_cap = c.mc.time_cap ? *c.mc.time_cap : 50.0 / gap;
    so.workers = c.workers;
    so.bridge = c.mc.bridge;
    HittingSample sample;
    std::function<double(const Vector&)> oracle_at;
    bool sampled = false;
    rec.attempt(t.label() + "/sample", [&](json& r) {
      if (inst.diffusion) {
        if (!t.interval) throw DomainError("diffusion Monte Carlo needs an interval target");
        double x0 = 0.0;
        if (c.mc.x0) {
          x0 = *c.mc.x0;
        } else {
          const auto free = k.complement();
          if (free.empty()) throw DomainError("K is the whole space; no start point outside K");
          x0 = inst.chain.labels()[static_cast<std::size_t>(free.front())];
        }
        sample = sample_hitting_time_diffusion(*inst.diffusion, x0, *t.interval, c.mc.dt, c.mc.n_samples, seed, so);
        oracle_at = [&inst, x0](const Vector& h) { return interpolate_on_grid(inst.chain, h, x0); };
        r["x0"] = x0;
        r["scheme"] = "euler_maruyama";
        r["dt"] = c.mc.dt;
        r["bridge"] = c.mc.bridge;
      } else {
        const int x0 = start_state(c, k);
        sample = sample_hitting_time_ctmc(inst.chain, x0, k, c.mc.n_samples, seed, so);
        oracle_at = [x0](const Vector& h) { return h(x0); };
        r["x0"] = x0;
        r["scheme"] = "exact_jump";
      }
      sampled = true;
      double mean = 0.0;
      for (double v : sample.times) mean += v;
      r["n"] = sample.times.size();
      r["censored"] = sample.censored;
      r["time_cap"] = sample.time_cap;
      r["mean_tau"] = sample.times.empty() ? 0.0 : mean / static_cast<double>(sample.times.size());
      r["seed"] = seed;
      if (csv) {
        std::ostringstream body;
        write_sample_csv(sample, body);
        extra_csv.emplace_back("_samples_" + std::to_string(ti) + ".csv", body.str());
      }
    });
    if (!sampled) continue;
    for (double alpha : alphas_for(c, alpha_star)) {
      char item[96];
      std::snprintf(item, sizeof item, "%s/alpha=%.17g", t.label().c_str(), alpha);
      rec.attempt(item, [&](json& r) {
        EstimateOptions eo;
        eo.alpha_star_hint = alpha_star;
        eo.seed = seed;
        const MomentEstimate e = estimate_exp_moment(sample, alpha, eo);
        r["estimate"] = to_json(e);
        r["alpha"] = alpha;
        r["alpha_star"] = alpha_star;
        r["mean"] = e.mean;
        r["ci_half_width"] = e.ci_half_width;
        r["tail_flag"] = e.tail_flag;
        if (alpha < alpha_star) {
          const double oracle = oracle_at(exp_moment_potential(inst.chain, pi, k, alpha, alpha_star).real());
          r["oracle"] = oracle;
          r["z_score"] = e.std_error > 0.0 ? std::abs(e.mean - oracle) / e.std_error : 0.0;
        }
      });
    }
  }
}

void sweep_command(const ExperimentConfig& c, const Instance& inst, Recorder& rec) {
  const InvariantMeasure pi = invariant_measure(inst.chain);
  const double gap = spectral_gap(inst.chain, pi).gap;
  std::vector<double> fractions = c.alphas.fractions;
  if (fractions.empty()) fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  for (const auto& t : c.targets) {
    const TargetSet k = t.resolve(inst.chain);
    if (k.is_full()) {
      rec.attempt(t.label(), [&](json& r) {
        r["skipped"] = true;
        r["note"] = "K is the whole space";
      });
      continue;
    }
    const double alpha_star = dirichlet_eigenvalue(inst.chain, pi, k);
    const double pi_k = pi.mass(k.members());
    for (double f : fractions) {
      char item[96];
      std::snprintf(item, sizeof item, "%s/fraction=%.17g", t.label().c_str(), f);
      rec.attempt(item, [&](json& r) {
        const Potential p = exp_moment_potential(inst.chain, pi, k, f * alpha_star, alpha_star);
        r["target"] = t.label();
        r["fraction"] = f;
        r["alpha"] = f * alpha_star;
        r["alpha_star"] = alpha_star;
        r["pi_K_gap"] = pi_k * gap;
        r["slack"] = alpha_star - pi_k * gap;
        r["pi_mean_h"] = pi.pi.dot(p.real());
        r["max_h"] = p.real().maxCoeff();
      });
    }
  }
}

SuiteConfig suite_config(const ExperimentConfig& c, std::uint64_t seed) {
  SuiteConfig s;
  s.corpus = c.corpus;
  s.checks.insert(c.checks.begin(), c.checks.end());
  if (c.alphas.by_fraction()) s.alpha_fractions = c.alphas.fractions;
  if (!c.z_values.empty()) s.z_values = c.z_values;
  s.sigmas = c.contour.sigmas;
  s.contour_tolerance = c.contour.tolerance;
  s.seed = seed;
  s.mc_samples = c.mc.n_samples;
  s.mc_dt = c.mc.dt;
  s.workers = c.workers;
  return s;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gap", "threshold", "potential", "psi", "mc", "verify", "sweep"};
  return names;
}

CommandResult run_command(const std::string& command, ExperimentConfig config, const Overrides& overrides) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    throw ConfigError({"unknown subcommand \"" + command + "\""});
  }
  if (overrides.alpha) {
    if (!(*overrides.alpha >= 0.0) || !std::isfinite(*overrides.alpha)) {
      throw ConfigError({"--alpha: must be finite and nonnegative"});
    }
    config.alphas.values = {*overrides.alpha};
    config.alphas.fractions.clear();
  }
  if (overrides.out) config.output.path = *overrides.out;

  CommandResult result;
  RunReport& report = result.report;
  report.command = command;
  report.seed = resolve_seed(overrides.seed, config);
  report.config = to_json(config);
  const std::string started = utc_now();
  const auto start = Clock::now();

  if (command == "verify") {
    const SuiteReport suite = run_suite(suite_config(config, report.seed.value));
    json seconds = json::object();
    for (const auto& r : suite.reports) {
      report.records.push_back(to_json(r));
      seconds[r.check_id + "|" + r.instance_id] = r.seconds;
    }
    const auto errors = std::count_if(suite.reports.begin(), suite.reports.end(),
                                      [](const VerificationReport& r) { return r.claimed == "module error"; });
    report.summary = {{"records", suite.reports.size()},
                      {"passed", suite.passed},
                      {"failed", suite.failed},
                      {"skipped", suite.skipped},
                      {"errors", errors},
                      {"all_passed", suite.all_passed()}};
    report.timestamp = {{"started_utc", started}, {"wall_seconds", seconds_since(start)}, {"item_seconds", seconds}};
    result.extra_csv.emplace_back("_theorem.csv", theorem_csv(suite.reports));
    result.status = suite.all_passed() ? kExitPass : kExitCheckFailure;
    return result;
  }

  if (config.instance.kind == InstanceSpec::Kind::None) throw ConfigError({"instance: required by " + command});
  if (command != "gap") require_targets(config, command);
  if ((command == "potential" || command == "mc") && config.alphas.values.empty() && !config.alphas.by_fraction() &&
      config.z_values.empty()) {
    config.alphas.fractions = {0.5};
  }

  const Instance inst = build_instance(config.instance);
  Recorder rec(inst.id);
  if (command == "gap") {
    gap_command(inst, rec);
  } else if (command == "threshold") {
    threshold_command(config, inst, rec);
  } else if (command == "potential") {
    potential_command(config, inst, rec);
  } else if (command == "psi") {
    psi_command(config, inst, rec);
  } else if (command == "mc") {
    mc_command(config, inst, report.seed.value, rec, result.extra_csv);
  } else {
    sweep_command(config, inst, rec);
  }
  report.records = rec.records();
  report.summary = {{"records", report.records.size()}, {"errors", rec.errors()}};
  report.timestamp = {{"started_utc", started}, {"wall_seconds", seconds_since(start)}, {"item_seconds", rec.seconds()}};
  result.status = rec.internal() ? kExitInternal : rec.errors() > 0 ? kExitCheckFailure : kExitPass;
  return result;
}

int run_and_emit(const std::string& command, const ExperimentConfig& config, const Overrides& overrides,
                 std::ostream& out, std::ostream& err) {
  try {
    CommandResult result = run_command(command, config, overrides);
    OutputConfig output = config.output;
    if (overrides.out) output.path = *overrides.out;
    emit_report(result.report, output, out, result.extra_csv);
    const json& s = result.report.summary;
    err << command << ": " << s.value("records", 0) << " records";
    if (s.contains("failed")) err << ", " << s["failed"].get<int>() << " failed";
    err << ", " << s.value("errors", 0) << " errors\n";
    return result.status;
  } catch (const ConfigError& e) {
    for (const auto& p : e.problems()) err << "config error: " << p << '\n';
    return kExitUsage;
  } catch (const InternalError& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailure;
  }
}

}  // namespace hitgap
