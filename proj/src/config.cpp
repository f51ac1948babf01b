#include "hitgap/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "hitgap/error.hpp"

namespace hitgap {

namespace {

using nlohmann::json;

// Reads the keys of one JSON object, recording problems instead of throwing.
class Fields {
 public:
  Fields(const json& doc, std::string path, std::vector<std::string>& problems)
      : doc_(doc), path_(std::move(path)), problems_(problems) {
    if (!doc_.is_object()) fail("", "expected an object");
  }

  ~Fields() {
    if (!doc_.is_object()) return;
    for (const auto& [key, _] : doc_.items()) {
      if (!seen_.count(key)) fail(key, "unknown key");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_.is_object() && doc_.contains(key);
  }

  const json& at(const std::string& key) const { return doc_.at(key); }

  void fail(const std::string& key, const std::string& what) {
    problems_.push_back(where(key) + ": " + what);
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename Pred>
  void number(const std::string& key, double& out, Pred ok, const char* requirement) {
    if (!has(key)) return;
    const json& v = doc_.at(key);
    if (v.is_string() && v.get<std::string>() == "inf") {
      out = std::numeric_limits<double>::infinity();
    } else if (v.is_number()) {
      out = v.get<double>();
    } else {
      fail(key, "expected a number");
      return;
    }
    if (!ok(out)) fail(key, requirement);
  }

  template <typename Int>
  void integer(const std::string& key, Int& out, long long lo, const char* requirement) {
    if (!has(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_number_integer()) {
      fail(key, "expected an integer");
      return;
    }
    const long long value = v.get<long long>();
    if (value < lo) {
      fail(key, requirement);
      return;
    }
    out = static_cast<Int>(value);
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    if (!doc_.at(key).is_boolean()) {
      fail(key, "expected true or false");
      return;
    }
    out = doc_.at(key).get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    if (!doc_.at(key).is_string()) {
      fail(key, "expected a string");
      return;
    }
    out = doc_.at(key).get<std::string>();
  }

 private:
  const json& doc_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

std::vector<double> number_list(const json& v, const std::string& where, std::vector<std::string>& problems) {
  std::vector<double> out;
  if (!v.is_array()) {
    problems.push_back(where + ": expected a list of numbers");
    return out;
  }
  for (const auto& x : v) {
    if (!x.is_number()) {
      problems.push_back(where + ": expected a list of numbers");
      return {};
    }
    out.push_back(x.get<double>());
  }
  return out;
}

std::optional<TargetSpec> parse_target(const json& v, const std::string& where, bool labelled,
                                       std::vector<std::string>& problems) {
  TargetSpec t;
  if (v.is_array()) {
    for (const auto& x : v) {
      if (!x.is_number_integer() || x.get<long long>() < 0) {
        problems.push_back(where + ": states must be nonnegative integers");
        return std::nullopt;
      }
      t.states.push_back(x.get<int>());
    }
    if (t.states.empty()) {
      problems.push_back(where + ": target set is empty");
      return std::nullopt;
    }
    return t;
  }
  if (!v.is_object()) {
    problems.push_back(where + ": expected a state list or {\"interval\": [lo, hi]}");
    return std::nullopt;
  }
  const std::size_t before = problems.size();
  {
    Fields f(v, where, problems);
    if (f.has("states") == f.has("interval")) {
      f.fail("", "needs exactly one of \"states\" or \"interval\"");
    } else if (f.has("states")) {
      if (auto inner = parse_target(f.at("states"), where + ".states", labelled, problems)) t = *inner;
    } else {
      const auto bounds = number_list(f.at("interval"), where + ".interval", problems);
      if (bounds.size() != 2 || !(bounds[0] <= bounds[1])) {
        f.fail("interval", "expected [lo, hi] with lo <= hi");
      } else if (!labelled) {
        f.fail("interval", "coordinate targets require labels");
      } else {
        t.interval = Interval{bounds[0], bounds[1]};
      }
    }
  }
  if (problems.size() != before) return std::nullopt;
  return t;
}

json target_to_json(const TargetSpec& t) {
  if (t.interval) return {{"interval", {t.interval->lo, t.interval->hi}}};
  return t.states;
}

Complex parse_complex(const json& v, const std::string& where, std::vector<std::string>& problems) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  problems.push_back(where + ": expected a number or [re, im]");
  return {1.0, 0.0};
}

bool instance_labelled(const InstanceSpec& spec) {
  switch (spec.kind) {
    case InstanceSpec::Kind::Diffusion:
    case InstanceSpec::Kind::Benchmark:
      return true;
    case InstanceSpec::Kind::Chain:
      return spec.doc.is_object() && spec.doc.contains("labels");
    default:
      return false;
  }
}

void check_builder(const json& doc, std::vector<std::string>& problems) {
  Fields f(doc, "instance.builder", problems);
  std::string type;
  f.string("type", type);
  int n = 2;
  f.integer("n", n, 2, "needs n >= 2");
  double rate = 1.0;
  f.number("rate", rate, [](double v) { return v > 0.0; }, "must be positive");
  double up = 1.0;
  double down = 2.0;
  f.number("up", up, [](double v) { return v > 0.0; }, "must be positive");
  f.number("down", down, [](double v) { return v > 0.0; }, "must be positive");
  std::uint64_t seed = 0;
  f.integer("seed", seed, 0, "must be nonnegative");
  double p = 0.3;
  f.number("edge_probability", p, [](double v) { return v >= 0.0 && v <= 1.0; }, "must lie in [0, 1]");
  static const std::set<std::string> types{"two_state", "birth_death", "random_reversible", "complete_graph"};
  if (!types.count(type)) f.fail("type", "expected one of two_state, birth_death, random_reversible, complete_graph");
}

void check_diffusion(const json& doc, std::vector<std::string>& problems) {
  Fields f(doc, "instance.diffusion", problems);
  std::string drift, diffusion;
  f.string("drift", drift);
  f.string("diffusion", diffusion);
  double lower = 0.0, upper = 0.0;
  auto finite = [](double v) { return std::isfinite(v); };
  f.number("lower", lower, finite, "must be finite");
  f.number("upper", upper, finite, "must be finite");
  int points = 0;
  f.integer("points", points, 2, "needs at least 2 grid points");
  for (const char* key : {"drift", "diffusion", "lower", "upper", "points"}) {
    if (!f.has(key)) f.fail(key, "required");
  }
  if (!(lower < upper)) f.fail("upper", "must exceed lower");
}

void check_benchmark(const json& doc, std::vector<std::string>& problems) {
  Fields f(doc, "instance.benchmark", problems);
  std::string name;
  f.string("name", name);
  int points = 2000;
  f.integer("points", points, 2, "needs at least 2 grid points");
  if (name != "ou" && name != "double_well") f.fail("name", "expected \"ou\" or \"double_well\"");
}

std::uint64_t parse_seed_text(const std::string& text, const std::string& where) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError({where + ": expected a nonnegative integer, got \"" + text + "\""});
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError({where + ": out of range"});
  }
}

}  // namespace

TargetSet TargetSpec::resolve(const FiniteChain& chain) const {
  if (interval) return TargetSet::from_interval(chain, interval->lo, interval->hi);
  return TargetSet(chain.size(), states);
}

std::string TargetSpec::label() const {
  char buf[96];
  if (interval) {
    std::snprintf(buf, sizeof buf, "K=[%.17g,%.17g]", interval->lo, interval->hi);
    return buf;
  }
  std::string s = "K={";
  for (std::size_t i = 0; i < states.size(); ++i) s += (i ? "," : "") + std::to_string(states[i]);
  return s + "}";
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  std::vector<std::string> problems;
  {
    Fields top(doc, "", problems);

    if (top.has("instance")) {
      const json& inst = top.at("instance");
      if (!inst.is_object() || inst.size() != 1) {
        top.fail("instance", "needs exactly one of chain, builder, diffusion, benchmark");
      } else {
        const auto& [key, value] = *inst.items().begin();
        c.instance.doc = value;
        if (key == "chain") {
          c.instance.kind = InstanceSpec::Kind::Chain;
          try {
            chain_from_json(value);
          } catch (const Error& e) {
            problems.push_back(std::string("instance.chain: ") + e.what());
          }
        } else if (key == "builder") {
          c.instance.kind = InstanceSpec::Kind::Builder;
          check_builder(value, problems);
        } else if (key == "diffusion") {
          c.instance.kind = InstanceSpec::Kind::Diffusion;
          check_diffusion(value, problems);
        } else if (key == "benchmark") {
          c.instance.kind = InstanceSpec::Kind::Benchmark;
          check_benchmark(value, problems);
        } else {
          problems.push_back("instance." + key + ": unknown instance kind");
        }
      }
    }
    const bool labelled = instance_labelled(c.instance);

    if (top.has("targets")) {
      const json& ts = top.at("targets");
      if (!ts.is_array()) {
        top.fail("targets", "expected a list of target sets");
      } else {
        for (std::size_t i = 0; i < ts.size(); ++i) {
          if (auto t = parse_target(ts[i], "targets[" + std::to_string(i) + "]", labelled, problems)) {
            c.targets.push_back(*t);
          }
        }
      }
    }

    if (top.has("alphas")) {
      const json& a = top.at("alphas");
      if (a.is_array()) {
        c.alphas.values = number_list(a, "alphas", problems);
        for (double v : c.alphas.values) {
          if (!(v >= 0.0) || !std::isfinite(v)) top.fail("alphas", "values must be finite and nonnegative");
        }
      } else if (a.is_object()) {
        Fields f(a, "alphas", problems);
        if (f.has("fractions_of_threshold")) {
          c.alphas.fractions = number_list(f.at("fractions_of_threshold"), "alphas.fractions_of_threshold", problems);
          for (double v : c.alphas.fractions) {
            if (!(v > 0.0 && v < 1.0)) {
              char buf[96];
              std::snprintf(buf, sizeof buf, "fraction %g is outside (0, 1)", v);
              f.fail("fractions_of_threshold", buf);
            }
          }
        } else {
          f.fail("fractions_of_threshold", "required");
        }
      } else {
        top.fail("alphas", "expected a list or {\"fractions_of_threshold\": [...]}");
      }
    }

    if (top.has("z")) {
      const json& zs = top.at("z");
      if (!zs.is_array()) {
        top.fail("z", "expected a list");
      } else {
        for (std::size_t i = 0; i < zs.size(); ++i) {
          const Complex z = parse_complex(zs[i], "z[" + std::to_string(i) + "]", problems);
          if (!(z.real() > 0.0)) problems.push_back("z[" + std::to_string(i) + "]: needs Re z > 0");
          c.z_values.push_back(z);
        }
      }
    }

    if (top.has("mc")) {
      Fields f(top.at("mc"), "mc", problems);
      f.integer("n_samples", c.mc.n_samples, 1, "needs at least one sample");
      f.number("dt", c.mc.dt, [](double v) { return v > 0.0 && std::isfinite(v); }, "must be positive");
      if (f.has("time_cap")) {
        double cap = 0.0;
        f.number("time_cap", cap, [](double v) { return v > 0.0; }, "must be positive");
        c.mc.time_cap = cap;
      }
      if (f.has("seed")) {
        std::uint64_t s = 0;
        f.integer("seed", s, 0, "must be nonnegative");
        c.mc.seed = s;
      }
      if (f.has("x0")) {
        double x0 = 0.0;
        f.number("x0", x0, [](double v) { return std::isfinite(v); }, "must be finite");
        c.mc.x0 = x0;
      }
      f.boolean("bridge", c.mc.bridge);
    }

    if (top.has("psi")) {
      try {
        PsiFunction::from_json(top.at("psi"));
        c.psi = top.at("psi");
      } catch (const Error& e) {
        problems.push_back(std::string("psi: ") + e.what());
      }
    }

    if (top.has("contour")) {
      Fields f(top.at("contour"), "contour", problems);
      if (f.has("sigma")) {
        c.contour.sigmas = number_list(f.at("sigma"), "contour.sigma", problems);
        for (double s : c.contour.sigmas) {
          if (!(s > 0.0)) f.fail("sigma", "values must be positive");
        }
      }
      f.number("tolerance", c.contour.tolerance, [](double v) { return v > 0.0; }, "must be positive");
    }

    if (top.has("cycle")) {
      Fields f(top.at("cycle"), "cycle", problems);
      CycleConfig cy;
      bool ok = true;
      for (const char* key : {"K", "S"}) {
        if (!f.has(key)) {
          f.fail(key, "required");
          ok = false;
          continue;
        }
        auto t = parse_target(f.at(key), std::string("cycle.") + key, labelled, problems);
        if (!t) {
          ok = false;
        } else {
          (std::string(key) == "K" ? cy.k : cy.s) = *t;
        }
      }
      f.number("a", cy.a, [](double v) { return v > 0.0; }, "must be positive");
      f.number("alpha_fraction", cy.alpha_fraction, [](double v) { return v > 0.0 && v < 1.0; },
               "must lie in (0, 1)");
      f.number("horizon", cy.horizon, [](double v) { return v > 0.0 && std::isfinite(v); }, "must be positive");
      if (ok) c.cycle = cy;
    }

    if (top.has("corpus")) {
      Fields f(top.at("corpus"), "corpus", problems);
      f.integer("size", c.corpus.size, 0, "must be nonnegative");
      f.integer("targets_per_chain", c.corpus.targets_per_chain, 1, "needs at least one target");
      f.integer("seed", c.corpus.seed, 0, "must be nonnegative");
      f.integer("n_min", c.corpus.n_min, 2, "needs n_min >= 2");
      f.integer("n_max", c.corpus.n_max, 2, "needs n_max >= 2");
      if (c.corpus.n_max < c.corpus.n_min) f.fail("n_max", "must be at least n_min");
    }

    if (top.has("checks")) {
      const json& cs = top.at("checks");
      const auto& names = suite_check_names();
      if (!cs.is_array()) {
        top.fail("checks", "expected a list of check names");
      } else {
        for (const auto& name : cs) {
          if (!name.is_string()) {
            top.fail("checks", "expected strings");
          } else if (std::find(names.begin(), names.end(), name.get<std::string>()) == names.end()) {
            top.fail("checks", "unknown check \"" + name.get<std::string>() + "\"");
          } else {
            c.checks.push_back(name.get<std::string>());
          }
        }
      }
    }

    if (top.has("output")) {
      Fields f(top.at("output"), "output", problems);
      f.string("path", c.output.path);
      if (f.has("formats")) {
        const json& fs = f.at("formats");
        c.output.formats.clear();
        if (!fs.is_array()) {
          f.fail("formats", "expected a list");
        } else {
          for (const auto& v : fs) {
            if (!v.is_string() || (v != "json" && v != "csv")) {
              f.fail("formats", "expected \"json\" or \"csv\"");
            } else {
              c.output.formats.push_back(v.get<std::string>());
            }
          }
        }
      }
    }

    if (top.has("seed")) {
      std::uint64_t s = 0;
      top.integer("seed", s, 0, "must be nonnegative");
      c.seed = s;
    }
    top.integer("workers", c.workers, 0, "must be nonnegative");
  }
  if (c.seed && c.mc.seed && *c.seed != *c.mc.seed) problems.push_back("mc.seed: conflicts with seed");
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot read file"});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json out = json::object();
  switch (c.instance.kind) {
    case InstanceSpec::Kind::Chain: out["instance"] = {{"chain", c.instance.doc}}; break;
    case InstanceSpec::Kind::Builder: out["instance"] = {{"builder", c.instance.doc}}; break;
    case InstanceSpec::Kind::Diffusion: out["instance"] = {{"diffusion", c.instance.doc}}; break;
    case InstanceSpec::Kind::Benchmark: out["instance"] = {{"benchmark", c.instance.doc}}; break;
    case InstanceSpec::Kind::None: break;
  }
  json targets = json::array();
  for (const auto& t : c.targets) targets.push_back(target_to_json(t));
  out["targets"] = targets;
  if (c.alphas.by_fraction()) {
    out["alphas"] = {{"fractions_of_threshold", c.alphas.fractions}};
  } else {
    out["alphas"] = c.alphas.values;
  }
  json zs = json::array();
  for (Complex z : c.z_values) zs.push_back(json::array({z.real(), z.imag()}));
  out["z"] = zs;
  json mc = {{"n_samples", c.mc.n_samples}, {"dt", c.mc.dt}, {"bridge", c.mc.bridge}};
  if (c.mc.time_cap) mc["time_cap"] = *c.mc.time_cap;
  if (c.mc.seed) mc["seed"] = *c.mc.seed;
  if (c.mc.x0) mc["x0"] = *c.mc.x0;
  out["mc"] = mc;
  if (c.psi) out["psi"] = *c.psi;
  out["contour"] = {{"sigma", c.contour.sigmas}, {"tolerance", c.contour.tolerance}};
  if (c.cycle) {
    out["cycle"] = {{"K", target_to_json(c.cycle->k)},
                    {"S", target_to_json(c.cycle->s)},
                    {"a", c.cycle->a},
                    {"alpha_fraction", c.cycle->alpha_fraction},
                    {"horizon", c.cycle->horizon}};
  }
  out["corpus"] = {{"size", c.corpus.size},
                   {"targets_per_chain", c.corpus.targets_per_chain},
                   {"seed", c.corpus.seed},
                   {"n_min", c.corpus.n_min},
                   {"n_max", c.corpus.n_max}};
  out["checks"] = c.checks;
  out["output"] = {{"path", c.output.path}, {"formats", c.output.formats}};
  if (c.seed) out["seed"] = *c.seed;
  out["workers"] = c.workers;
  return out;
}

Instance build_instance(const InstanceSpec& spec) {
  const json& d = spec.doc;
  auto num = [&](const char* key, double fallback) { return d.contains(key) ? d.at(key).get<double>() : fallback; };
  auto integer = [&](const char* key, long long fallback) {
    return d.contains(key) ? d.at(key).get<long long>() : fallback;
  };
  switch (spec.kind) {
    case InstanceSpec::Kind::Chain:
      return {"chain", chain_from_json(d), std::nullopt};
    case InstanceSpec::Kind::Builder: {
      const std::string type = d.at("type").get<std::string>();
      const int n = static_cast<int>(integer("n", 2));
      if (type == "two_state") return {"two-state", two_state_chain(), std::nullopt};
      if (type == "birth_death") {
        return {"bd" + std::to_string(n),
                build_birth_death(n, std::vector<double>(static_cast<std::size_t>(n - 1), num("up", 1.0)),
                                  std::vector<double>(static_cast<std::size_t>(n - 1), num("down", 2.0))),
                std::nullopt};
      }
      if (type == "complete_graph") {
        return {"complete" + std::to_string(n), build_complete_graph(n, num("rate", 1.0)), std::nullopt};
      }
      const auto seed = static_cast<std::uint64_t>(integer("seed", 0));
      return {"random-n" + std::to_string(n) + "-s" + std::to_string(seed),
              build_random_reversible(n, seed, num("edge_probability", 0.3)), std::nullopt};
    }
    case InstanceSpec::Kind::Diffusion: {
      const auto ds = DiffusionSpec1D::from_expressions(d.at("drift").get<std::string>(),
                                                        d.at("diffusion").get<std::string>(), d.at("lower").get<double>(),
                                                        d.at("upper").get<double>());
      const int points = static_cast<int>(d.at("points").get<long long>());
      return {"diffusion-" + std::to_string(points), discretize_diffusion_1d(ds, points), ds};
    }
    case InstanceSpec::Kind::Benchmark: {
      const std::string name = d.at("name").get<std::string>();
      const int points = static_cast<int>(integer("points", 2000));
      const DiffusionSpec1D ds = name == "ou" ? ou_spec() : double_well_spec();
      return {(name == "ou" ? "ou-" : "double-well-") + std::to_string(points), discretize_diffusion_1d(ds, points),
              ds};
    }
    case InstanceSpec::Kind::None:
      break;
  }
  throw ConfigError({"instance: required by this subcommand"});
}

ResolvedSeed resolve_seed(std::optional<std::uint64_t> flag, const ExperimentConfig& config) {
  if (flag) return {*flag, "flag"};
  if (const char* env = std::getenv("HITGAP_SEED"); env != nullptr) {
    return {parse_seed_text(env, "HITGAP_SEED"), "env"};
  }
  if (config.seed) return {*config.seed, "config"};
  if (config.mc.seed) return {*config.mc.seed, "config"};
  return {0, "default"};
}

}  // namespace hitgap
