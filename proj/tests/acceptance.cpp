// Acceptance criteria at their stated tolerances. One line per criterion.
// Usage: hitgap_acceptance <path to the hitgap executable> <scratch directory>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitgap/potentials.hpp"
#include "hitgap/spectral.hpp"
#include "hitgap/verify.hpp"

using namespace hitgap;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0 && seconds > budget_seconds) {
    o.pass = false;
    o.detail += "; over the runtime budget";
  }
  if (!o.pass) ++failures;
  std::printf("[%s] criterion %d: %s (%.2f s) %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), seconds,
              o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// Tally of one suite check over the random corpus (instance ids "rc...").
struct Tally {
  int total = 0;
  int passed = 0;
  double worst = -std::numeric_limits<double>::infinity();
};

Tally tally(const SuiteReport& r, const std::string& check) {
  Tally t;
  for (const auto& rep : r.reports) {
    if (rep.check_id != check || rep.instance_id.rfind("rc", 0) != 0) continue;
    ++t.total;
    t.passed += rep.pass && !rep.skipped;
    t.worst = std::max(t.worst, rep.metric);
  }
  return t;
}

SuiteReport corpus_suite(std::set<std::string> checks) {
  SuiteConfig c;
  c.checks = std::move(checks);
  return run_suite(c);
}

std::string slurp_without_timestamp(const std::filesystem::path& p) {
  std::ifstream in(p);
  json doc = json::parse(in);
  doc.erase("timestamp");
  return doc.dump();
}

std::string raw_without_timestamp(const std::filesystem::path& p) {
  // Byte comparison of the file with the timestamp block cut out.
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  const auto at = s.find("\n  \"timestamp\": {");
  if (at == std::string::npos) return s;
  const auto end = s.find("\n  }", at + 1);
  return s.substr(0, at) + s.substr(end + 4);
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "hitgap";
  const std::filesystem::path scratch = argc > 2 ? argv[2] : std::filesystem::temp_directory_path() / "hitgap_acceptance";
  std::filesystem::create_directories(scratch);

  criterion(1, "sharpness witness on the two-state chain", 1.0, [] {
    const FiniteChain c = two_state_chain();
    const InvariantMeasure pi = invariant_measure(c);
    const TargetSet k(2, {0});
    const SpectralReport s = spectral_gap(c, pi);
    const double pi_k = pi.mass(k.members());
    const double a = dirichlet_eigenvalue(c, pi, k);
    const double err = std::max({std::abs(s.gap - 3.0), std::abs(s.poincare_c - 1.0 / 3.0),
                                 std::abs(pi_k - 2.0 / 3.0), std::abs(a - 2.0), std::abs(a - pi_k / s.poincare_c)});
    return Outcome{err <= 1e-10, fmt("gap=%.17g alpha*=%.17g max_err=%.3g", s.gap, a, err)};
  });

  criterion(2, "alpha* >= pi(K) gap on 200 random chains x 5 targets", 30.0, [] {
    const Tally t = tally(corpus_suite({"theorem_bound"}), "theorem_bound");
    return Outcome{t.total == 1000 && t.passed == 1000,
                   fmt("%g/%g within -1e-8 slack, worst normalized violation %.3g", t.passed, t.total, t.worst)};
  });

  criterion(3, "weak identities over vanishing-on-K bases, alpha in {0.25,0.5,0.9} alpha*", 0.0, [] {
    const SuiteReport r = corpus_suite({"potential_properties", "z_identity"});
    const Tally p = tally(r, "potential_properties");
    const Tally z = tally(r, "z_identity");
    return Outcome{p.total == 3000 && p.passed == 3000 && z.total == 3000 && z.passed == 3000,
                   fmt("exp-moment %g/3000 (worst %.3g), ", p.passed, p.worst) +
                       fmt("z-potential %g/3000 (worst %.3g)", z.passed, z.worst)};
  });

  criterion(4, "moment bound ||h_z^m||/m! <= (Re z)^-m, m <= 5, z in {1,2,1+i}", 0.0, [] {
    const Tally t = tally(corpus_suite({"moment_bound"}), "moment_bound");
    return Outcome{t.total == 3000 && t.passed == 3000,
                   fmt("%g/%g without violation, max ratio - 1 = %.3g", t.passed, t.total, t.worst)};
  });

  criterion(5, "contour inversion vs direct oracle, sigma in {0.5,1,2}", 10.0, [] {
    const PsiFunction bump = PsiFunction::bump(1.0, 2.0);
    const std::vector<double> sigmas{0.5, 1.0, 2.0};
    auto a = check_contour(two_state_chain(), TargetSet(2, {0}), bump, sigmas, 1e-6, "two-state");
    const auto b = check_contour(reference_birth_death(20), TargetSet(20, {0}), bump, sigmas, 1e-6, "bd20");
    a.insert(a.end(), b.begin(), b.end());
    bool ok = a.size() == 8;
    double worst = 0.0;
    for (const auto& r : a) {
      ok = ok && r.pass;
      worst = std::max(worst, r.metric);
    }
    return Outcome{ok, fmt("worst difference or spread %.3g over %g reports", worst, static_cast<double>(a.size()))};
  });

  criterion(6, "psi-potential derivative identity for smoothstep psi", 0.0, [] {
    const SuiteReport r = corpus_suite({"corollary_identity"});
    Tally t;
    for (const auto& rep : r.reports) {
      if (rep.check_id != "corollary_identity") continue;
      ++t.total;
      t.passed += rep.pass;
      t.worst = std::max(t.worst, rep.metric);
    }
    return Outcome{t.total >= 10 && t.passed == t.total,
                   fmt("%g/%g instances, worst residual %.3g", t.passed, t.total, t.worst)};
  });

  criterion(7, "OU benchmark: gap, refinement, Monte Carlo vs chain solve", 60.0, [] {
    const auto eq = check_equivalence_suite();
    double gap = 0.0, refinement = 0.0;
    bool ok = true;
    for (const auto& r : eq) {
      if (r.check_id == "ou_gap") {
        gap = r.measured["gap"].get<double>();
        ok = ok && r.pass && gap >= 0.99 && gap <= 1.01;
      }
      if (r.check_id == "ou_threshold_refinement") {
        refinement = r.metric;
        ok = ok && r.pass;
      }
    }
    const auto mc = check_ou_monte_carlo(OuMonteCarloOptions{});
    ok = ok && mc.pass;
    return Outcome{ok, fmt("gap=%.6f refinement=%.4f ", gap, refinement) +
                           fmt("mc=%.5f oracle=%.5f z=%.2f", mc.measured["mean"].get<double>(),
                               mc.measured["oracle"].get<double>(), mc.metric)};
  });

  criterion(8, "cycle bound on bd5 and the OU annulus, 101 grid times", 0.0, [] {
    SuiteConfig c;
    c.checks = {"cycle_bound"};
    c.corpus.size = 0;
    const SuiteReport r = run_suite(c);
    int count = 0;
    bool ok = true;
    std::string detail;
    for (const auto& rep : r.reports) {
      if (rep.check_id != "cycle_bound") continue;
      ++count;
      ok = ok && rep.pass && rep.measured["q"].get<double>() < 1.0 && rep.measured["grid_times"].get<int>() == 101;
      detail += rep.instance_id + fmt(" q=%.4f margin=%.3g; ", rep.measured["q"].get<double>(), rep.metric);
    }
    return Outcome{ok && count == 2, detail};
  });

  criterion(9, "two verify runs give byte-identical JSON modulo timestamp", 0.0, [&] {
    const auto config = scratch / "verify_config.json";
    {
      std::ofstream out(config);
      out << json{{"seed", 7}}.dump();
    }
    const auto report = scratch / "verify_report.json";
    const std::string cmd = "\"" + cli + "\" verify --config \"" + config.string() + "\" --out \"" + report.string() +
                            "\" 2>/dev/null";
    const int first_status = std::system(cmd.c_str());
    const std::string first = raw_without_timestamp(report);
    const std::string first_parsed = slurp_without_timestamp(report);
    const int second_status = std::system(cmd.c_str());
    const std::string second = raw_without_timestamp(report);
    const bool same = first == second && first_parsed == slurp_without_timestamp(report);
    return Outcome{same && first_status == 0 && second_status == 0,
                   fmt("exit %g/%g, %g bytes compared", first_status, second_status, static_cast<double>(first.size()))};
  });

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
