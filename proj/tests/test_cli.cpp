#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "hitgap/config.hpp"
#include "hitgap/error.hpp"
#include "hitgap/report.hpp"
#include "hitgap/run.hpp"

using namespace hitgap;
using nlohmann::json;

namespace {

json minimal() {
  return {{"instance", {{"chain", {{"Q", {{-1, 1}, {2, -2}}}}}}}, {"targets", {{0}}}};
}

std::vector<std::string> problems_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& text) {
  for (const auto& p : problems) {
    if (p.find(text) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("minimal two-state config parses and echoes defaults") {
  const ExperimentConfig c = parse_config(minimal());
  CHECK(c.instance.kind == InstanceSpec::Kind::Chain);
  REQUIRE(c.targets.size() == 1);
  const json echo = to_json(c);
  CHECK(echo["mc"]["n_samples"] == 20000);
  CHECK(echo["output"]["formats"] == json::array({"json"}));
}

TEST_CASE("round trip: parse(emit(config)) reproduces the effective config") {
  json doc = minimal();
  doc["alphas"] = {{"fractions_of_threshold", {0.25, 0.5}}};
  doc["z"] = {1, json::array({1, 1})};
  doc["psi"] = {{"family", "bump"}, {"support", {1, 2}}};
  doc["cycle"] = {{"K", {0}}, {"S", {1}}};
  doc["seed"] = 5;
  const json once = to_json(parse_config(doc));
  const json twice = to_json(parse_config(once));
  CHECK(write_json(once) == write_json(twice));
}

TEST_CASE("every problem is reported, not only the first") {
  json doc = minimal();
  doc["alphas"] = {{"fractions_of_threshold", {1.5}}};
  doc["typo"] = 1;
  doc["mc"] = {{"dt", -1}};
  doc["checks"] = {"theorem_bound", "nope"};
  const auto p = problems_of(doc);
  CHECK(p.size() >= 4);
  CHECK(mentions(p, "fraction 1.5"));
  CHECK(mentions(p, "typo: unknown key"));
  CHECK(mentions(p, "mc.dt"));
  CHECK(mentions(p, "unknown check \"nope\""));
}

TEST_CASE("interval target on an unlabelled chain is rejected") {
  json doc = minimal();
  doc["targets"] = {{{"interval", {-1, 1}}}};
  CHECK(mentions(problems_of(doc), "coordinate targets require labels"));
  json ok = {{"instance", {{"benchmark", {{"name", "ou"}, {"points", 100}}}}}, {"targets", {{{"interval", {-1, 1}}}}}};
  CHECK(problems_of(ok).empty());
}

TEST_CASE("corrupted chain fails validation at parse time") {
  json doc = minimal();
  doc["instance"]["chain"]["Q"] = {{-1, 1}, {2, -1}};
  CHECK(mentions(problems_of(doc), "instance.chain"));
}

TEST_CASE("seed resolution: flag > HITGAP_SEED > config > default") {
  json doc = minimal();
  ExperimentConfig c = parse_config(doc);
  unsetenv("HITGAP_SEED");
  CHECK(resolve_seed(std::nullopt, c).source == "default");
  doc["seed"] = 4;
  c = parse_config(doc);
  CHECK(resolve_seed(std::nullopt, c).value == 4);
  setenv("HITGAP_SEED", "9", 1);
  CHECK(resolve_seed(std::nullopt, c).value == 9);
  CHECK(resolve_seed(std::nullopt, c).source == "env");
  CHECK(resolve_seed(std::uint64_t{1}, c).source == "flag");
  setenv("HITGAP_SEED", "x9", 1);
  CHECK_THROWS_AS(resolve_seed(std::nullopt, c), ConfigError);
  unsetenv("HITGAP_SEED");
}

TEST_CASE("JSON writer: 17 significant digits and string infinities") {
  const json doc = {{"a", 0.1}, {"b", std::numeric_limits<double>::infinity()}, {"c", 3}, {"d", json::array()}};
  const std::string s = write_json(doc, 0);
  CHECK(s == "{\"a\":0.10000000000000001,\"b\":\"inf\",\"c\":3,\"d\":[]}");
  CHECK(config_hash(doc).size() == 16);
  CHECK(config_hash(doc) == config_hash(json::parse(s)));
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("CSV projection: one row per record, columns in the header") {
  const json records = {{{"x", 1}, {"y", "a,b"}}, {{"x", 2.5}, {"z", true}, {"nested", {{"k", 1}}}}};
  const std::string csv = csv_projection(records, {"test"});
  std::istringstream in(csv);
  std::string line;
  int data = 0;
  std::string header;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) continue;
    if (header.empty()) {
      header = line;
    } else {
      ++data;
    }
  }
  CHECK(header == "x,y,z");
  CHECK(data == 2);
  CHECK(csv.find("\"a,b\"") != std::string::npos);
  CHECK(csv_projection(json::array(), {}).find("# columns:") == 0);
}

TEST_CASE("gap subcommand on the two-state chain") {
  const CommandResult r = run_command("gap", parse_config(minimal()), {});
  CHECK(r.status == kExitPass);
  REQUIRE(r.report.records.size() == 1);
  CHECK(r.report.records[0]["gap"].get<double>() == doctest::Approx(3.0));
  CHECK(r.report.records[0]["poincare_c"].get<double>() == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("threshold subcommand reports both routes and their agreement") {
  const CommandResult r = run_command("threshold", parse_config(minimal()), {});
  REQUIRE(r.report.records.size() == 1);
  const json& t = r.report.records[0]["threshold"];
  CHECK(t["eigen_value"].get<double>() == doctest::Approx(2.0));
  CHECK(t["bisection_value"].get<double>() == doctest::Approx(2.0));
  CHECK(t["agreement"].get<double>() < 1e-10);
}

TEST_CASE("module errors are recorded per item and set exit status 1") {
  Overrides o;
  o.alpha = 3.0;  // beyond alpha* = 2
  const CommandResult r = run_command("potential", parse_config(minimal()), o);
  CHECK(r.status == kExitCheckFailure);
  REQUIRE(r.report.records.size() == 1);
  CHECK(r.report.records[0]["error_type"] == "blow_up");
  CHECK(r.report.summary["errors"] == 1);
}

TEST_CASE("mixed results: summary counts match the records") {
  json doc = minimal();
  doc["alphas"] = {1.0, 3.0};
  const CommandResult r = run_command("potential", parse_config(doc), {});
  int errors = 0;
  for (const auto& rec : r.report.records) errors += rec.contains("error");
  CHECK(r.report.summary["records"] == r.report.records.size());
  CHECK(r.report.summary["errors"] == errors);
  CHECK(errors == 1);
}

TEST_CASE("subcommands other than verify need an instance") {
  CHECK_THROWS_AS(run_command("gap", parse_config(json::object()), {}), ConfigError);
  CHECK_THROWS_AS(run_command("frobnicate", parse_config(minimal()), {}), ConfigError);
}

TEST_CASE("report body is identical across runs apart from the timestamp") {
  json doc = minimal();
  doc["mc"] = {{"n_samples", 2000}};
  const ExperimentConfig c = parse_config(doc);
  auto body = [&] {
    json j = assemble(run_command("mc", c, {}).report);
    j.erase("timestamp");
    return write_json(j);
  };
  CHECK(body() == body());
}

TEST_CASE("emit_report to stdout with empty results is valid JSON") {
  RunReport r;
  r.command = "gap";
  std::ostringstream out;
  emit_report(r, OutputConfig{}, out);
  const json back = json::parse(out.str());
  CHECK(back["records"].is_array());
  CHECK(back["records"].empty());
}
