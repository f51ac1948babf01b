#include "hitgap/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <Eigen/Core>

#include "hitgap/error.hpp"

namespace hitgap {

namespace {

using nlohmann::json;

std::string number(double v) {
  if (std::isnan(v)) return "\"nan\"";
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write(const json& v, int indent, int depth, std::string& out) {
  const std::string pad = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* colon = indent > 0 ? ": " : ":";
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [key, value] : v.items()) {
        if (!first) out += ',';
        first = false;
        out += pad + json(key).dump() + colon;
        write(value, indent, depth + 1, out);
      }
      out += close + '}';
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& value : v) {
        if (!first) out += ',';
        first = false;
        out += pad;
        write(value, indent, depth + 1, out);
      }
      out += close + ']';
      return;
    }
    case json::value_t::number_float:
      out += number(v.get<double>());
      return;
    default:
      out += v.dump();
  }
}

std::string csv_cell(const json& v) {
  std::string s;
  if (v.is_string()) {
    s = v.get<std::string>();
  } else if (v.is_number_float()) {
    s = number(v.get<double>());
    if (s.front() == '"') s = s.substr(1, s.size() - 2);
  } else {
    s = v.dump();
  }
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
  return quoted + "\"";
}

std::filesystem::path with_suffix(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  return p.parent_path() / (p.stem().string() + suffix);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write " + path.string());
  out << text;
  if (!out) throw DomainError("cannot write " + path.string());
}

}  // namespace

std::string write_json(const json& doc, int indent) {
  std::string out;
  write(doc, indent, 0, out);
  if (indent > 0) out += '\n';
  return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const json& effective_config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(write_json(effective_config, 0))));
  return buf;
}

json versions() {
  return {{"hitgap", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

json assemble(const RunReport& r) {
  return {{"command", r.command},
          {"config", r.config},
          {"config_hash", config_hash(r.config)},
          {"seed",
           {{"value", r.seed.value},
            {"source", r.seed.source},
            {"resolution_order", {"flag", "HITGAP_SEED", "config", "default"}}}},
          {"versions", versions()},
          {"records", r.records},
          {"summary", r.summary},
          {"timestamp", r.timestamp}};
}

std::string csv_projection(const json& records, const std::vector<std::string>& header_lines) {
  std::set<std::string> columns;
  for (const auto& rec : records) {
    for (const auto& [key, value] : rec.items()) {
      if (!value.is_structured()) columns.insert(key);
    }
  }
  std::ostringstream out;
  for (const auto& line : header_lines) out << "# " << line << '\n';
  out << "# columns:";
  for (const auto& c : columns) out << ' ' << c;
  out << '\n';
  bool first = true;
  for (const auto& c : columns) {
    out << (first ? "" : ",") << c;
    first = false;
  }
  out << '\n';
  for (const auto& rec : records) {
    first = true;
    for (const auto& c : columns) {
      out << (first ? "" : ",");
      first = false;
      if (rec.contains(c) && !rec.at(c).is_structured()) out << csv_cell(rec.at(c));
    }
    out << '\n';
  }
  return out.str();
}

std::string theorem_csv(const std::vector<VerificationReport>& reports) {
  json rows = json::array();
  for (const auto& r : reports) {
    if (r.check_id != "theorem_bound" || r.skipped || !r.measured.contains("pi_K_gap")) continue;
    rows.push_back({{"instance", r.instance_id},
                    {"alpha_star", r.measured.at("alpha_star")},
                    {"pi_K_gap", r.measured.at("pi_K_gap")},
                    {"slack", r.measured.at("slack")}});
  }
  return csv_projection(rows, {"theorem bound: alpha* against pi(K) * gap", "slack = alpha_star - pi_K_gap"});
}

void emit_report(const RunReport& report, const OutputConfig& output, std::ostream& fallback,
                 const std::vector<std::pair<std::string, std::string>>& extra_csv) {
  const std::string text = write_json(assemble(report));
  const bool want_json = std::find(output.formats.begin(), output.formats.end(), "json") != output.formats.end();
  const bool want_csv = std::find(output.formats.begin(), output.formats.end(), "csv") != output.formats.end();
  if (output.path.empty()) {
    if (want_json || !want_csv) fallback << text;
    if (want_csv) fallback << csv_projection(report.records, {"command: " + report.command});
    return;
  }
  if (want_json || !want_csv) write_file(output.path, text);
  if (want_csv) {
    write_file(with_suffix(output.path, ".csv"),
               csv_projection(report.records, {"command: " + report.command,
                                               "config_hash: " + config_hash(report.config)}));
    for (const auto& [suffix, body] : extra_csv) write_file(with_suffix(output.path, suffix), body);
  }
}

}  // namespace hitgap
