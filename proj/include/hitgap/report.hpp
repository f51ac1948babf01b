#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hitgap/config.hpp"
#include "hitgap/verify.hpp"

namespace hitgap {

inline constexpr const char* kVersion = "0.1.0";

/// Serializes with sorted keys and every double at 17 significant digits.
/// Non-finite doubles become the strings "inf", "-inf" and "nan".
std::string write_json(const nlohmann::json& doc, int indent = 2);

std::uint64_t fnv1a(std::string_view bytes);

/// 16 hex digits of FNV-1a over the canonical compact serialization.
std::string config_hash(const nlohmann::json& effective_config);

nlohmann::json versions();

struct RunReport {
  std::string command;
  nlohmann::json config;  ///< effective config
  ResolvedSeed seed;
  nlohmann::json records = nlohmann::json::array();
  nlohmann::json summary = nlohmann::json::object();
  nlohmann::json timestamp = nlohmann::json::object();  ///< every wall-clock value lives here
};

nlohmann::json assemble(const RunReport& report);

/// Flat CSV projection of an array of objects: one row per record, scalar
/// fields only, columns listed in a '#' header comment.
std::string csv_projection(const nlohmann::json& records, const std::vector<std::string>& header_lines);

/// (instance, alpha*, pi(K) gap, slack) rows of the theorem-bound reports.
std::string theorem_csv(const std::vector<VerificationReport>& reports);

/// Writes the JSON report (and CSV files when requested). An empty path sends
/// the JSON to `fallback`. Throws Error when a path is unwritable.
void emit_report(const RunReport& report, const OutputConfig& output, std::ostream& fallback,
                 const std::vector<std::pair<std::string, std::string>>& extra_csv = {});

}  // namespace hitgap
