#pragma once

// JSON scenario files.  Complex numbers are [re, im] pairs, matrices are
// arrays of rows, and both interference covariance families are stored
// sparsely (zero entries omitted).  The "schema" field is mandatory.

#include <string>

#include <json.hpp>

#include "coexist/model.hpp"

namespace coexist {

inline constexpr const char* kScenarioSchema = "coexist.scenario/1";

nlohmann::json scenario_to_json(const Scenario& s);

/// Parses and validates.  Throws ValidationError on a missing or unknown
/// schema, malformed content, or any scenario invariant violation.
Scenario scenario_from_json(const nlohmann::json& doc);

void write_scenario(const Scenario& s, const std::string& path);
Scenario read_scenario(const std::string& path);

/// Serialized form used for files (pretty-printed, trailing newline).
std::string dump_scenario(const Scenario& s);

nlohmann::json complex_to_json(std::complex<double> z);
nlohmann::json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const nlohmann::json& j);

}  // namespace coexist
