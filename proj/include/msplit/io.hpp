#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "msplit/chain.hpp"
#include "msplit/plan.hpp"
#include "msplit/sde.hpp"
#include "msplit/variance.hpp"

namespace msplit {

// Reports and configs are JSON documents with insertion order preserved,
// so a report reads top to bottom in the order it was assembled and two
// runs of the same experiment serialize byte for byte.
using Json = nlohmann::ordered_json;

// Parse a configuration document. Syntax errors surface as config_error
// with the parser's position information.
Json parse_config_text(const std::string& text);

// Read a whole file; missing or unreadable paths surface as config_error
// naming the path.
std::string read_text_file(const std::string& path);

// Field access with errors that name the offending key. `display` is the
// dotted path shown in messages; it defaults to the key itself.
const Json& require_key(const Json& obj, const std::string& key, const std::string& display = "");
double require_number(const Json& obj, const std::string& key, const std::string& display = "");
std::int64_t require_integer(const Json& obj, const std::string& key,
                             const std::string& display = "");
std::string require_string(const Json& obj, const std::string& key,
                           const std::string& display = "");
bool get_bool(const Json& obj, const std::string& key, bool fallback);
std::vector<double> number_list(const Json& j, const std::string& display);
std::vector<std::int64_t> integer_list(const Json& j, const std::string& display);

// Chain description <-> JSON. The level count is implied by the kernel
// list, one interior block fewer than there are frontiers.
ChainSpec spec_from_json(const Json& j);
Json spec_to_json(const ChainSpec& spec);

Plan plan_from_json(const Json& j);
Json plan_to_json(const Plan& plan);

OUConfig ou_from_json(const Json& j);
Json ou_to_json(const OUConfig& cfg);

// "unit" or "reciprocal"; anything else is a config error.
CostModel cost_model_from_name(const std::string& name);

// Render a report document; two-space indent, trailing newline.
std::string format_report(const Json& report);

// Reports accumulate: an existing file grows by one document per run and
// is never truncated.
void append_report(const std::string& path, const Json& report);

// Plot sidecar: one '#'-prefixed header line naming the columns, then one
// space-separated row per record, full double precision.
void write_sidecar(const std::string& path, const std::vector<std::string>& columns,
                   const std::vector<std::vector<double>>& rows);

}  // namespace msplit
