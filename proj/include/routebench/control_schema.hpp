#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace routebench::schema {

// The four-label route ontology. Nothing else is constructible.
enum class RouteLabel { chat, task, dev, doc };

inline constexpr std::array<RouteLabel, 4> kAllRoutes = {
    RouteLabel::chat, RouteLabel::task, RouteLabel::dev, RouteLabel::doc};

std::string_view to_string(RouteLabel route);
std::optional<RouteLabel> route_from_string(std::string_view text);
// Case-insensitive variant used by the compact reconstructor.
std::optional<RouteLabel> route_from_string_ci(std::string_view text);

inline constexpr std::size_t kReasonMaxChars = 512;

// The five-field control record. Canonical JSON keys are
// route, confidence, memory, tool, reason.
struct ControlRecord {
  RouteLabel route = RouteLabel::chat;
  double confidence = 0.0;           // in [0, 1]
  bool memory_flag = false;
  bool tool_flag = false;
  std::string reason;                // non-empty after trimming, <= 512 chars

  bool operator==(const ControlRecord&) const = default;
};

// Outcome taxonomy. Every request resolves to exactly one class;
// only `ok` outcomes carry a ControlRecord.
enum class FailureClass {
  ok,
  json_parse_error,
  schema_invalid,
  http_400,
  rate_limited,
  timeout,
  transport_error,
};

inline constexpr std::array<FailureClass, 7> kAllFailureClasses = {
    FailureClass::ok,           FailureClass::json_parse_error,
    FailureClass::schema_invalid, FailureClass::http_400,
    FailureClass::rate_limited, FailureClass::timeout,
    FailureClass::transport_error,
};

std::string_view to_string(FailureClass cls);
std::optional<FailureClass> failure_from_string(std::string_view text);

// One schema violation, tagged with the path of the offending field.
struct Violation {
  std::string path;     // e.g. ".route"
  std::string message;  // e.g. "not in {chat,task,dev,doc}"
};

// Result of turning raw model output into a record. `record` is set
// iff `failure == ok`; `violations` is populated for schema_invalid.
struct ParseResult {
  FailureClass failure = FailureClass::ok;
  std::optional<ControlRecord> record;
  std::vector<Violation> violations;

  bool ok() const { return failure == FailureClass::ok; }
};

// Checks a parsed JSON value against the control-record schema and
// returns every violation, not just the first.
std::vector<Violation> validate_schema(const nlohmann::json& candidate);

// Parses complete model output into a ControlRecord. The only leniency
// is extracting the first parseable top-level JSON object from
// surrounding prose; everything else is strict. Yields
// json_parse_error when no object can be extracted and schema_invalid
// when the extracted object violates the schema. Reasons longer than
// 512 characters are truncated, not rejected.
ParseResult parse_control_record(std::string_view raw);

// Canonical single-line JSON serialization (sorted keys, no spaces).
std::string serialize(const ControlRecord& record);

nlohmann::json to_json(const ControlRecord& record);
std::optional<ControlRecord> record_from_json(const nlohmann::json& value);

// Scans `text` left to right and returns the first brace-balanced span
// that parses as a JSON object. Exposed for tests.
std::optional<std::string> extract_first_json_object(std::string_view text);

std::string trim(std::string_view text);

}  // namespace routebench::schema
