#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "routebench/control_schema.hpp"

namespace routebench::codec {

// Canonical compact line grammar. This string is normative: the prompt
// template injects it verbatim and the simulator emits against it.
inline constexpr std::string_view kCompactGrammar =
    "R=<route>;C=<int 0..100>;M=<0|1>;T=<0|1>;X=<free text>";

// Raw tokens lifted from a compact line. Unvalidated; reconstruction
// applies defaults and route validation.
struct CompactCode {
  std::optional<std::string> route_token;
  std::optional<std::string> confidence_token;
  std::optional<std::string> memory_token;
  std::optional<std::string> tool_token;
  std::optional<std::string> reason_token;

  bool operator==(const CompactCode&) const = default;
};

struct CompactParseResult {
  schema::FailureClass failure = schema::FailureClass::ok;
  std::optional<CompactCode> code;

  bool ok() const { return failure == schema::FailureClass::ok; }
};

// Scans the output line by line for the first line matching the
// grammar (at least one recognizable KEY=VALUE segment, keys
// case-insensitive, whitespace around '=' and ';' ignored, X consumes
// the rest of its line). No matching line anywhere yields
// json_parse_error, keeping the two-bucket structural taxonomy. A
// recognizable line without R still parses; the missing route then
// fails at reconstruction as schema_invalid.
CompactParseResult parse_compact(std::string_view raw);

// Deterministic local reconstruction. Total over tokens: confidence is
// int/100 clamped to [0,1] (default 0.5 when absent or unreadable),
// flags default false, reason defaults to "(compact)". Only an absent
// or unknown route token fails, as schema_invalid. The returned record
// always passes validate_schema.
schema::ParseResult reconstruct(const CompactCode& code);

// Inverse emission used by the simulator: one grammar line with
// confidence rounded onto the 0..100 integer grid. Newlines in the
// reason are flattened to spaces so the emission stays one line.
std::string emit_compact(const schema::ControlRecord& record);

}  // namespace routebench::codec
