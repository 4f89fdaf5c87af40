#include "routebench/compact_codec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace routebench::codec {

namespace {

// Tries to read the line as a sequence of KEY=VALUE segments separated
// by ';'. Returns a code when at least one known key was found.
std::optional<CompactCode> scan_line(std::string_view line) {
  CompactCode code;
  bool recognized = false;
  std::size_t pos = 0;
  while (pos < line.size()) {
    std::size_t eq = line.find('=', pos);
    if (eq == std::string_view::npos) break;
    std::string key = schema::trim(line.substr(pos, eq - pos));
    if (key.size() != 1) break;
    char k = static_cast<char>(std::tolower(static_cast<unsigned char>(key[0])));
    if (k != 'r' && k != 'c' && k != 'm' && k != 't' && k != 'x') break;

    std::string value;
    if (k == 'x') {
      // X consumes the remainder of the line, ';' included.
      value = schema::trim(line.substr(eq + 1));
      pos = line.size();
    } else {
      std::size_t sep = line.find(';', eq + 1);
      if (sep == std::string_view::npos) sep = line.size();
      value = schema::trim(line.substr(eq + 1, sep - eq - 1));
      pos = sep + 1 > line.size() ? line.size() : sep + 1;
    }

    recognized = true;
    auto assign = [&](std::optional<std::string>& slot) {
      if (!slot) slot = value;  // first occurrence wins
    };
    switch (k) {
      case 'r': assign(code.route_token); break;
      case 'c': assign(code.confidence_token); break;
      case 'm': assign(code.memory_token); break;
      case 't': assign(code.tool_token); break;
      case 'x': assign(code.reason_token); break;
    }
  }
  if (!recognized) return std::nullopt;
  return code;
}

std::optional<int> parse_int(std::string_view token) {
  int value = 0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

CompactParseResult parse_compact(std::string_view raw) {
  CompactParseResult result;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    std::size_t nl = raw.find('\n', pos);
    std::string_view line = raw.substr(pos, nl == std::string_view::npos ? raw.size() - pos : nl - pos);
    if (auto code = scan_line(line)) {
      result.code = std::move(*code);
      return result;  // first matching line wins
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  result.failure = schema::FailureClass::json_parse_error;
  return result;
}

schema::ParseResult reconstruct(const CompactCode& code) {
  schema::ParseResult result;

  if (!code.route_token) {
    result.failure = schema::FailureClass::schema_invalid;
    result.violations.push_back({".route", "absent"});
    return result;
  }
  std::optional<schema::RouteLabel> route = schema::route_from_string_ci(*code.route_token);
  if (!route) {
    result.failure = schema::FailureClass::schema_invalid;
    result.violations.push_back({".route", "not in {chat,task,dev,doc}"});
    return result;
  }

  schema::ControlRecord record;
  record.route = *route;

  record.confidence = 0.5;
  if (code.confidence_token) {
    if (std::optional<int> c = parse_int(*code.confidence_token)) {
      record.confidence = std::clamp(*c / 100.0, 0.0, 1.0);
    }
    // unreadable token behaves like an absent one
  }

  auto flag_of = [](const std::optional<std::string>& token) {
    return token && *token == "1";
  };
  record.memory_flag = flag_of(code.memory_token);
  record.tool_flag = flag_of(code.tool_token);

  record.reason = "(compact)";
  if (code.reason_token && !schema::trim(*code.reason_token).empty()) {
    record.reason = *code.reason_token;
    if (record.reason.size() > schema::kReasonMaxChars) {
      record.reason.resize(schema::kReasonMaxChars);
      while (!record.reason.empty() &&
             (static_cast<unsigned char>(record.reason.back()) & 0xC0) == 0x80) {
        record.reason.pop_back();
      }
    }
  }

  result.record = std::move(record);
  return result;
}

std::string emit_compact(const schema::ControlRecord& record) {
  int confidence = static_cast<int>(std::lround(record.confidence * 100.0));
  std::string reason = record.reason;
  for (char& c : reason) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::string line = "R=";
  line += schema::to_string(record.route);
  line += ";C=" + std::to_string(confidence);
  line += ";M=";
  line += record.memory_flag ? '1' : '0';
  line += ";T=";
  line += record.tool_flag ? '1' : '0';
  line += ";X=" + reason;
  return line;
}

}  // namespace routebench::codec
