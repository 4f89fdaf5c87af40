#include "routebench/control_schema.hpp"

#include <algorithm>
#include <cctype>

namespace routebench::schema {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(RouteLabel route) {
  switch (route) {
    case RouteLabel::chat: return "chat";
    case RouteLabel::task: return "task";
    case RouteLabel::dev: return "dev";
    case RouteLabel::doc: return "doc";
  }
  return "chat";
}

std::optional<RouteLabel> route_from_string(std::string_view text) {
  for (RouteLabel r : kAllRoutes) {
    if (text == to_string(r)) return r;
  }
  return std::nullopt;
}

std::optional<RouteLabel> route_from_string_ci(std::string_view text) {
  return route_from_string(lower(text));
}

std::string_view to_string(FailureClass cls) {
  switch (cls) {
    case FailureClass::ok: return "ok";
    case FailureClass::json_parse_error: return "json_parse_error";
    case FailureClass::schema_invalid: return "schema_invalid";
    case FailureClass::http_400: return "http_400";
    case FailureClass::rate_limited: return "rate_limited";
    case FailureClass::timeout: return "timeout";
    case FailureClass::transport_error: return "transport_error";
  }
  return "transport_error";
}

std::optional<FailureClass> failure_from_string(std::string_view text) {
  for (FailureClass c : kAllFailureClasses) {
    if (text == to_string(c)) return c;
  }
  return std::nullopt;
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::vector<Violation> validate_schema(const nlohmann::json& candidate) {
  std::vector<Violation> violations;
  if (!candidate.is_object()) {
    violations.push_back({".", "not a JSON object"});
    return violations;
  }

  auto require = [&](const char* key) -> const nlohmann::json* {
    auto it = candidate.find(key);
    if (it == candidate.end()) {
      violations.push_back({std::string(".") + key, "absent"});
      return nullptr;
    }
    return &*it;
  };

  if (const nlohmann::json* route = require("route")) {
    if (!route->is_string()) {
      violations.push_back({".route", "expected string"});
    } else if (!route_from_string(route->get<std::string>())) {
      violations.push_back({".route", "not in {chat,task,dev,doc}"});
    }
  }

  if (const nlohmann::json* confidence = require("confidence")) {
    if (!confidence->is_number()) {
      violations.push_back({".confidence", "expected number"});
    } else {
      double v = confidence->get<double>();
      if (!(v >= 0.0 && v <= 1.0)) {
        violations.push_back({".confidence", "out of range [0,1]"});
      }
    }
  }

  for (const char* key : {"memory", "tool"}) {
    if (const nlohmann::json* flag = require(key)) {
      if (!flag->is_boolean()) {
        violations.push_back({std::string(".") + key, "expected boolean"});
      }
    }
  }

  if (const nlohmann::json* reason = require("reason")) {
    if (!reason->is_string()) {
      violations.push_back({".reason", "expected string"});
    } else if (trim(reason->get<std::string>()).empty()) {
      violations.push_back({".reason", "empty after trimming"});
    }
  }

  return violations;
}

std::optional<std::string> extract_first_json_object(std::string_view text) {
  for (std::size_t start = 0; start < text.size(); ++start) {
    if (text[start] != '{') continue;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) {
          std::string span(text.substr(start, i - start + 1));
          nlohmann::json parsed = nlohmann::json::parse(span, nullptr, false);
          if (!parsed.is_discarded() && parsed.is_object()) return span;
          break;  // candidate did not parse; try the next '{'
        }
      }
    }
  }
  return std::nullopt;
}

ParseResult parse_control_record(std::string_view raw) {
  ParseResult result;
  std::optional<std::string> span = extract_first_json_object(raw);
  if (!span) {
    result.failure = FailureClass::json_parse_error;
    return result;
  }

  nlohmann::json value = nlohmann::json::parse(*span);
  result.violations = validate_schema(value);
  if (!result.violations.empty()) {
    result.failure = FailureClass::schema_invalid;
    return result;
  }

  ControlRecord record;
  record.route = *route_from_string(value.at("route").get<std::string>());
  record.confidence = value.at("confidence").get<double>();
  record.memory_flag = value.at("memory").get<bool>();
  record.tool_flag = value.at("tool").get<bool>();
  record.reason = value.at("reason").get<std::string>();
  if (record.reason.size() > kReasonMaxChars) {
    record.reason.resize(kReasonMaxChars);
    // never cut a UTF-8 sequence in half
    while (!record.reason.empty() &&
           (static_cast<unsigned char>(record.reason.back()) & 0xC0) == 0x80) {
      record.reason.pop_back();
    }
  }
  result.record = std::move(record);
  return result;
}

nlohmann::json to_json(const ControlRecord& record) {
  return nlohmann::json{
      {"route", to_string(record.route)}, {"confidence", record.confidence},
      {"memory", record.memory_flag},     {"tool", record.tool_flag},
      {"reason", record.reason},
  };
}

std::optional<ControlRecord> record_from_json(const nlohmann::json& value) {
  if (!validate_schema(value).empty()) return std::nullopt;
  ControlRecord record;
  record.route = *route_from_string(value.at("route").get<std::string>());
  record.confidence = value.at("confidence").get<double>();
  record.memory_flag = value.at("memory").get<bool>();
  record.tool_flag = value.at("tool").get<bool>();
  record.reason = value.at("reason").get<std::string>();
  return record;
}

std::string serialize(const ControlRecord& record) {
  return to_json(record).dump();
}

}  // namespace routebench::schema
