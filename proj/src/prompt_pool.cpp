#include "routebench/prompt_pool.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace routebench::runner {

std::string_view to_string(Stratum s) {
  switch (s) {
    case Stratum::simple: return "simple";
    case Stratum::complex_case: return "complex";
    case Stratum::edge: return "edge";
  }
  return "simple";
}

std::optional<Stratum> stratum_from_string(std::string_view text) {
  if (text == "simple") return Stratum::simple;
  if (text == "complex") return Stratum::complex_case;
  if (text == "edge") return Stratum::edge;
  return std::nullopt;
}

namespace {

// expected_state_behavior grammar: "route=<label>;memory=<true|false|1|0>"
std::optional<std::string> behavior_field(const std::string& behavior, std::string_view key) {
  std::size_t pos = 0;
  while (pos < behavior.size()) {
    std::size_t sep = behavior.find(';', pos);
    if (sep == std::string::npos) sep = behavior.size();
    std::string_view segment(behavior.data() + pos, sep - pos);
    std::size_t eq = segment.find('=');
    if (eq != std::string_view::npos) {
      std::string k = schema::trim(segment.substr(0, eq));
      if (k == key) return schema::trim(segment.substr(eq + 1));
    }
    pos = sep + 1;
  }
  return std::nullopt;
}

}  // namespace

std::optional<schema::RouteLabel> TaskPrompt::expected_route() const {
  if (!expected_state_behavior) return std::nullopt;
  if (auto value = behavior_field(*expected_state_behavior, "route")) {
    return schema::route_from_string_ci(*value);
  }
  return std::nullopt;
}

std::optional<bool> TaskPrompt::expected_memory() const {
  if (!expected_state_behavior) return std::nullopt;
  if (auto value = behavior_field(*expected_state_behavior, "memory")) {
    if (*value == "true" || *value == "1") return true;
    if (*value == "false" || *value == "0") return false;
  }
  return std::nullopt;
}

std::vector<TaskPrompt> load_pool(const std::filesystem::path& path, int expected_size) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("prompt pool: cannot open " + path.string());

  std::vector<TaskPrompt> pool;
  std::set<std::string> seen_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (schema::trim(line).empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    auto fail = [&](const std::string& why) -> std::runtime_error {
      return std::runtime_error("prompt pool line " + std::to_string(line_no) + ": " + why);
    };
    if (row.is_discarded() || !row.is_object()) throw fail("malformed JSON");

    TaskPrompt prompt;
    try {
      prompt.id = row.at("id").get<std::string>();
      prompt.text = row.at("text").get<std::string>();
      auto route = schema::route_from_string(row.at("ground_truth_route").get<std::string>());
      if (!route) throw fail("unknown ground_truth_route");
      prompt.ground_truth_route = *route;
      auto stratum = stratum_from_string(row.at("stratum").get<std::string>());
      if (!stratum) throw fail("unknown stratum");
      prompt.stratum = *stratum;
      prompt.state_sensitive = row.at("state_sensitive").get<bool>();
      if (row.contains("expected_state_behavior")) {
        prompt.expected_state_behavior = row.at("expected_state_behavior").get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw fail(e.what());
    }

    if (prompt.text.empty()) throw fail("empty prompt text");
    if (!seen_ids.insert(prompt.id).second) throw fail("duplicate id " + prompt.id);
    if (prompt.state_sensitive) {
      if (!prompt.expected_state_behavior) throw fail("state_sensitive without expected_state_behavior");
      if (!prompt.expected_route() || !prompt.expected_memory()) {
        throw fail("unparseable expected_state_behavior: " + *prompt.expected_state_behavior);
      }
    }
    pool.push_back(std::move(prompt));
  }

  if (pool.empty()) throw std::runtime_error("prompt pool: " + path.string() + " is empty");
  if (expected_size > 0 && static_cast<int>(pool.size()) != expected_size) {
    throw std::runtime_error("prompt pool: size " + std::to_string(pool.size()) +
                             " does not match configured requests per combo " +
                             std::to_string(expected_size));
  }

  // every stratum must cover every route
  for (Stratum s : {Stratum::simple, Stratum::complex_case, Stratum::edge}) {
    for (schema::RouteLabel r : schema::kAllRoutes) {
      bool covered = false;
      for (const TaskPrompt& p : pool) {
        if (p.stratum == s && p.ground_truth_route == r) {
          covered = true;
          break;
        }
      }
      if (!covered) {
        throw std::runtime_error(std::string("prompt pool: stratum ") +
                                 std::string(to_string(s)) + " has no " +
                                 std::string(schema::to_string(r)) + " prompts");
      }
    }
  }

  return pool;
}

}  // namespace routebench::runner
