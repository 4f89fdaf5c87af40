#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "routebench/control_schema.hpp"

namespace routebench::runner {

enum class Stratum { simple, complex_case, edge };

std::string_view to_string(Stratum s);
std::optional<Stratum> stratum_from_string(std::string_view text);

// One benchmark request. State-sensitive prompts carry an expected
// behavior of the form "route=<label>;memory=<true|false>" that the
// deterministic retention judge checks against the parsed record.
struct TaskPrompt {
  std::string id;
  std::string text;
  schema::RouteLabel ground_truth_route = schema::RouteLabel::chat;
  Stratum stratum = Stratum::simple;
  bool state_sensitive = false;
  std::optional<std::string> expected_state_behavior;

  std::optional<schema::RouteLabel> expected_route() const;
  std::optional<bool> expected_memory() const;
};

// Loads a JSONL pool and validates it: per-prompt invariants
// (state_sensitive implies an expected behavior), full route coverage
// in every stratum, and size equal to `expected_size` when positive.
// Throws std::runtime_error with the offending line or gap.
std::vector<TaskPrompt> load_pool(const std::filesystem::path& path, int expected_size);

}  // namespace routebench::runner
