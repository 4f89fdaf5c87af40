#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "routebench/backend_gateway.hpp"
#include "routebench/burden_profiles.hpp"
#include "routebench/prompt_pool.hpp"

namespace routebench::runner {

// One log row. Flattened combo identity plus the ground-truth route
// and state flag so the analyzer never needs the pool file.
// record / route_correct are present iff the class is ok;
// state_retained is present iff the prompt was state-sensitive AND the
// class is ok. Failed state-sensitive rows count as not retained via
// the state_sensitive flag.
struct RequestOutcome {
  std::string backend_id;
  profiles::ModeName mode = profiles::ModeName::MJ;
  profiles::Constraint constraint = profiles::Constraint::limited;
  profiles::Transport transport = profiles::Transport::non_stream;
  int combo_index = 0;
  std::string prompt_id;
  schema::RouteLabel gt_route = schema::RouteLabel::chat;
  bool state_sensitive = false;
  schema::FailureClass failure_class = schema::FailureClass::ok;
  std::optional<schema::ControlRecord> record;
  std::optional<bool> route_correct;
  std::optional<bool> state_retained;
  double latency_ms = 0.0;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  std::string timestamp;
  int attempt_count = 1;
};

struct AbortMark {
  int combo_index = 0;
  int completed_requests = 0;
  std::string reason;
};

struct RunResult {
  std::vector<RequestOutcome> rows;
  std::vector<AbortMark> aborts;
  std::map<schema::FailureClass, long> taxonomy;
};

struct RunOptions {
  std::uint64_t seed = 0;
  int workers = 1;
  // called once per finished combo; calls are serialized
  std::function<void(const profiles::ComboSpec&, long ok_rows, long total_rows)> progress;
};

// Deterministic rule check for state-sensitive prompts: the record
// must carry the expected route and the expected memory flag. No
// model-graded judging. Throws if the prompt is not state-sensitive.
bool judge_state_retention(const TaskPrompt& prompt, const schema::ControlRecord& record);

// Executes every (combo, prompt) pair. Combos run concurrently up to
// `workers`; rows land in deterministic (combo, prompt) order
// regardless of scheduling. A gateway exception aborts the affected
// combo with a mark, never silently dropping rows.
RunResult run_matrix(const profiles::MatrixConfig& config,
                     const std::vector<profiles::ComboSpec>& combos,
                     const std::vector<TaskPrompt>& pool, const profiles::TemplateSet& templates,
                     gateway::Gateway& gw, const RunOptions& options);

// ---- outcome log (JSONL) ----

inline constexpr std::string_view kOutcomeSchemaVersion = "routebench.outcome.v1";

struct OutcomeLog {
  nlohmann::json header;
  std::vector<RequestOutcome> rows;
  std::vector<AbortMark> aborts;
};

nlohmann::json outcome_to_json(const RequestOutcome& row);
RequestOutcome outcome_from_json(const nlohmann::json& value);

// Header line first, then one row per line in run order, then abort
// marks. Content is deterministic for a fixed (config, seed) except
// for timestamps.
void write_outcome_log(const std::filesystem::path& path, const nlohmann::json& header,
                       const std::vector<RequestOutcome>& rows,
                       const std::vector<AbortMark>& aborts);

// Throws std::runtime_error listing 1-based line numbers of corrupt rows.
OutcomeLog read_outcome_log(const std::filesystem::path& path);

nlohmann::json make_log_header(const profiles::MatrixConfig& config, std::uint64_t seed,
                               std::size_t combo_count);

std::map<schema::FailureClass, long> taxonomy_counts(const std::vector<RequestOutcome>& rows);

std::string iso8601_now();

}  // namespace routebench::runner
