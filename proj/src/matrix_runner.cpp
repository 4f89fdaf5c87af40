#include "routebench/matrix_runner.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace routebench::runner {

std::string iso8601_now() {
  std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return std::string(buffer);
}

bool judge_state_retention(const TaskPrompt& prompt, const schema::ControlRecord& record) {
  if (!prompt.state_sensitive) {
    throw std::logic_error("judge_state_retention: prompt " + prompt.id +
                           " is not state-sensitive");
  }
  std::optional<schema::RouteLabel> route = prompt.expected_route();
  std::optional<bool> memory = prompt.expected_memory();
  if (!route || !memory) {
    throw std::logic_error("judge_state_retention: prompt " + prompt.id +
                           " has no parseable expected behavior");
  }
  return record.route == *route && record.memory_flag == *memory;
}

namespace {

RequestOutcome make_outcome(const profiles::ComboSpec& combo, const TaskPrompt& prompt,
                            const gateway::BackendResponse& response) {
  RequestOutcome outcome;
  outcome.backend_id = combo.backend_id;
  outcome.mode = combo.profile.mode_name;
  outcome.constraint = combo.constraint;
  outcome.transport = combo.transport;
  outcome.combo_index = combo.index;
  outcome.prompt_id = prompt.id;
  outcome.gt_route = prompt.ground_truth_route;
  outcome.state_sensitive = prompt.state_sensitive;
  outcome.latency_ms = response.latency_ms;
  outcome.prompt_tokens = response.prompt_tokens;
  outcome.completion_tokens = response.completion_tokens;
  outcome.attempt_count = response.attempts;
  outcome.timestamp = iso8601_now();

  if (response.failure != schema::FailureClass::ok) {
    outcome.failure_class = response.failure;
    return outcome;
  }

  schema::ParseResult parsed = profiles::realize(combo, response.raw_text);
  outcome.failure_class = parsed.failure;
  if (parsed.ok()) {
    outcome.record = parsed.record;
    outcome.route_correct = parsed.record->route == prompt.ground_truth_route;
    if (prompt.state_sensitive) {
      outcome.state_retained = judge_state_retention(prompt, *parsed.record);
    }
  }
  return outcome;
}

}  // namespace

RunResult run_matrix(const profiles::MatrixConfig& config,
                     const std::vector<profiles::ComboSpec>& combos,
                     const std::vector<TaskPrompt>& pool, const profiles::TemplateSet& templates,
                     gateway::Gateway& gw, const RunOptions& options) {
  if (combos.empty()) throw std::runtime_error("run_matrix: no combos to execute");
  if (pool.empty()) throw std::runtime_error("run_matrix: empty prompt pool");
  if (config.requests_per_combo > 0 &&
      static_cast<int>(pool.size()) != config.requests_per_combo) {
    throw std::runtime_error("run_matrix: pool size does not match requests_per_combo");
  }

  const std::size_t per_combo = pool.size();
  std::vector<std::optional<RequestOutcome>> slots(combos.size() * per_combo);
  std::vector<std::optional<AbortMark>> abort_slots(combos.size());

  std::atomic<std::size_t> next_combo{0};
  std::mutex progress_mutex;

  auto worker = [&]() {
    while (true) {
      std::size_t combo_pos = next_combo.fetch_add(1);
      if (combo_pos >= combos.size()) return;
      const profiles::ComboSpec& combo = combos[combo_pos];
      long ok_rows = 0;
      long total_rows = 0;
      for (std::size_t i = 0; i < per_combo; ++i) {
        profiles::RequestPayload payload = assemble_request(combo, pool[i], templates);
        payload.request_index = static_cast<int>(i);
        try {
          gateway::BackendResponse response = gw.complete(payload);
          RequestOutcome outcome = make_outcome(combo, pool[i], response);
          if (outcome.failure_class == schema::FailureClass::ok) ++ok_rows;
          ++total_rows;
          slots[combo_pos * per_combo + i] = std::move(outcome);
        } catch (const std::exception& e) {
          abort_slots[combo_pos] =
              AbortMark{combo.index, static_cast<int>(i), e.what()};
          break;
        }
      }
      if (options.progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        options.progress(combo, ok_rows, total_rows);
      }
    }
  };

  int workers = std::max(1, options.workers);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  RunResult result;
  result.rows.reserve(slots.size());
  for (std::optional<RequestOutcome>& slot : slots) {
    if (slot) result.rows.push_back(std::move(*slot));
  }
  for (std::optional<AbortMark>& mark : abort_slots) {
    if (mark) result.aborts.push_back(*mark);
  }
  result.taxonomy = taxonomy_counts(result.rows);
  return result;
}

std::map<schema::FailureClass, long> taxonomy_counts(const std::vector<RequestOutcome>& rows) {
  std::map<schema::FailureClass, long> counts;
  for (schema::FailureClass c : schema::kAllFailureClasses) counts[c] = 0;
  for (const RequestOutcome& row : rows) ++counts[row.failure_class];
  return counts;
}

}  // namespace routebench::runner
