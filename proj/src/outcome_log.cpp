#include <fstream>
#include <stdexcept>

#include "routebench/matrix_runner.hpp"

namespace routebench::runner {

nlohmann::json make_log_header(const profiles::MatrixConfig& config, std::uint64_t seed,
                               std::size_t combo_count) {
  return nlohmann::json{
      {"schema", std::string(kOutcomeSchemaVersion)},
      {"config_hash", profiles::config_hash(config)},
      {"seed", seed},
      {"combos", combo_count},
      {"requests_per_combo", config.requests_per_combo},
      {"created", iso8601_now()},
  };
}

nlohmann::json outcome_to_json(const RequestOutcome& row) {
  nlohmann::json value{
      {"backend", row.backend_id},
      {"mode", std::string(profiles::to_string(row.mode))},
      {"constraint", std::string(profiles::to_string(row.constraint))},
      {"transport", std::string(profiles::to_string(row.transport))},
      {"combo", row.combo_index},
      {"prompt", row.prompt_id},
      {"gt_route", std::string(schema::to_string(row.gt_route))},
      {"state_sensitive", row.state_sensitive},
      {"class", std::string(schema::to_string(row.failure_class))},
      {"latency_ms", row.latency_ms},
      {"prompt_tokens", row.prompt_tokens},
      {"completion_tokens", row.completion_tokens},
      {"ts", row.timestamp},
      {"attempts", row.attempt_count},
  };
  if (row.record) value["record"] = schema::to_json(*row.record);
  if (row.route_correct) value["route_correct"] = *row.route_correct;
  if (row.state_retained) value["state_retained"] = *row.state_retained;
  return value;
}

RequestOutcome outcome_from_json(const nlohmann::json& value) {
  RequestOutcome row;
  row.backend_id = value.at("backend").get<std::string>();
  auto mode = profiles::mode_from_string(value.at("mode").get<std::string>());
  auto constraint = profiles::constraint_from_string(value.at("constraint").get<std::string>());
  auto transport = profiles::transport_from_string(value.at("transport").get<std::string>());
  auto gt_route = schema::route_from_string(value.at("gt_route").get<std::string>());
  auto failure = schema::failure_from_string(value.at("class").get<std::string>());
  if (!mode || !constraint || !transport || !gt_route || !failure) {
    throw std::runtime_error("unknown enum value");
  }
  row.mode = *mode;
  row.constraint = *constraint;
  row.transport = *transport;
  row.gt_route = *gt_route;
  row.failure_class = *failure;
  row.combo_index = value.at("combo").get<int>();
  row.prompt_id = value.at("prompt").get<std::string>();
  row.state_sensitive = value.value("state_sensitive", false);
  row.latency_ms = value.at("latency_ms").get<double>();
  row.prompt_tokens = value.at("prompt_tokens").get<long>();
  row.completion_tokens = value.at("completion_tokens").get<long>();
  row.timestamp = value.value("ts", std::string{});
  row.attempt_count = value.value("attempts", 1);
  if (value.contains("record")) {
    auto record = schema::record_from_json(value.at("record"));
    if (!record) throw std::runtime_error("row carries an invalid record");
    row.record = *record;
  }
  if (value.contains("route_correct")) row.route_correct = value.at("route_correct").get<bool>();
  if (value.contains("state_retained")) {
    row.state_retained = value.at("state_retained").get<bool>();
  }
  if (row.failure_class != schema::FailureClass::ok && (row.record || row.route_correct)) {
    throw std::runtime_error("failed row carries record fields");
  }
  if (row.failure_class == schema::FailureClass::ok && !row.record) {
    throw std::runtime_error("ok row missing its record");
  }
  if (row.state_retained &&
      (!row.state_sensitive || row.failure_class != schema::FailureClass::ok)) {
    throw std::runtime_error("state_retained present outside the state-sensitive ok subset");
  }
  return row;
}

void write_outcome_log(const std::filesystem::path& path, const nlohmann::json& header,
                       const std::vector<RequestOutcome>& rows,
                       const std::vector<AbortMark>& aborts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("outcome log: cannot write " + path.string());
  out << header.dump() << '\n';
  for (const RequestOutcome& row : rows) {
    out << outcome_to_json(row).dump() << '\n';
  }
  for (const AbortMark& mark : aborts) {
    out << nlohmann::json{{"abort_combo", mark.combo_index},
                          {"completed_requests", mark.completed_requests},
                          {"reason", mark.reason}}
               .dump()
        << '\n';
  }
  if (!out) throw std::runtime_error("outcome log: write failed for " + path.string());
}

OutcomeLog read_outcome_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("outcome log: cannot open " + path.string());

  OutcomeLog log;
  std::string line;
  int line_no = 0;
  std::vector<std::string> corrupt;
  while (std::getline(in, line)) {
    ++line_no;
    if (schema::trim(line).empty()) continue;
    nlohmann::json value = nlohmann::json::parse(line, nullptr, false);
    if (value.is_discarded() || !value.is_object()) {
      corrupt.push_back("line " + std::to_string(line_no) + ": malformed JSON");
      continue;
    }
    if (line_no == 1 && value.contains("schema")) {
      log.header = value;
      continue;
    }
    if (value.contains("abort_combo")) {
      AbortMark mark;
      mark.combo_index = value.value("abort_combo", 0);
      mark.completed_requests = value.value("completed_requests", 0);
      mark.reason = value.value("reason", std::string{});
      log.aborts.push_back(std::move(mark));
      continue;
    }
    try {
      log.rows.push_back(outcome_from_json(value));
    } catch (const std::exception& e) {
      corrupt.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  if (!corrupt.empty()) {
    std::string message = "outcome log " + path.string() + " has corrupt rows: ";
    for (std::size_t i = 0; i < corrupt.size(); ++i) {
      if (i) message += "; ";
      message += corrupt[i];
      if (i == 9 && corrupt.size() > 10) {
        message += "; (+" + std::to_string(corrupt.size() - 10) + " more)";
        break;
      }
    }
    throw std::runtime_error(message);
  }
  return log;
}

}  // namespace routebench::runner
