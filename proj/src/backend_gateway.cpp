#include "routebench/backend_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "routebench/compact_codec.hpp"
#include "routebench/rng.hpp"

namespace routebench::gateway {

ProfileBook ProfileBook::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("profiles: cannot open " + path.string());
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw std::runtime_error("profiles: malformed JSON in " + path.string());
  }

  ProfileBook book;
  for (const auto& [backend_id, modes] : doc.items()) {
    for (const auto& [mode_name, p] : modes.items()) {
      if (!profiles::mode_from_string(mode_name)) {
        throw std::runtime_error("profiles: unknown mode " + mode_name);
      }
      SimulatorProfile profile;
      profile.fc_rate = p.at("fc_rate").get<double>();
      profile.sr_success = p.at("sr_success").get<double>();
      if (profile.fc_rate < 0.0 || profile.fc_rate > 1.0 || profile.sr_success < 0.0 ||
          profile.sr_success > 1.0) {
        throw std::runtime_error("profiles: rate out of [0,1] for " + backend_id + "/" + mode_name);
      }
      const auto& matrix = p.at("route_confusion");
      if (matrix.size() != 4) throw std::runtime_error("profiles: confusion matrix must be 4x4");
      for (std::size_t i = 0; i < 4; ++i) {
        const auto& row = matrix.at(i);
        if (row.size() != 4) throw std::runtime_error("profiles: confusion matrix must be 4x4");
        double sum = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
          profile.route_confusion[i][j] = row.at(j).get<double>();
          sum += profile.route_confusion[i][j];
        }
        if (std::abs(sum - 1.0) > 1e-9) {
          throw std::runtime_error("profiles: confusion row " + std::to_string(i) +
                                   " of " + backend_id + "/" + mode_name + " sums to " +
                                   std::to_string(sum));
        }
      }
      profile.latency.median_ms = p.at("latency").at("median_ms").get<double>();
      profile.latency.sigma = p.at("latency").at("sigma").get<double>();
      profile.tokens_per_request = p.at("tokens_per_request").get<long>();
      if (profile.tokens_per_request <= 0) {
        throw std::runtime_error("profiles: tokens_per_request must be positive");
      }
      book.put(backend_id, *profiles::mode_from_string(mode_name), std::move(profile));
    }
  }
  return book;
}

const SimulatorProfile& ProfileBook::at(const std::string& backend_id,
                                        profiles::ModeName mode) const {
  auto backend_it = profiles_.find(backend_id);
  if (backend_it != profiles_.end()) {
    auto mode_it = backend_it->second.find(std::string(profiles::to_string(mode)));
    if (mode_it != backend_it->second.end()) return mode_it->second;
  }
  throw std::runtime_error("profiles: no entry for " + backend_id + "/" +
                           std::string(profiles::to_string(mode)));
}

bool ProfileBook::contains(const std::string& backend_id, profiles::ModeName mode) const {
  auto backend_it = profiles_.find(backend_id);
  return backend_it != profiles_.end() &&
         backend_it->second.count(std::string(profiles::to_string(mode))) > 0;
}

void ProfileBook::put(const std::string& backend_id, profiles::ModeName mode,
                      SimulatorProfile profile) {
  profiles_[backend_id][std::string(profiles::to_string(mode))] = profile;
}

namespace {

// uniform draw counters 0..9; the latency normal() doubles its counter
// internally and therefore owns raw slots 32/33, clear of all of these
enum DrawSlot : std::uint64_t {
  kFormat = 0,
  kCorruptClass = 1,
  kStateRetention = 2,
  kRoute = 3,
  kToolFlag = 4,
  kConfidence = 5,
  kTokens = 8,
  kProseWrap = 9,
  kLatency = 16,
};

int route_index(schema::RouteLabel r) {
  switch (r) {
    case schema::RouteLabel::chat: return 0;
    case schema::RouteLabel::task: return 1;
    case schema::RouteLabel::dev: return 2;
    case schema::RouteLabel::doc: return 3;
  }
  return 0;
}

schema::RouteLabel route_at(int index) {
  return schema::kAllRoutes[static_cast<std::size_t>(index) % 4];
}

schema::RouteLabel draw_route(const SimulatorProfile& profile, schema::RouteLabel truth,
                              double u) {
  const auto& row = profile.route_confusion[route_index(truth)];
  double cumulative = 0.0;
  for (int j = 0; j < 4; ++j) {
    cumulative += row[j];
    if (u < cumulative) return route_at(j);
  }
  return route_at(3);
}

}  // namespace

SimulatorGateway::SimulatorGateway(ProfileBook book, std::uint64_t seed, long completion_hard_cap)
    : book_(std::move(book)), seed_(seed), completion_hard_cap_(completion_hard_cap) {}

BackendResponse SimulatorGateway::complete(const profiles::RequestPayload& payload) {
  const SimulatorProfile& profile = book_.at(payload.backend_id, payload.mode);
  const bool compact = payload.mode == profiles::ModeName::MCLR;

  rng::Stream stream(seed_, payload.rng_key + "#" + std::to_string(payload.request_index));

  BackendResponse response;
  response.http_status = 200;

  const bool format_ok = stream.uniform(kFormat) < profile.fc_rate;
  if (!format_ok) {
    // structural failures skew heavily toward parse-level corruption
    const bool parse_level = stream.uniform(kCorruptClass) < 0.84;
    if (compact) {
      response.raw_text = parse_level ? "route unclear, cannot commit to a line"
                                      : "R=docs;C=50;M=0;T=0;X=unsure";
    } else {
      response.raw_text = parse_level ? R"({"route":"chat","confidence":0.)"
                                      : R"({"route":"docs","confidence":0.5,"memory":false,"tool":false,"reason":"unsure"})";
    }
  } else {
    schema::ControlRecord record;
    bool retained = false;
    if (payload.state_sensitive && payload.expected_route && payload.expected_memory) {
      retained = stream.uniform(kStateRetention) < profile.sr_success;
      if (retained) {
        record.route = *payload.expected_route;
        record.memory_flag = *payload.expected_memory;
      } else {
        record.route = draw_route(profile, payload.ground_truth, stream.uniform(kRoute));
        record.memory_flag = !*payload.expected_memory;
      }
    } else {
      record.route = draw_route(profile, payload.ground_truth, stream.uniform(kRoute));
      record.memory_flag = false;
    }
    record.tool_flag = stream.uniform(kToolFlag) < 0.3;
    int confidence = 55 + static_cast<int>(stream.uniform(kConfidence) * 45.0);
    record.confidence = confidence / 100.0;
    record.reason = std::string("looks like a ") + std::string(schema::to_string(record.route)) +
                    " request";

    if (compact) {
      response.raw_text = codec::emit_compact(record);
    } else {
      std::string body = schema::serialize(record);
      if (stream.uniform(kProseWrap) < 0.15) {
        response.raw_text = "Sure! Here is the JSON: " + body;
      } else {
        response.raw_text = body;
      }
    }
  }

  response.latency_ms = profile.latency.median_ms *
                        std::exp(profile.latency.sigma * stream.normal(kLatency));

  double token_scale = 0.9 + 0.2 * stream.uniform(kTokens);
  long total = std::lround(static_cast<double>(profile.tokens_per_request) * token_scale);
  long completion = std::lround(static_cast<double>(total) * 0.12);
  long cap = std::max(1L, std::min<long>(payload.max_output_tokens, completion_hard_cap_));
  completion = std::clamp(completion, 1L, cap);
  response.prompt_tokens = std::max(0L, total - completion);
  response.completion_tokens = completion;
  return response;
}

}  // namespace routebench::gateway
