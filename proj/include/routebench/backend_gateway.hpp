#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "routebench/burden_profiles.hpp"
#include "routebench/control_schema.hpp"

namespace routebench::gateway {

// What came back from a backend. latency_ms is always full-response
// wall time: the clock stops at the final byte, never at the first
// streamed chunk.
struct BackendResponse {
  std::string raw_text;
  double latency_ms = 0.0;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  std::optional<int> http_status;
  schema::FailureClass failure = schema::FailureClass::ok;
  int attempts = 1;
};

class Gateway {
 public:
  virtual ~Gateway() = default;
  virtual BackendResponse complete(const profiles::RequestPayload& payload) = 0;
};

struct LatencyModel {
  double median_ms = 100.0;
  double sigma = 0.2;  // log-normal shape
};

// Behavior profile for one (backend, mode) cell of the simulator.
struct SimulatorProfile {
  double fc_rate = 1.0;
  std::array<std::array<double, 4>, 4> route_confusion{};  // row-stochastic, gt -> predicted
  double sr_success = 1.0;
  LatencyModel latency;
  long tokens_per_request = 100;
};

class ProfileBook {
 public:
  static ProfileBook load(const std::filesystem::path& path);

  const SimulatorProfile& at(const std::string& backend_id, profiles::ModeName mode) const;
  bool contains(const std::string& backend_id, profiles::ModeName mode) const;
  void put(const std::string& backend_id, profiles::ModeName mode, SimulatorProfile profile);

 private:
  std::map<std::string, std::map<std::string, SimulatorProfile>> profiles_;
};

// Deterministic backend simulator. Every draw is keyed by
// (seed, combo-modulo-transport, request index), so a full run is
// reproducible bit for bit regardless of worker count, and stream /
// non-stream deliveries of the same request are identical.
class SimulatorGateway : public Gateway {
 public:
  SimulatorGateway(ProfileBook book, std::uint64_t seed, long completion_hard_cap = 4096);

  BackendResponse complete(const profiles::RequestPayload& payload) override;

 private:
  ProfileBook book_;
  std::uint64_t seed_;
  long completion_hard_cap_;
};

// Configuration for a real OpenAI-compatible backend.
struct HttpBackendOptions {
  std::string base_url;
  std::string api_key;          // empty = no Authorization header
  std::string path = "/v1/chat/completions";
  int timeout_ms = 30000;
  int max_attempts = 3;         // bounded backoff on 429 only
  int backoff_base_ms = 250;
  int max_concurrency = 4;      // in-flight requests per backend
};

// Chat-completions client covering non-streaming JSON bodies and
// SSE streaming ("data: {...}" chunks terminated by "data: [DONE]").
// Enforces a per-backend in-flight limit.
class HttpGateway : public Gateway {
 public:
  explicit HttpGateway(std::map<std::string, HttpBackendOptions> backends);
  ~HttpGateway() override;

  BackendResponse complete(const profiles::RequestPayload& payload) override;

  // Fallback when the provider omits usage accounting.
  static long estimate_tokens(std::string_view text);

 private:
  struct Slot;
  std::map<std::string, HttpBackendOptions> backends_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
};

}  // namespace routebench::gateway
