#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "routebench/backend_gateway.hpp"

namespace routebench::gateway {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool is_timeout(httplib::Error error) {
  return error == httplib::Error::ConnectionTimeout || error == httplib::Error::Read ||
         error == httplib::Error::Write;
}

// Pulls message content and usage out of a non-streaming
// chat-completions body. Unknown shapes leave the response text empty.
void parse_completion_body(const std::string& body, BackendResponse& response) {
  nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return;
  if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
    const auto& message = doc["choices"][0];
    if (message.contains("message") && message["message"].contains("content") &&
        message["message"]["content"].is_string()) {
      response.raw_text = message["message"]["content"].get<std::string>();
    }
  }
  if (doc.contains("usage") && doc["usage"].is_object()) {
    response.prompt_tokens = doc["usage"].value("prompt_tokens", 0L);
    response.completion_tokens = doc["usage"].value("completion_tokens", 0L);
  }
}

// Incremental SSE accumulator: splits the byte stream into "data:"
// events, appends choices[0].delta.content in arrival order, and picks
// up usage from whichever chunk carries it.
struct SseAssembler {
  std::string buffer;
  std::string content;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  bool done = false;

  void feed(const char* data, std::size_t length) {
    buffer.append(data, length);
    std::size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      consume_line(line);
    }
  }

  void finish() {
    if (!buffer.empty()) {
      std::string line = std::move(buffer);
      buffer.clear();
      if (!line.empty() && line.back() == '\r') line.pop_back();
      consume_line(line);
    }
  }

  void consume_line(const std::string& line) {
    if (line.rfind("data:", 0) != 0) return;
    std::string event = schema::trim(line.substr(5));
    if (event.empty()) return;
    if (event == "[DONE]") {
      done = true;
      return;
    }
    nlohmann::json chunk = nlohmann::json::parse(event, nullptr, false);
    if (chunk.is_discarded() || !chunk.is_object()) return;
    if (chunk.contains("choices") && chunk["choices"].is_array() && !chunk["choices"].empty()) {
      const auto& delta = chunk["choices"][0];
      if (delta.contains("delta") && delta["delta"].contains("content") &&
          delta["delta"]["content"].is_string()) {
        content += delta["delta"]["content"].get<std::string>();
      }
    }
    if (chunk.contains("usage") && chunk["usage"].is_object()) {
      prompt_tokens = chunk["usage"].value("prompt_tokens", 0L);
      completion_tokens = chunk["usage"].value("completion_tokens", 0L);
    }
  }
};

}  // namespace

// counting semaphore guarding the per-backend in-flight limit
struct HttpGateway::Slot {
  explicit Slot(int limit) : available(limit) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mutex);
    cv.wait(lock, [this] { return available > 0; });
    --available;
  }

  void release() {
    {
      std::lock_guard<std::mutex> lock(mutex);
      ++available;
    }
    cv.notify_one();
  }

  std::mutex mutex;
  std::condition_variable cv;
  int available;
};

HttpGateway::HttpGateway(std::map<std::string, HttpBackendOptions> backends)
    : backends_(std::move(backends)) {
  for (const auto& [id, options] : backends_) {
    slots_[id] = std::make_unique<Slot>(std::max(1, options.max_concurrency));
  }
}

HttpGateway::~HttpGateway() = default;

long HttpGateway::estimate_tokens(std::string_view text) {
  // coarse 4-chars-per-token heuristic, used only when the provider
  // omits usage accounting
  return static_cast<long>((text.size() + 3) / 4);
}

BackendResponse HttpGateway::complete(const profiles::RequestPayload& payload) {
  auto backend_it = backends_.find(payload.backend_id);
  if (backend_it == backends_.end()) {
    throw std::runtime_error("http gateway: no options for backend " + payload.backend_id);
  }
  const HttpBackendOptions& options = backend_it->second;
  const bool streaming = payload.transport == profiles::Transport::stream;
  const std::string body = payload.wire.dump();

  Slot& slot = *slots_.at(payload.backend_id);
  slot.acquire();
  struct Release {
    Slot& slot;
    ~Release() { slot.release(); }
  } release{slot};

  BackendResponse response;
  const Clock::time_point start = Clock::now();

  for (int attempt = 1; attempt <= std::max(1, options.max_attempts); ++attempt) {
    response = BackendResponse{};
    response.attempts = attempt;

    httplib::Client client(options.base_url);
    client.set_connection_timeout(std::chrono::milliseconds(options.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(options.timeout_ms));
    client.set_write_timeout(std::chrono::milliseconds(options.timeout_ms));

    httplib::Headers headers;
    if (!options.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + options.api_key);
    }
    if (streaming) headers.emplace("Accept", "text/event-stream");

    httplib::Result result;
    SseAssembler assembler;
    if (streaming) {
      httplib::Request request;
      request.method = "POST";
      request.path = options.path;
      request.headers = headers;
      request.body = body;
      request.set_header("Content-Type", "application/json");
      request.content_receiver = [&assembler](const char* data, std::size_t length, std::uint64_t,
                                              std::uint64_t) {
        assembler.feed(data, length);
        return true;
      };
      result = client.send(request);
    } else {
      result = client.Post(options.path, headers, body, "application/json");
    }

    response.latency_ms = elapsed_ms(start);

    if (!result) {
      response.failure = is_timeout(result.error()) ? schema::FailureClass::timeout
                                                    : schema::FailureClass::transport_error;
      return response;
    }

    response.http_status = result->status;
    if (result->status == 400) {
      response.failure = schema::FailureClass::http_400;
      return response;  // never retried
    }
    if (result->status == 429) {
      response.failure = schema::FailureClass::rate_limited;
      if (attempt < options.max_attempts) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(options.backoff_base_ms * (1 << (attempt - 1))));
        continue;
      }
      return response;
    }
    if (result->status < 200 || result->status >= 300) {
      response.failure = schema::FailureClass::transport_error;
      return response;
    }

    if (streaming) {
      assembler.finish();
      response.raw_text = assembler.content;
      response.prompt_tokens = assembler.prompt_tokens;
      response.completion_tokens = assembler.completion_tokens;
    } else {
      parse_completion_body(result->body, response);
    }
    if (response.prompt_tokens == 0 && response.completion_tokens == 0) {
      response.prompt_tokens = estimate_tokens(body);
      response.completion_tokens = estimate_tokens(response.raw_text);
    }
    return response;
  }
  return response;
}

}  // namespace routebench::gateway
