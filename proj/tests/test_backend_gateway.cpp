#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "routebench/backend_gateway.hpp"
#include "routebench/matrix_runner.hpp"

using namespace routebench;

namespace {

const std::string kDataDir = ROUTEBENCH_DATA_DIR;

profiles::MatrixConfig default_config() {
  return profiles::MatrixConfig::load(kDataDir + "/config/matrix_default.json");
}

gateway::SimulatorProfile perfect_profile() {
  gateway::SimulatorProfile profile;
  profile.fc_rate = 1.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) profile.route_confusion[i][j] = i == j ? 1.0 : 0.0;
  }
  profile.sr_success = 1.0;
  profile.latency = {100.0, 0.1};
  profile.tokens_per_request = 200;
  return profile;
}

profiles::RequestPayload payload_for(const profiles::ComboSpec& combo,
                                     const runner::TaskPrompt& prompt, int request_index) {
  static profiles::TemplateSet templates =
      profiles::TemplateSet::load(kDataDir + "/templates");
  auto payload = profiles::assemble_request(combo, prompt, templates);
  payload.request_index = request_index;
  return payload;
}

runner::TaskPrompt prompt_with_route(schema::RouteLabel route, int i) {
  runner::TaskPrompt prompt;
  prompt.id = "t" + std::to_string(i);
  prompt.text = "request " + std::to_string(i);
  prompt.ground_truth_route = route;
  return prompt;
}

}  // namespace

TEST_CASE("simulator is deterministic and transport-invariant") {
  auto config = default_config();
  auto combos = profiles::enumerate_matrix(config);
  gateway::ProfileBook book = gateway::ProfileBook::load(kDataDir + "/profiles/reference_sim.json");
  gateway::SimulatorGateway sim(book, 99);

  const profiles::ComboSpec* non_stream = nullptr;
  const profiles::ComboSpec* stream = nullptr;
  for (const auto& combo : combos) {
    if (combo.backend_id != "llama" || combo.profile.mode_name != profiles::ModeName::MCLR ||
        combo.constraint != profiles::Constraint::limited) {
      continue;
    }
    (combo.transport == profiles::Transport::stream ? stream : non_stream) = &combo;
  }
  REQUIRE(non_stream);
  REQUIRE(stream);

  auto prompt = prompt_with_route(schema::RouteLabel::dev, 1);
  for (int i = 0; i < 50; ++i) {
    auto a = sim.complete(payload_for(*non_stream, prompt, i));
    auto b = sim.complete(payload_for(*non_stream, prompt, i));
    auto c = sim.complete(payload_for(*stream, prompt, i));
    CHECK(a.raw_text == b.raw_text);  // repeated calls identical
    CHECK(a.latency_ms == b.latency_ms);
    CHECK(a.raw_text == c.raw_text);  // stream differs only in delivery path
    CHECK(a.latency_ms == c.latency_ms);
    CHECK(a.prompt_tokens == c.prompt_tokens);
  }
}

TEST_CASE("degenerate profiles behave as stated") {
  auto config = default_config();
  auto combos = profiles::enumerate_matrix(config);
  const profiles::ComboSpec* mj_gemini = nullptr;
  for (const auto& combo : combos) {
    if (combo.backend_id == "gemini" && combo.profile.mode_name == profiles::ModeName::MJ &&
        combo.constraint == profiles::Constraint::limited &&
        combo.transport == profiles::Transport::non_stream) {
      mj_gemini = &combo;
    }
  }
  REQUIRE(mj_gemini);

  SUBCASE("fc_rate=1 with identity confusion parses and routes correctly everywhere") {
    gateway::ProfileBook book;
    book.put("gemini", profiles::ModeName::MJ, perfect_profile());
    gateway::SimulatorGateway sim(std::move(book), 7);
    for (int i = 0; i < 200; ++i) {
      auto prompt = prompt_with_route(schema::kAllRoutes[i % 4], i);
      auto response = sim.complete(payload_for(*mj_gemini, prompt, i));
      auto realized = profiles::realize(*mj_gemini, response.raw_text);
      REQUIRE(realized.ok());
      CHECK(realized.record->route == prompt.ground_truth_route);
      CHECK(response.latency_ms >= 0.0);
      CHECK(response.completion_tokens <= 64);
    }
  }

  SUBCASE("fc_rate=0 never parses") {
    auto broken = perfect_profile();
    broken.fc_rate = 0.0;
    gateway::ProfileBook book;
    book.put("gemini", profiles::ModeName::MJ, broken);
    gateway::SimulatorGateway sim(std::move(book), 7);
    for (int i = 0; i < 100; ++i) {
      auto prompt = prompt_with_route(schema::kAllRoutes[i % 4], i);
      auto response = sim.complete(payload_for(*mj_gemini, prompt, i));
      CHECK_FALSE(profiles::realize(*mj_gemini, response.raw_text).ok());
    }
  }
}

TEST_CASE("llama/MCLR calibration lands within the binomial bound over 324 draws") {
  auto config = default_config();
  auto combos = profiles::enumerate_matrix(config);
  const profiles::ComboSpec* target = nullptr;
  for (const auto& combo : combos) {
    if (combo.backend_id == "llama" && combo.profile.mode_name == profiles::ModeName::MCLR &&
        combo.constraint == profiles::Constraint::limited &&
        combo.transport == profiles::Transport::non_stream) {
      target = &combo;
    }
  }
  REQUIRE(target);

  gateway::ProfileBook book = gateway::ProfileBook::load(kDataDir + "/profiles/reference_sim.json");
  gateway::SimulatorGateway sim(book, 20260810);

  int ok = 0;
  const int n = 324;
  for (int i = 0; i < n; ++i) {
    auto prompt = prompt_with_route(schema::kAllRoutes[i % 4], i);
    auto response = sim.complete(payload_for(*target, prompt, i));
    if (profiles::realize(*target, response.raw_text).ok()) ++ok;
  }
  double fc = 100.0 * ok / n;

  // independent binomial check: the realized draw must sit inside a
  // 3.29-sigma (99.9%) normal-approximation interval around the
  // calibrated rate, and inside the +/-3 point tolerance
  double p = 0.534;
  double sigma_points = 100.0 * std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(fc - 53.40) <= 3.29 * sigma_points);
  CHECK(std::abs(fc - 53.40) <= 3.0);
}

TEST_CASE("profile book validates its invariants") {
  auto profile = perfect_profile();
  profile.route_confusion[2][2] = 0.5;  // row no longer sums to 1
  nlohmann::json doc{
      {"gemini",
       {{"MJ",
         {{"fc_rate", profile.fc_rate},
          {"route_confusion",
           {{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 0.5, 0.0}, {0.0, 0.0, 0.0, 1.0}}},
          {"sr_success", 1.0},
          {"latency", {{"median_ms", 100.0}, {"sigma", 0.1}}},
          {"tokens_per_request", 200}}}}},
  };
  auto path = std::filesystem::temp_directory_path() / "routebench_bad_profiles.json";
  std::ofstream(path) << doc.dump();
  CHECK_THROWS_WITH_AS(gateway::ProfileBook::load(path),
                       doctest::Contains("sums to"), std::runtime_error);
  std::filesystem::remove(path);

  gateway::ProfileBook book;
  book.put("gemini", profiles::ModeName::MJ, perfect_profile());
  CHECK_THROWS(book.at("gemini", profiles::ModeName::MCLR));  // missing entry
  CHECK(book.contains("gemini", profiles::ModeName::MJ));
}

// ---- HTTP adapter against an in-process server ----

namespace {

struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit TestServer() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~TestServer() {
    server.stop();
    thread.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

profiles::RequestPayload http_payload(profiles::Transport transport) {
  auto config = default_config();
  auto combos = profiles::enumerate_matrix(config);
  for (const auto& combo : combos) {
    if (combo.backend_id == "gemini" && combo.profile.mode_name == profiles::ModeName::MJ &&
        combo.constraint == profiles::Constraint::limited && combo.transport == transport) {
      return payload_for(combo, prompt_with_route(schema::RouteLabel::chat, 0), 0);
    }
  }
  throw std::runtime_error("combo not found");
}

gateway::HttpGateway gateway_for(const TestServer& server, int timeout_ms = 2000,
                                 int max_attempts = 3) {
  gateway::HttpBackendOptions options;
  options.base_url = server.base_url();
  options.api_key = "test-key";
  options.timeout_ms = timeout_ms;
  options.max_attempts = max_attempts;
  options.backoff_base_ms = 10;
  std::map<std::string, gateway::HttpBackendOptions> map{{"gemini", options}};
  return gateway::HttpGateway(std::move(map));
}

}  // namespace

TEST_CASE("non-streaming completion returns body content and usage") {
  TestServer server;
  std::string seen_auth;
  nlohmann::json seen_body;
  server.server.Post("/v1/chat/completions", [&](const httplib::Request& request,
                                                 httplib::Response& response) {
    seen_auth = request.get_header_value("Authorization");
    seen_body = nlohmann::json::parse(request.body);
    nlohmann::json reply{
        {"choices",
         {{{"message",
            {{"role", "assistant"},
             {"content",
              R"({"route":"chat","confidence":0.9,"memory":false,"tool":false,"reason":"hi"})"}}}}}},
        {"usage", {{"prompt_tokens", 120}, {"completion_tokens", 30}}},
    };
    response.set_content(reply.dump(), "application/json");
  });

  auto gw = gateway_for(server);
  auto response = gw.complete(http_payload(profiles::Transport::non_stream));

  CHECK(response.failure == schema::FailureClass::ok);
  CHECK(response.http_status == 200);
  CHECK(response.prompt_tokens == 120);
  CHECK(response.completion_tokens == 30);
  CHECK(response.latency_ms > 0.0);
  CHECK(seen_auth == "Bearer test-key");
  CHECK(seen_body.at("max_tokens").get<int>() == 64);
  CHECK_FALSE(seen_body.at("stream").get<bool>());
  auto realized = schema::parse_control_record(response.raw_text);
  REQUIRE(realized.ok());
  CHECK(realized.record->route == schema::RouteLabel::chat);
}

TEST_CASE("streaming completion assembles SSE deltas in arrival order") {
  TestServer server;
  server.server.Post("/v1/chat/completions", [](const httplib::Request& request,
                                                httplib::Response& response) {
    CHECK(nlohmann::json::parse(request.body).at("stream").get<bool>());
    std::string body;
    auto chunk = [&](const std::string& delta) {
      nlohmann::json event{{"choices", {{{"delta", {{"content", delta}}}}}}};
      body += "data: " + event.dump() + "\n\n";
    };
    chunk(R"({"route":"dev",)");
    chunk(R"("confidence":0.8,"memory":false,)");
    chunk(R"("tool":true,"reason":"trace"})");
    nlohmann::json usage{{"choices", nlohmann::json::array()},
                         {"usage", {{"prompt_tokens", 99}, {"completion_tokens", 21}}}};
    body += "data: " + usage.dump() + "\n\n";
    body += "data: [DONE]\n\n";
    response.set_content(body, "text/event-stream");
  });

  auto gw = gateway_for(server);
  auto response = gw.complete(http_payload(profiles::Transport::stream));

  CHECK(response.failure == schema::FailureClass::ok);
  CHECK(response.prompt_tokens == 99);
  CHECK(response.completion_tokens == 21);
  auto realized = schema::parse_control_record(response.raw_text);
  REQUIRE(realized.ok());
  CHECK(realized.record->route == schema::RouteLabel::dev);
  CHECK(realized.record->tool_flag);
}

TEST_CASE("status 400 maps to http_400 and is never retried") {
  TestServer server;
  std::atomic<int> hits{0};
  server.server.Post("/v1/chat/completions",
                     [&](const httplib::Request&, httplib::Response& response) {
                       ++hits;
                       response.status = 400;
                       response.set_content("bad request", "text/plain");
                     });
  auto gw = gateway_for(server);
  auto response = gw.complete(http_payload(profiles::Transport::non_stream));
  CHECK(response.failure == schema::FailureClass::http_400);
  CHECK(response.attempts == 1);
  CHECK(hits == 1);
}

TEST_CASE("status 429 maps to rate_limited with bounded retries") {
  TestServer server;
  std::atomic<int> hits{0};
  server.server.Post("/v1/chat/completions",
                     [&](const httplib::Request&, httplib::Response& response) {
                       ++hits;
                       response.status = 429;
                       response.set_content("slow down", "text/plain");
                     });
  auto gw = gateway_for(server, 2000, 3);
  auto response = gw.complete(http_payload(profiles::Transport::non_stream));
  CHECK(response.failure == schema::FailureClass::rate_limited);
  CHECK(response.attempts == 3);
  CHECK(hits == 3);
}

TEST_CASE("429 then success recovers and reports the attempt count") {
  TestServer server;
  std::atomic<int> hits{0};
  server.server.Post("/v1/chat/completions",
                     [&](const httplib::Request&, httplib::Response& response) {
                       if (++hits == 1) {
                         response.status = 429;
                         response.set_content("slow down", "text/plain");
                         return;
                       }
                       nlohmann::json reply{
                           {"choices", {{{"message", {{"content", "{}"}}}}}},
                       };
                       response.set_content(reply.dump(), "application/json");
                     });
  auto gw = gateway_for(server);
  auto response = gw.complete(http_payload(profiles::Transport::non_stream));
  CHECK(response.failure == schema::FailureClass::ok);
  CHECK(response.attempts == 2);
}

TEST_CASE("deadline expiry maps to timeout") {
  TestServer server;
  server.server.Post("/v1/chat/completions",
                     [&](const httplib::Request&, httplib::Response& response) {
                       std::this_thread::sleep_for(std::chrono::milliseconds(600));
                       response.set_content("{}", "application/json");
                     });
  auto gw = gateway_for(server, 150);
  auto response = gw.complete(http_payload(profiles::Transport::non_stream));
  CHECK(response.failure == schema::FailureClass::timeout);
}

TEST_CASE("connection refusal maps to transport_error") {
  gateway::HttpBackendOptions options;
  options.base_url = "http://127.0.0.1:1";  // nothing listens here
  options.timeout_ms = 300;
  std::map<std::string, gateway::HttpBackendOptions> map{{"gemini", options}};
  gateway::HttpGateway gw(std::move(map));
  auto response = gw.complete(http_payload(profiles::Transport::non_stream));
  CHECK(response.failure == schema::FailureClass::transport_error);
}
