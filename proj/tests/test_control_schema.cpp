#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "routebench/control_schema.hpp"
#include "routebench/rng.hpp"

using namespace routebench;
using schema::FailureClass;

TEST_CASE("valid record parses by direct construction") {
  auto result = schema::parse_control_record(
      R"({"route":"chat","confidence":0.9,"memory":false,"tool":false,"reason":"greeting"})");
  REQUIRE(result.ok());
  CHECK(result.record->route == schema::RouteLabel::chat);
  CHECK(result.record->confidence == doctest::Approx(0.9));
  CHECK_FALSE(result.record->memory_flag);
  CHECK_FALSE(result.record->tool_flag);
  CHECK(result.record->reason == "greeting");
}

TEST_CASE("confidence above one is schema_invalid") {
  auto result = schema::parse_control_record(
      R"({"route":"chat","confidence":1.7,"memory":false,"tool":false,"reason":"x"})");
  CHECK(result.failure == FailureClass::schema_invalid);
  REQUIRE(result.violations.size() == 1);
  CHECK(result.violations[0].path == ".confidence");
}

TEST_CASE("integer-looking 0..100 confidence is NOT rescaled") {
  auto result = schema::parse_control_record(
      R"({"route":"dev","confidence":85,"memory":true,"tool":true,"reason":"scaled wrong"})");
  CHECK(result.failure == FailureClass::schema_invalid);
}

TEST_CASE("first JSON object is extracted from surrounding prose") {
  std::string prose =
      R"(Sure! Here is the JSON: {"route":"dev","confidence":0.8,"memory":true,"tool":false,"reason":"debug"} hope that helps)";
  auto result = schema::parse_control_record(prose);
  REQUIRE(result.ok());
  CHECK(result.record->route == schema::RouteLabel::dev);

  // cross-check the extraction against the reference parser applied to
  // the manually located substring
  std::size_t start = prose.find('{');
  std::size_t end = prose.rfind('}');
  nlohmann::json reference = nlohmann::json::parse(prose.substr(start, end - start + 1));
  auto span = schema::extract_first_json_object(prose);
  REQUIRE(span.has_value());
  CHECK(nlohmann::json::parse(*span) == reference);
}

TEST_CASE("no extractable object is json_parse_error") {
  CHECK(schema::parse_control_record("the route is dev").failure ==
        FailureClass::json_parse_error);
  CHECK(schema::parse_control_record("").failure == FailureClass::json_parse_error);
  CHECK(schema::parse_control_record(R"({"route":"chat","confidence":0.)").failure ==
        FailureClass::json_parse_error);
  CHECK(schema::parse_control_record("{not json}").failure == FailureClass::json_parse_error);
}

TEST_CASE("parse errors are assigned before schema checks") {
  // truncated object with an out-of-range confidence: must be a parse
  // error, never both
  auto result = schema::parse_control_record(R"({"route":"chat","confidence":1.7,)");
  CHECK(result.failure == FailureClass::json_parse_error);
  CHECK(result.violations.empty());
}

TEST_CASE("validate_schema reports every violation with a path") {
  SUBCASE("complete valid object") {
    nlohmann::json value = nlohmann::json::parse(
        R"({"route":"doc","confidence":0.4,"memory":true,"tool":false,"reason":"manual"})");
    CHECK(schema::validate_schema(value).empty());
  }
  SUBCASE("missing tool") {
    nlohmann::json value = nlohmann::json::parse(
        R"({"route":"doc","confidence":0.4,"memory":true,"reason":"manual"})");
    auto violations = schema::validate_schema(value);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].path == ".tool");
    CHECK(violations[0].message == "absent");
  }
  SUBCASE("route typo") {
    nlohmann::json value = nlohmann::json::parse(
        R"({"route":"docs","confidence":0.4,"memory":true,"tool":false,"reason":"manual"})");
    auto violations = schema::validate_schema(value);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].path == ".route");
  }
  SUBCASE("multiple violations all reported") {
    nlohmann::json value =
        nlohmann::json::parse(R"({"route":"docs","confidence":"high","memory":1})");
    auto violations = schema::validate_schema(value);
    CHECK(violations.size() == 5);  // route, confidence, memory, tool absent, reason absent
  }
  SUBCASE("whitespace-only reason is empty") {
    nlohmann::json value = nlohmann::json::parse(
        R"({"route":"doc","confidence":0.4,"memory":true,"tool":false,"reason":"  "})");
    auto violations = schema::validate_schema(value);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].path == ".reason");
  }
}

TEST_CASE("reason is truncated at 512 characters, not rejected") {
  std::string reason(600, 'a');
  auto result = schema::parse_control_record(
      R"({"route":"task","confidence":0.5,"memory":false,"tool":false,"reason":")" + reason +
      R"("})");
  REQUIRE(result.ok());
  CHECK(result.record->reason.size() == schema::kReasonMaxChars);
}

TEST_CASE("taxonomy partition: exactly one class per input") {
  const char* inputs[] = {
      R"({"route":"chat","confidence":0.9,"memory":false,"tool":false,"reason":"hi"})",
      R"({"route":"chat","confidence":2.0,"memory":false,"tool":false,"reason":"hi"})",
      "no json here",
      "{broken",
      R"(prefix {"route":"bad"} suffix)",
      "",
  };
  for (const char* input : inputs) {
    auto result = schema::parse_control_record(input);
    bool has_record = result.record.has_value();
    CHECK((result.failure == FailureClass::ok) == has_record);
    // classes are mutually exclusive by construction: a single enum value
    CHECK((result.failure == FailureClass::ok || result.failure == FailureClass::json_parse_error ||
           result.failure == FailureClass::schema_invalid));
  }
}

namespace {

schema::ControlRecord random_record(const rng::Stream& stream, std::uint64_t i) {
  schema::ControlRecord record;
  record.route = schema::kAllRoutes[stream.below(i * 8, 4)];
  record.confidence = stream.uniform(i * 8 + 1);
  record.memory_flag = stream.bits(i * 8 + 2) & 1;
  record.tool_flag = stream.bits(i * 8 + 3) & 1;
  static constexpr const char* kWords[] = {"debug", "hello", "lookup",  "resume",
                                           "plan",  "file",  "restart", "весна"};
  std::size_t words = 1 + stream.below(i * 8 + 4, 6);
  std::string reason;
  for (std::size_t w = 0; w < words; ++w) {
    if (w) reason += ' ';
    reason += kWords[stream.below(i * 8 + 5 + w, 8)];
  }
  record.reason = reason;
  return record;
}

}  // namespace

TEST_CASE("round trip: serialize then parse is the identity") {
  rng::Stream stream(7, "roundtrip");
  for (std::uint64_t i = 0; i < 500; ++i) {
    schema::ControlRecord record = random_record(stream, i);
    auto result = schema::parse_control_record(schema::serialize(record));
    REQUIRE(result.ok());
    CHECK(*result.record == record);
  }
}

TEST_CASE("serialized records validate against the shipped schema document") {
  // keys and bounds in data/schema/control_record.schema.json are
  // normative; spot-check agreement
  std::ifstream in(std::string(ROUTEBENCH_DATA_DIR) + "/schema/control_record.schema.json");
  REQUIRE(in);
  nlohmann::json doc = nlohmann::json::parse(in);
  auto required = doc.at("required").get<std::vector<std::string>>();
  schema::ControlRecord record{schema::RouteLabel::dev, 0.25, true, false, "check"};
  nlohmann::json serialized = nlohmann::json::parse(schema::serialize(record));
  for (const std::string& key : required) CHECK(serialized.contains(key));
  CHECK(doc.at("properties").at("route").at("enum").size() == 4);
  CHECK(doc.at("properties").at("reason").at("maxLength").get<std::size_t>() ==
        schema::kReasonMaxChars);
}
