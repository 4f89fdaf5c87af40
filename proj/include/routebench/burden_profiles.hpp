#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "routebench/control_schema.hpp"
#include "routebench/prompt_pool.hpp"

namespace routebench::profiles {

// The four runtime packages. Declaration order is the canonical factor
// order used for matrix enumeration and treatment coding.
enum class ModeName { MJ, SJ, MJS, MCLR };
inline constexpr std::array<ModeName, 4> kAllModes = {ModeName::MJ, ModeName::SJ,
                                                      ModeName::MJS, ModeName::MCLR};

enum class Serialization { final_json, compact_code };
enum class RealizationLocus { model, local_reconstruction };
enum class Constraint { limited, unlimited };
enum class Transport { non_stream, stream };

std::string_view to_string(ModeName mode);
std::string_view to_string(Constraint c);
std::string_view to_string(Transport t);
std::optional<ModeName> mode_from_string(std::string_view text);
std::optional<Constraint> constraint_from_string(std::string_view text);
std::optional<Transport> transport_from_string(std::string_view text);

// One burden-allocation package: how much serialization the model
// carries, where the final structure is realized, and the output
// budget. Transport and constraint are an orthogonal overlay and live
// on ComboSpec, not here.
struct BurdenProfile {
  ModeName mode_name = ModeName::MJ;
  Serialization serialization = Serialization::final_json;
  RealizationLocus realization_locus = RealizationLocus::model;
  int output_token_budget = 64;
  std::string prompt_template_id;
};

struct BackendConfig {
  std::string id;
  std::string model;
  std::string base_url;
  std::string api_key_env;
};

struct MatrixConfig {
  std::vector<ModeName> modes = {ModeName::MJ, ModeName::SJ, ModeName::MJS, ModeName::MCLR};
  std::vector<BackendConfig> backends;
  std::vector<Constraint> constraints = {Constraint::limited, Constraint::unlimited};
  std::vector<Transport> transports = {Transport::non_stream, Transport::stream};
  int requests_per_combo = 324;
  int small_budget_tokens = 64;
  int relaxed_budget_tokens = 1024;
  int timeout_ms = 30000;
  int max_attempts = 3;
  int per_backend_concurrency = 4;

  static MatrixConfig from_json(const nlohmann::json& value);
  static MatrixConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const BackendConfig& backend(const std::string& id) const;
};

// MJ and MCLR carry the small budget; SJ and MJS the relaxed one.
BurdenProfile profile_for(ModeName mode, const MatrixConfig& config);

// One cell of the factorial matrix. Backend model name and the
// relaxed cap are resolved from the config at enumeration time so
// payload assembly needs no further configuration lookups.
struct ComboSpec {
  BurdenProfile profile;
  std::string backend_id;
  std::string backend_model;
  Constraint constraint = Constraint::limited;
  Transport transport = Transport::non_stream;
  int index = 0;   // position in the enumeration order
  int relaxed_cap_tokens = 1024;

  // backend|mode, the cell identity used for Table-2-style grouping.
  std::string cell_key() const;
  // backend|mode|constraint: the simulator randomness key. Transport is
  // deliberately excluded so stream/non-stream deliveries of the same
  // request draw identically.
  std::string rng_key() const;
  std::string label() const;  // human-readable, all four factors
};

// Deterministic lexicographic enumeration over (mode, backend,
// constraint, transport) in declared factor order. Throws on an empty
// factor list.
std::vector<ComboSpec> enumerate_matrix(const MatrixConfig& config);

// Prompt templates loaded from disk, keyed by template id. The files
// carry ${ROUTES} and ${GRAMMAR} placeholders.
struct TemplateSet {
  std::map<std::string, std::string> by_id;

  static TemplateSet load(const std::filesystem::path& dir);
  const std::string& require(const std::string& id) const;
};

// A fully assembled backend request: the OpenAI-compatible wire body
// plus side-channel metadata the simulator and the runner need. Only
// `wire` ever leaves the process.
struct RequestPayload {
  nlohmann::json wire;

  std::string backend_id;
  ModeName mode = ModeName::MJ;
  Constraint constraint = Constraint::limited;
  Transport transport = Transport::non_stream;
  int combo_index = 0;
  int request_index = 0;
  std::string rng_key;

  std::string prompt_id;
  schema::RouteLabel ground_truth = schema::RouteLabel::chat;
  bool state_sensitive = false;
  std::optional<schema::RouteLabel> expected_route;
  std::optional<bool> expected_memory;

  int max_output_tokens = 0;
};

RequestPayload assemble_request(const ComboSpec& combo, const runner::TaskPrompt& prompt,
                                const TemplateSet& templates);

// Dispatches raw output to the codec matching the profile's
// serialization field (never the mode name).
schema::ParseResult realize(const ComboSpec& combo, std::string_view raw_output);

// FNV-1a hash of the canonical config serialization; recorded in log
// headers so analyzers can detect config drift.
std::string config_hash(const MatrixConfig& config);

}  // namespace routebench::profiles
