#include "routebench/burden_profiles.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "routebench/compact_codec.hpp"
#include "routebench/rng.hpp"

namespace routebench::profiles {

std::string_view to_string(ModeName mode) {
  switch (mode) {
    case ModeName::MJ: return "MJ";
    case ModeName::SJ: return "SJ";
    case ModeName::MJS: return "MJS";
    case ModeName::MCLR: return "MCLR";
  }
  return "MJ";
}

std::string_view to_string(Constraint c) {
  return c == Constraint::limited ? "limited" : "unlimited";
}

std::string_view to_string(Transport t) {
  return t == Transport::non_stream ? "non_stream" : "stream";
}

std::optional<ModeName> mode_from_string(std::string_view text) {
  for (ModeName m : kAllModes) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

std::optional<Constraint> constraint_from_string(std::string_view text) {
  if (text == "limited") return Constraint::limited;
  if (text == "unlimited") return Constraint::unlimited;
  return std::nullopt;
}

std::optional<Transport> transport_from_string(std::string_view text) {
  if (text == "non_stream") return Transport::non_stream;
  if (text == "stream") return Transport::stream;
  return std::nullopt;
}

BurdenProfile profile_for(ModeName mode, const MatrixConfig& config) {
  BurdenProfile profile;
  profile.mode_name = mode;
  switch (mode) {
    case ModeName::MJ:
      profile.output_token_budget = config.small_budget_tokens;
      profile.prompt_template_id = "json_instruction";
      break;
    case ModeName::SJ:
      profile.output_token_budget = config.relaxed_budget_tokens;
      profile.prompt_template_id = "json_instruction";
      break;
    case ModeName::MJS:
      // the "S" is historical; this is a final-JSON package
      profile.output_token_budget = config.relaxed_budget_tokens;
      profile.prompt_template_id = "json_instruction";
      break;
    case ModeName::MCLR:
      profile.serialization = Serialization::compact_code;
      profile.realization_locus = RealizationLocus::local_reconstruction;
      profile.output_token_budget = config.small_budget_tokens;
      profile.prompt_template_id = "compact_instruction";
      break;
  }
  return profile;
}

MatrixConfig MatrixConfig::from_json(const nlohmann::json& value) {
  MatrixConfig config;
  config.modes.clear();
  for (const auto& m : value.at("modes")) {
    auto mode = mode_from_string(m.get<std::string>());
    if (!mode) throw std::runtime_error("config: unknown mode " + m.get<std::string>());
    config.modes.push_back(*mode);
  }
  config.backends.clear();
  for (const auto& b : value.at("backends")) {
    BackendConfig backend;
    backend.id = b.at("id").get<std::string>();
    backend.model = b.value("model", backend.id);
    backend.base_url = b.value("base_url", std::string{});
    backend.api_key_env = b.value("api_key_env", std::string{});
    config.backends.push_back(std::move(backend));
  }
  config.constraints.clear();
  for (const auto& c : value.at("constraints")) {
    auto constraint = constraint_from_string(c.get<std::string>());
    if (!constraint) throw std::runtime_error("config: unknown constraint " + c.get<std::string>());
    config.constraints.push_back(*constraint);
  }
  config.transports.clear();
  for (const auto& t : value.at("transports")) {
    auto transport = transport_from_string(t.get<std::string>());
    if (!transport) throw std::runtime_error("config: unknown transport " + t.get<std::string>());
    config.transports.push_back(*transport);
  }
  config.requests_per_combo = value.value("requests_per_combo", 324);
  config.small_budget_tokens = value.value("small_budget_tokens", 64);
  config.relaxed_budget_tokens = value.value("relaxed_budget_tokens", 1024);
  config.timeout_ms = value.value("timeout_ms", 30000);
  config.max_attempts = value.value("max_attempts", 3);
  config.per_backend_concurrency = value.value("per_backend_concurrency", 4);

  // duplicate factor levels would silently distort the matrix
  auto ensure_unique = [](const auto& levels, auto name_of, const char* factor) {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      for (std::size_t j = i + 1; j < levels.size(); ++j) {
        if (name_of(levels[i]) == name_of(levels[j])) {
          throw std::runtime_error(std::string("config: duplicate ") + factor + " level " +
                                   std::string(name_of(levels[i])));
        }
      }
    }
  };
  ensure_unique(config.modes, [](ModeName m) { return to_string(m); }, "mode");
  ensure_unique(config.backends, [](const BackendConfig& b) { return std::string_view(b.id); },
                "backend");
  ensure_unique(config.constraints, [](Constraint c) { return to_string(c); }, "constraint");
  ensure_unique(config.transports, [](Transport t) { return to_string(t); }, "transport");
  return config;
}

MatrixConfig MatrixConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  nlohmann::json value = nlohmann::json::parse(in, nullptr, false);
  if (value.is_discarded()) throw std::runtime_error("config: malformed JSON in " + path.string());
  return from_json(value);
}

nlohmann::json MatrixConfig::to_json() const {
  nlohmann::json modes = nlohmann::json::array();
  for (ModeName m : this->modes) modes.push_back(std::string(to_string(m)));
  nlohmann::json backends = nlohmann::json::array();
  for (const BackendConfig& b : this->backends) {
    backends.push_back({{"id", b.id},
                        {"model", b.model},
                        {"base_url", b.base_url},
                        {"api_key_env", b.api_key_env}});
  }
  nlohmann::json constraints = nlohmann::json::array();
  for (Constraint c : this->constraints) constraints.push_back(std::string(to_string(c)));
  nlohmann::json transports = nlohmann::json::array();
  for (Transport t : this->transports) transports.push_back(std::string(to_string(t)));
  return nlohmann::json{
      {"modes", modes},
      {"backends", backends},
      {"constraints", constraints},
      {"transports", transports},
      {"requests_per_combo", requests_per_combo},
      {"small_budget_tokens", small_budget_tokens},
      {"relaxed_budget_tokens", relaxed_budget_tokens},
      {"timeout_ms", timeout_ms},
      {"max_attempts", max_attempts},
      {"per_backend_concurrency", per_backend_concurrency},
  };
}

const BackendConfig& MatrixConfig::backend(const std::string& id) const {
  for (const BackendConfig& b : backends) {
    if (b.id == id) return b;
  }
  throw std::runtime_error("config: unknown backend " + id);
}

std::string ComboSpec::cell_key() const {
  return backend_id + "|" + std::string(to_string(profile.mode_name));
}

std::string ComboSpec::rng_key() const {
  return cell_key() + "|" + std::string(to_string(constraint));
}

std::string ComboSpec::label() const {
  return rng_key() + "|" + std::string(to_string(transport));
}

std::vector<ComboSpec> enumerate_matrix(const MatrixConfig& config) {
  if (config.modes.empty() || config.backends.empty() || config.constraints.empty() ||
      config.transports.empty()) {
    throw std::runtime_error("matrix enumeration: empty factor list");
  }
  std::vector<ComboSpec> combos;
  combos.reserve(config.modes.size() * config.backends.size() * config.constraints.size() *
                 config.transports.size());
  int index = 0;
  for (ModeName mode : config.modes) {
    for (const BackendConfig& backend : config.backends) {
      for (Constraint constraint : config.constraints) {
        for (Transport transport : config.transports) {
          ComboSpec combo;
          combo.profile = profile_for(mode, config);
          combo.backend_id = backend.id;
          combo.backend_model = backend.model;
          combo.constraint = constraint;
          combo.transport = transport;
          combo.index = index++;
          combo.relaxed_cap_tokens = config.relaxed_budget_tokens;
          combos.push_back(std::move(combo));
        }
      }
    }
  }
  return combos;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  TemplateSet set;
  for (const char* id : {"json_instruction", "compact_instruction"}) {
    std::filesystem::path file = dir / (std::string(id) + ".txt");
    std::ifstream in(file);
    if (!in) throw std::runtime_error("templates: cannot open " + file.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();
    if (!text.empty() && text.back() == '\n') text.pop_back();
    set.by_id[id] = std::move(text);
  }
  return set;
}

const std::string& TemplateSet::require(const std::string& id) const {
  auto it = by_id.find(id);
  if (it == by_id.end()) throw std::runtime_error("templates: unknown template id " + id);
  return it->second;
}

namespace {

void replace_all(std::string& text, std::string_view needle, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
}

std::string route_list() {
  std::string out;
  for (schema::RouteLabel r : schema::kAllRoutes) {
    if (!out.empty()) out += ", ";
    out += schema::to_string(r);
  }
  return out;
}

}  // namespace

RequestPayload assemble_request(const ComboSpec& combo, const runner::TaskPrompt& prompt,
                                const TemplateSet& templates) {
  std::string system_text = templates.require(combo.profile.prompt_template_id);
  replace_all(system_text, "${ROUTES}", route_list());
  replace_all(system_text, "${GRAMMAR}", codec::kCompactGrammar);

  RequestPayload payload;
  payload.max_output_tokens =
      combo.constraint == Constraint::limited
          ? combo.profile.output_token_budget
          : std::max(combo.profile.output_token_budget, combo.relaxed_cap_tokens);

  payload.wire = nlohmann::json{
      {"model", combo.backend_model},
      {"messages",
       nlohmann::json::array({
           nlohmann::json{{"role", "system"}, {"content", system_text}},
           nlohmann::json{{"role", "user"}, {"content", prompt.text}},
       })},
      {"max_tokens", payload.max_output_tokens},
      {"stream", combo.transport == Transport::stream},
  };

  payload.backend_id = combo.backend_id;
  payload.mode = combo.profile.mode_name;
  payload.constraint = combo.constraint;
  payload.transport = combo.transport;
  payload.combo_index = combo.index;
  payload.rng_key = combo.rng_key();
  payload.prompt_id = prompt.id;
  payload.ground_truth = prompt.ground_truth_route;
  payload.state_sensitive = prompt.state_sensitive;
  payload.expected_route = prompt.expected_route();
  payload.expected_memory = prompt.expected_memory();
  return payload;
}

schema::ParseResult realize(const ComboSpec& combo, std::string_view raw_output) {
  if (combo.profile.serialization == Serialization::compact_code) {
    codec::CompactParseResult parsed = codec::parse_compact(raw_output);
    if (!parsed.ok()) {
      schema::ParseResult result;
      result.failure = parsed.failure;
      return result;
    }
    return codec::reconstruct(*parsed.code);
  }
  return schema::parse_control_record(raw_output);
}

std::string config_hash(const MatrixConfig& config) {
  std::uint64_t h = rng::fnv1a64(config.to_json().dump());
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buffer);
}

}  // namespace routebench::profiles
