#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "routebench/metrics.hpp"

namespace routebench::recommend {

// Workflow floors for backend-conditioned package selection.
struct DeploymentPolicy {
  std::set<schema::RouteLabel> protected_routes;
  double min_wlc_pct = 0.0;
  double min_ra_pct = 0.0;
  double min_sr_pct = 0.0;
  std::optional<double> max_p50_ms;
  std::optional<long> token_budget;

  static DeploymentPolicy from_json(const nlohmann::json& value);
  static DeploymentPolicy load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct Rejection {
  std::string mode;
  std::string rule;       // protected_route_accuracy | min_wlc | min_ra | min_sr | max_p50 | token_budget
  std::string detail;     // e.g. the protected route name
  double value = 0.0;     // the violating value
  double threshold = 0.0; // the floor/cap it broke
};

struct AdmissiblePackage {
  std::string mode;
  double p50_ms = 0.0;
  long tokens = 0;
  double wlc_pct = 0.0;
  double ra_pct = 0.0;
  std::optional<double> sr_pct;
  std::string transport_hint;  // stream only when it strictly improves p50
};

struct BackendVerdict {
  std::string backend_id;
  std::vector<AdmissiblePackage> ranked;  // best first
  std::vector<Rejection> rejections;
  std::optional<std::string> selected;    // ranked.front(), when any
  // when nothing survives: the closest rejected package and its
  // violations, for diagnostics
  std::optional<std::string> nearest_miss;
  std::vector<Rejection> nearest_miss_rules;
};

// Backend-conditioned selection: (1) protected-route floor, (2)
// WLC/RA/SR floors plus optional latency and token caps, (3) survivors
// ranked by p50 then tokens with transport as an exact-tie breaker,
// (4) verdicts are strictly per backend. Throws when the policy
// protects a route that has no slice in the cell table.
std::vector<BackendVerdict> recommend(const std::vector<metrics::CellSummary>& cells,
                                      const DeploymentPolicy& policy);

nlohmann::json verdicts_to_json(const std::vector<BackendVerdict>& verdicts);
std::string verdicts_to_text(const std::vector<BackendVerdict>& verdicts);

}  // namespace routebench::recommend
