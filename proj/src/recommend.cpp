#include "routebench/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace routebench::recommend {

DeploymentPolicy DeploymentPolicy::from_json(const nlohmann::json& value) {
  DeploymentPolicy policy;
  if (value.contains("protected_routes")) {
    for (const auto& name : value.at("protected_routes")) {
      auto route = schema::route_from_string(name.get<std::string>());
      if (!route) throw std::runtime_error("policy: unknown route " + name.get<std::string>());
      policy.protected_routes.insert(*route);
    }
  }
  policy.min_wlc_pct = value.value("min_wlc_pct", 0.0);
  policy.min_ra_pct = value.value("min_ra_pct", 0.0);
  policy.min_sr_pct = value.value("min_sr_pct", 0.0);
  auto in_pct = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 100.0)) {
      throw std::runtime_error(std::string("policy: ") + name + " out of [0,100]");
    }
  };
  in_pct(policy.min_wlc_pct, "min_wlc_pct");
  in_pct(policy.min_ra_pct, "min_ra_pct");
  in_pct(policy.min_sr_pct, "min_sr_pct");
  if (value.contains("max_p50_ms") && !value.at("max_p50_ms").is_null()) {
    policy.max_p50_ms = value.at("max_p50_ms").get<double>();
  }
  if (value.contains("token_budget") && !value.at("token_budget").is_null()) {
    policy.token_budget = value.at("token_budget").get<long>();
  }
  return policy;
}

DeploymentPolicy DeploymentPolicy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("policy: cannot open " + path.string());
  nlohmann::json value = nlohmann::json::parse(in, nullptr, false);
  if (value.is_discarded()) throw std::runtime_error("policy: malformed JSON in " + path.string());
  return from_json(value);
}

nlohmann::json DeploymentPolicy::to_json() const {
  nlohmann::json routes = nlohmann::json::array();
  for (schema::RouteLabel r : protected_routes) routes.push_back(std::string(schema::to_string(r)));
  nlohmann::json value{
      {"protected_routes", routes},
      {"min_wlc_pct", min_wlc_pct},
      {"min_ra_pct", min_ra_pct},
      {"min_sr_pct", min_sr_pct},
  };
  if (max_p50_ms) value["max_p50_ms"] = *max_p50_ms;
  if (token_budget) value["token_budget"] = *token_budget;
  return value;
}

namespace {

std::vector<Rejection> violations_for(const metrics::CellSummary& cell,
                                      const DeploymentPolicy& policy) {
  std::vector<Rejection> rejections;

  // Step 1: protected specialist routes first
  for (schema::RouteLabel route : policy.protected_routes) {
    auto it = cell.route_accuracy.find(route);
    if (it == cell.route_accuracy.end()) {
      throw std::runtime_error("recommend: cell " + cell.backend_id + "/" + cell.mode +
                               " has no route slice for protected route " +
                               std::string(schema::to_string(route)));
    }
    if (it->second < policy.min_ra_pct) {
      rejections.push_back({cell.mode, "protected_route_accuracy",
                            std::string(schema::to_string(route)), it->second,
                            policy.min_ra_pct});
    }
  }

  // Step 2: workflow floors
  if (cell.wlc_pct < policy.min_wlc_pct) {
    rejections.push_back({cell.mode, "min_wlc", "", cell.wlc_pct, policy.min_wlc_pct});
  }
  if (cell.ra.mean < policy.min_ra_pct) {
    rejections.push_back({cell.mode, "min_ra", "", cell.ra.mean, policy.min_ra_pct});
  }
  if (policy.min_sr_pct > 0.0) {
    double sr = cell.sr ? cell.sr->mean : 0.0;
    if (sr < policy.min_sr_pct) {
      rejections.push_back({cell.mode, "min_sr", "", sr, policy.min_sr_pct});
    }
  }
  if (policy.max_p50_ms && cell.p50.mean > *policy.max_p50_ms) {
    rejections.push_back({cell.mode, "max_p50", "", cell.p50.mean, *policy.max_p50_ms});
  }
  if (policy.token_budget && cell.tokens.mean > static_cast<double>(*policy.token_budget)) {
    rejections.push_back({cell.mode, "token_budget", "", cell.tokens.mean,
                          static_cast<double>(*policy.token_budget)});
  }
  return rejections;
}

double shortfall(const std::vector<Rejection>& rejections) {
  double total = 0.0;
  for (const Rejection& r : rejections) {
    if (r.rule == "max_p50" || r.rule == "token_budget") {
      total += r.value - r.threshold;
    } else {
      total += r.threshold - r.value;
    }
  }
  return total;
}

AdmissiblePackage package_of(const metrics::CellSummary& cell) {
  AdmissiblePackage package;
  package.mode = cell.mode;
  package.p50_ms = cell.p50.mean;
  package.tokens = static_cast<long>(std::llround(cell.tokens.mean));
  package.wlc_pct = cell.wlc_pct;
  package.ra_pct = cell.ra.mean;
  if (cell.sr) package.sr_pct = cell.sr->mean;
  // streaming is only a hint, and only when it strictly beats the
  // non-streaming deliveries of the same package
  if (cell.p50_stream && cell.p50_non_stream && *cell.p50_stream < *cell.p50_non_stream) {
    package.transport_hint = "stream";
  } else {
    package.transport_hint = "non_stream";
  }
  return package;
}

double best_transport_p50(const metrics::CellSummary& cell) {
  double best = cell.p50.mean;
  if (cell.p50_stream) best = std::min(best, *cell.p50_stream);
  if (cell.p50_non_stream) best = std::min(best, *cell.p50_non_stream);
  return best;
}

}  // namespace

std::vector<BackendVerdict> recommend(const std::vector<metrics::CellSummary>& cells,
                                      const DeploymentPolicy& policy) {
  std::vector<std::string> backends;
  for (const metrics::CellSummary& cell : cells) {
    if (std::find(backends.begin(), backends.end(), cell.backend_id) == backends.end()) {
      backends.push_back(cell.backend_id);
    }
  }

  std::vector<BackendVerdict> verdicts;
  for (const std::string& backend : backends) {
    BackendVerdict verdict;
    verdict.backend_id = backend;

    std::vector<const metrics::CellSummary*> survivors;
    const metrics::CellSummary* nearest = nullptr;
    std::vector<Rejection> nearest_rules;
    double nearest_shortfall = 0.0;

    for (const metrics::CellSummary& cell : cells) {
      if (cell.backend_id != backend) continue;
      std::vector<Rejection> rejections = violations_for(cell, policy);
      if (rejections.empty()) {
        survivors.push_back(&cell);
      } else {
        double miss = shortfall(rejections);
        if (!nearest || miss < nearest_shortfall) {
          nearest = &cell;
          nearest_rules = rejections;
          nearest_shortfall = miss;
        }
        for (Rejection& r : rejections) verdict.rejections.push_back(std::move(r));
      }
    }

    // Step 3: latency, then tokens; transport breaks exact ties only
    std::sort(survivors.begin(), survivors.end(),
              [](const metrics::CellSummary* a, const metrics::CellSummary* b) {
                if (a->p50.mean != b->p50.mean) return a->p50.mean < b->p50.mean;
                if (a->tokens.mean != b->tokens.mean) return a->tokens.mean < b->tokens.mean;
                return best_transport_p50(*a) < best_transport_p50(*b);
              });
    for (const metrics::CellSummary* cell : survivors) {
      verdict.ranked.push_back(package_of(*cell));
    }
    if (!verdict.ranked.empty()) {
      verdict.selected = verdict.ranked.front().mode;
    } else if (nearest) {
      verdict.nearest_miss = nearest->mode;
      verdict.nearest_miss_rules = nearest_rules;
    }
    verdicts.push_back(std::move(verdict));
  }
  return verdicts;
}

nlohmann::json verdicts_to_json(const std::vector<BackendVerdict>& verdicts) {
  nlohmann::json doc = nlohmann::json::array();
  for (const BackendVerdict& verdict : verdicts) {
    nlohmann::json ranked = nlohmann::json::array();
    for (const AdmissiblePackage& package : verdict.ranked) {
      nlohmann::json entry{
          {"mode", package.mode},       {"p50_ms", package.p50_ms},
          {"tokens", package.tokens},   {"wlc_pct", package.wlc_pct},
          {"ra_pct", package.ra_pct},   {"transport", package.transport_hint},
      };
      if (package.sr_pct) entry["sr_pct"] = *package.sr_pct;
      ranked.push_back(std::move(entry));
    }
    nlohmann::json rejections = nlohmann::json::array();
    for (const Rejection& rejection : verdict.rejections) {
      nlohmann::json entry{
          {"mode", rejection.mode},
          {"rule", rejection.rule},
          {"value", rejection.value},
          {"threshold", rejection.threshold},
      };
      if (!rejection.detail.empty()) entry["route"] = rejection.detail;
      rejections.push_back(std::move(entry));
    }
    nlohmann::json entry{
        {"backend", verdict.backend_id},
        {"admissible", ranked},
        {"rejections", rejections},
    };
    if (verdict.selected) {
      entry["selected"] = *verdict.selected;
    } else {
      entry["selected"] = nullptr;
      entry["verdict"] = "no admissible package";
      if (verdict.nearest_miss) {
        nlohmann::json miss_rules = nlohmann::json::array();
        for (const Rejection& rejection : verdict.nearest_miss_rules) {
          miss_rules.push_back({{"rule", rejection.rule},
                                {"value", rejection.value},
                                {"threshold", rejection.threshold},
                                {"route", rejection.detail}});
        }
        entry["nearest_miss"] = {{"mode", *verdict.nearest_miss}, {"violations", miss_rules}};
      }
    }
    doc.push_back(std::move(entry));
  }
  return doc;
}

std::string verdicts_to_text(const std::vector<BackendVerdict>& verdicts) {
  std::string out;
  for (const BackendVerdict& verdict : verdicts) {
    out += verdict.backend_id + ": ";
    if (verdict.selected) {
      out += "use " + *verdict.selected;
      if (verdict.ranked.size() > 1) {
        out += " (then";
        for (std::size_t i = 1; i < verdict.ranked.size(); ++i) {
          out += " " + verdict.ranked[i].mode;
        }
        out += ")";
      }
    } else {
      out += "no admissible package";
      if (verdict.nearest_miss) out += ", nearest miss " + *verdict.nearest_miss;
    }
    out += '\n';
    for (const Rejection& rejection : verdict.rejections) {
      out += "  rejected " + rejection.mode + ": " + rejection.rule;
      if (!rejection.detail.empty()) out += "(" + rejection.detail + ")";
      char buffer[64];
      std::snprintf(buffer, sizeof(buffer), " value %.2f vs threshold %.2f", rejection.value,
                    rejection.threshold);
      out += buffer;
      out += '\n';
    }
  }
  return out;
}

}  // namespace routebench::recommend
