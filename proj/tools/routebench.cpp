// routebench CLI: run the factorial matrix, analyze outcome logs, and
// produce backend-conditioned deployment recommendations.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>

#include "routebench/backend_gateway.hpp"
#include "routebench/matrix_runner.hpp"
#include "routebench/metrics.hpp"
#include "routebench/recommend.hpp"
#include "routebench/report.hpp"

namespace {

using namespace routebench;

// config/input problems exit with 2, runtime failures with 1
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr const char* kSchemaVersions =
    "outcome log: routebench.outcome.v1\n"
    "matrix config: routebench.config.v1\n"
    "prompt pool: routebench.pool.v1\n"
    "simulator profiles: routebench.profiles.v1\n"
    "cell tables: routebench.cells.v1\n"
    "policy: routebench.policy.v1\n";

struct MatrixFilter {
  std::vector<std::string> clauses;

  bool keep(const profiles::ComboSpec& combo) const {
    for (const std::string& clause : clauses) {
      std::size_t eq = clause.find('=');
      if (eq == std::string::npos) throw std::runtime_error("bad --matrix-filter: " + clause);
      std::string key = clause.substr(0, eq);
      std::string value = clause.substr(eq + 1);
      if (key == "backend") {
        if (combo.backend_id != value) return false;
      } else if (key == "mode") {
        if (std::string(profiles::to_string(combo.profile.mode_name)) != value) return false;
      } else if (key == "constraint") {
        if (std::string(profiles::to_string(combo.constraint)) != value) return false;
      } else if (key == "transport") {
        if (std::string(profiles::to_string(combo.transport)) != value) return false;
      } else {
        throw std::runtime_error("bad --matrix-filter key: " + key);
      }
    }
    return true;
  }
};

int cmd_run(const std::string& config_path, const std::string& pool_path,
            const std::string& templates_dir, const std::string& profiles_path,
            const std::string& out_path, std::uint64_t seed, bool simulate, int workers,
            const MatrixFilter& filter) {
  profiles::MatrixConfig config;
  std::vector<runner::TaskPrompt> pool;
  profiles::TemplateSet templates;
  std::vector<profiles::ComboSpec> combos;
  std::unique_ptr<gateway::Gateway> gw;
  try {
    config = profiles::MatrixConfig::load(config_path);
    pool = runner::load_pool(pool_path, config.requests_per_combo);
    templates = profiles::TemplateSet::load(templates_dir);
    combos = profiles::enumerate_matrix(config);
    if (!filter.clauses.empty()) {
      std::vector<profiles::ComboSpec> kept;
      for (const profiles::ComboSpec& combo : combos) {
        if (filter.keep(combo)) kept.push_back(combo);
      }
      combos = std::move(kept);
      if (combos.empty()) throw std::runtime_error("matrix filter removed every combo");
    }
    if (simulate) {
      gw = std::make_unique<gateway::SimulatorGateway>(gateway::ProfileBook::load(profiles_path),
                                                       seed);
    }
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (!simulate) {
    std::map<std::string, gateway::HttpBackendOptions> options;
    for (const profiles::BackendConfig& backend : config.backends) {
      gateway::HttpBackendOptions opt;
      opt.base_url = backend.base_url;
      if (!backend.api_key_env.empty()) {
        if (const char* key = std::getenv(backend.api_key_env.c_str())) opt.api_key = key;
      }
      opt.timeout_ms = config.timeout_ms;
      opt.max_attempts = config.max_attempts;
      opt.max_concurrency = config.per_backend_concurrency;
      options[backend.id] = std::move(opt);
    }
    gw = std::make_unique<gateway::HttpGateway>(std::move(options));
  }

  runner::RunOptions options;
  options.seed = seed;
  options.workers = workers;
  options.progress = [](const profiles::ComboSpec& combo, long ok_rows, long total_rows) {
    std::cout << "combo " << combo.index << " " << combo.label() << ": " << ok_rows << "/"
              << total_rows << " ok\n";
  };

  runner::RunResult result = runner::run_matrix(config, combos, pool, templates, *gw, options);
  runner::write_outcome_log(out_path, runner::make_log_header(config, seed, combos.size()),
                            result.rows, result.aborts);

  std::cout << "rows: " << result.rows.size() << "\n";
  for (const auto& [cls, count] : result.taxonomy) {
    std::cout << "  " << schema::to_string(cls) << ": " << count << "\n";
  }
  if (!result.aborts.empty()) {
    std::cout << "aborted combos: " << result.aborts.size() << "\n";
    return 1;
  }
  return 0;
}

int cmd_analyze(const std::string& log_path, const std::string& cells_path,
                const std::string& slices_path, const std::string& out_dir,
                std::uint64_t bootstrap_seed, int resamples) {
  metrics::BootstrapParams bootstrap{resamples, bootstrap_seed};
  report::Analysis analysis;

  if (!cells_path.empty()) {
    analysis.cells = report::cells_from_fixture(cells_path);
    if (!slices_path.empty()) report::merge_route_slices(analysis.cells, slices_path);
    analysis.contrasts = report::targeted_contrasts(analysis.cells, resamples, bootstrap_seed);
  } else {
    runner::OutcomeLog log = runner::read_outcome_log(log_path);
    std::vector<metrics::ComboMetrics> combos = metrics::per_combo_metrics(log.rows);
    analysis = report::analyze_combos(std::move(combos), bootstrap);
    if (!slices_path.empty()) report::merge_route_slices(analysis.cells, slices_path);
  }

  report::emit_report(analysis, out_dir,
                      {report::TableFormat::markdown, report::TableFormat::csv});
  std::cout << "tables written to " << out_dir << "\n";
  return 0;
}

int cmd_recommend(const std::string& tables_dir, const std::string& policy_path,
                  const std::string& out_path) {
  std::filesystem::path cells_file = std::filesystem::path(tables_dir) / "cells.json";
  std::ifstream in(cells_file);
  if (!in) throw UsageError("recommend: missing " + cells_file.string() + " (run analyze first)");
  nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<metrics::CellSummary> cells = report::cells_from_json(doc);

  recommend::DeploymentPolicy policy;
  try {
    policy = recommend::DeploymentPolicy::load(policy_path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  std::vector<recommend::BackendVerdict> verdicts = recommend::recommend(cells, policy);

  nlohmann::json out = recommend::verdicts_to_json(verdicts);
  if (!out_path.empty()) {
    std::ofstream file(out_path, std::ios::trunc);
    if (!file) throw std::runtime_error("recommend: cannot write " + out_path);
    file << out.dump(2) << '\n';
  }
  std::cout << recommend::verdicts_to_text(verdicts);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured-routing runtime benchmark"};
  app.require_subcommand(0, 1);

  bool version = false;
  app.add_flag("--version", version, "print file-format schema versions");

  // run
  auto* run = app.add_subcommand("run", "execute the factorial matrix");
  std::string config_path;
  std::string pool_path = "data/pool/prompt_pool.jsonl";
  std::string templates_dir = "data/templates";
  std::string profiles_path = "data/profiles/reference_sim.json";
  std::string out_path = "outcomes.jsonl";
  std::uint64_t seed = 20260810;
  bool simulate = false;
  bool live = false;
  int workers = 4;
  MatrixFilter filter;
  run->add_option("--config", config_path, "matrix config JSON")->required();
  run->add_option("--pool", pool_path, "prompt pool JSONL");
  run->add_option("--templates", templates_dir, "prompt template directory");
  run->add_option("--profiles", profiles_path, "simulator profile JSON");
  run->add_option("--out", out_path, "outcome log path");
  run->add_option("--seed", seed, "run seed");
  run->add_option("--workers", workers, "concurrent combo workers");
  run->add_flag("--simulate", simulate, "use the deterministic simulator");
  run->add_flag("--live", live, "use real HTTP backends");
  run->add_option("--matrix-filter", filter.clauses,
                  "keep only matching combos, e.g. backend=gemini (repeatable)");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "aggregate an outcome log into tables");
  std::string log_path;
  std::string cells_path;
  std::string slices_path;
  std::string analyze_out = "tables";
  std::uint64_t bootstrap_seed = 42;
  int resamples = 10000;
  analyze->add_option("--log", log_path, "outcome log JSONL");
  analyze->add_option("--cells", cells_path, "cell-mean fixture JSON instead of a log");
  analyze->add_option("--route-slices", slices_path, "route slice JSON to merge");
  analyze->add_option("--out", analyze_out, "output table directory");
  analyze->add_option("--bootstrap-seed", bootstrap_seed, "bootstrap seed");
  analyze->add_option("--resamples", resamples, "bootstrap resamples");

  // recommend
  auto* rec = app.add_subcommand("recommend", "apply a deployment policy to analyzed cells");
  std::string tables_dir = "tables";
  std::string policy_path;
  std::string verdict_path = "verdict.json";
  rec->add_option("--tables", tables_dir, "directory produced by analyze");
  rec->add_option("--policy", policy_path, "deployment policy JSON")->required();
  rec->add_option("--out", verdict_path, "verdict JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2
  }

  if (version) {
    std::cout << kSchemaVersions;
    return 0;
  }

  try {
    if (run->parsed()) {
      if (simulate == live) {
        std::cerr << "error: choose exactly one of --simulate / --live\n";
        return 2;
      }
      return cmd_run(config_path, pool_path, templates_dir, profiles_path, out_path, seed,
                     simulate, workers, filter);
    }
    if (analyze->parsed()) {
      if (log_path.empty() == cells_path.empty()) {
        std::cerr << "error: choose exactly one of --log / --cells\n";
        return 2;
      }
      return cmd_analyze(log_path, cells_path, slices_path, analyze_out, bootstrap_seed,
                         resamples);
    }
    if (rec->parsed()) {
      return cmd_recommend(tables_dir, policy_path, verdict_path);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  std::cout << app.help();
  return 2;
}
