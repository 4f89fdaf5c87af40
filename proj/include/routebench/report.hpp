#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "routebench/metrics.hpp"
#include "routebench/stats.hpp"

namespace routebench::report {

// Everything the report and recommendation layers consume. `combos`
// stays empty when cells were ingested from a fixture instead of a
// run log.
struct Analysis {
  std::vector<metrics::ComboMetrics> combos;
  std::vector<metrics::CellSummary> cells;
  std::map<std::string, std::vector<stats::AnovaRow>> anova_by_metric;
  std::vector<stats::ContrastRow> contrasts;
  std::map<schema::FailureClass, long> taxonomy;
};

inline constexpr std::array<std::string_view, 5> kAnovaMetrics = {"ra_pct", "sr_pct", "fc_pct",
                                                                  "p50_ms", "tokens"};

// Treatment-coded design from the combo table. Mode, constraint and
// transport levels follow the canonical declaration order; backends
// follow first appearance.
stats::Design design_from_combos(const std::vector<metrics::ComboMetrics>& combos);

// Per-combo response for one metric name ("fc_pct", "ra_pct",
// "sr_pct", "p50_ms", "tokens"). Throws when sr is requested but
// undefined for some combo.
Eigen::VectorXd response_vector(const std::vector<metrics::ComboMetrics>& combos,
                                std::string_view metric);

// The compressed-reconstruction package against both JSON baselines
// within each backend, for RA / SR / p50 / tokens.
std::vector<stats::ContrastRow> targeted_contrasts(const std::vector<metrics::CellSummary>& cells,
                                                   int resamples, std::uint64_t seed);

// Full analysis of a combo table: cells, ANOVA per metric, contrasts.
Analysis analyze_combos(std::vector<metrics::ComboMetrics> combos,
                        const metrics::BootstrapParams& bootstrap);

// ---- cell table I/O ----

nlohmann::json cells_to_json(const std::vector<metrics::CellSummary>& cells);
std::vector<metrics::CellSummary> cells_from_json(const nlohmann::json& doc);

// Ingests a reference-means fixture: each cell mean is replicated
// across the four subconditions, so invariant-cell bootstrap intervals
// collapse to the point.
std::vector<metrics::CellSummary> cells_from_fixture(const std::filesystem::path& path);

// Merges per-route accuracy slices (backend -> mode -> route -> pct)
// into an existing cell table.
void merge_route_slices(std::vector<metrics::CellSummary>& cells,
                        const std::filesystem::path& slices_path);

// ---- rendering ----

enum class TableFormat { markdown, csv };

// Writes cells, anova_correctness, anova_efficiency, contrasts, wlc,
// route_slices, taxonomy and tail_amplification tables into `out_dir`
// in every requested format, plus cells.json / contrasts.json for the
// recommendation stage and a combined report.md. Percentages and
// latencies are rendered with two decimals, tokens as integers.
void emit_report(const Analysis& analysis, const std::filesystem::path& out_dir,
                 const std::vector<TableFormat>& formats);

std::string format_p_value(double p);

}  // namespace routebench::report
