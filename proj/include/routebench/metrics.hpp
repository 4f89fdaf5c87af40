#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "routebench/matrix_runner.hpp"

namespace routebench::metrics {

// Aggregate of one row subset (a combo, a backend x mode cell, or any
// other slice). Percentages are in [0,100]. sr_pct is absent when the
// subset has no state-sensitive rows.
struct MetricSummary {
  std::string scope;
  long total_rows = 0;
  double fc_pct = 0.0;
  double ra_pct = 0.0;
  std::optional<double> sr_pct;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  long total_tokens = 0;
  double wlc_pct = 0.0;
  double tail_amp = 0.0;  // p95/p50, 0 when p50 is 0
  std::map<schema::RouteLabel, double> per_route_accuracy;
  std::map<schema::RouteLabel, long> per_route_counts;
  std::map<schema::FailureClass, long> taxonomy_counts;
};

// Linear-interpolation quantile: sorted values, h = (n-1)q/100,
// interpolate between floor(h) and ceil(h). Throws on an empty list or
// q outside [0,100].
double percentile(std::vector<double> values, double q);

// Frechet lower bound on the joint event: max(0, FC+RA+SR-200) with
// state retention, max(0, FC+RA-100) without. Inputs must be in
// [0,100].
double wlc(double fc_pct, double ra_pct, std::optional<double> sr_pct);

// FC counts ok rows; RA counts correct routes over ALL rows (a failed
// record cannot route); SR counts retained over all state-sensitive
// rows. Throws on an empty subset.
MetricSummary compute_metrics(std::span<const runner::RequestOutcome> rows, std::string scope);

struct ComboMetrics {
  std::string backend_id;
  profiles::ModeName mode = profiles::ModeName::MJ;
  profiles::Constraint constraint = profiles::Constraint::limited;
  profiles::Transport transport = profiles::Transport::non_stream;
  int combo_index = 0;
  MetricSummary summary;
};

// Groups log rows by combo index and aggregates each group, ordered by
// combo index.
std::vector<ComboMetrics> per_combo_metrics(const std::vector<runner::RequestOutcome>& rows);

struct CellStat {
  double mean = 0.0;
  double bound = 0.0;              // half-width of the percentile bootstrap interval
  std::vector<double> subvalues;   // one per subcondition combo
};

// One backend x mode cell: means with descriptive stability bounds
// over the constraint x transport subconditions. WLC is computed from
// the cell-mean margins. Route slices are subcondition means of
// per-route accuracy.
struct CellSummary {
  std::string backend_id;
  std::string mode;
  CellStat fc, ra, p50, tokens;
  std::optional<CellStat> sr;
  double wlc_pct = 0.0;
  double tail_amp = 0.0;
  std::map<schema::RouteLabel, double> route_accuracy;
  std::optional<double> p50_stream;      // transport slices, when both present
  std::optional<double> p50_non_stream;
};

struct BootstrapParams {
  int resamples = 10000;
  std::uint64_t seed = 42;
};

// Cells ordered by (backend, mode) in the order they appear in the
// combo table. Throws if a cell has no combos.
std::vector<CellSummary> cell_means_with_bounds(const std::vector<ComboMetrics>& combos,
                                                const BootstrapParams& params);

// Sum of taxonomy counts over combos; used for conservation checks.
std::map<schema::FailureClass, long> total_taxonomy(const std::vector<ComboMetrics>& combos);

}  // namespace routebench::metrics
