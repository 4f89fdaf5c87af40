#include "routebench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "routebench/stats.hpp"

namespace routebench::metrics {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: empty list");
  if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile: q out of [0,100]");
  std::sort(values.begin(), values.end());
  double h = (static_cast<double>(values.size()) - 1.0) * q / 100.0;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = static_cast<std::size_t>(std::ceil(h));
  if (lo == hi) return values[lo];
  double fraction = h - static_cast<double>(lo);
  return values[lo] + fraction * (values[hi] - values[lo]);
}

double wlc(double fc_pct, double ra_pct, std::optional<double> sr_pct) {
  auto check = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 100.0)) {
      throw std::invalid_argument(std::string("wlc: ") + name + " out of [0,100]");
    }
  };
  check(fc_pct, "fc");
  check(ra_pct, "ra");
  if (sr_pct) {
    check(*sr_pct, "sr");
    return std::max(0.0, fc_pct + ra_pct + *sr_pct - 200.0);
  }
  return std::max(0.0, fc_pct + ra_pct - 100.0);
}

MetricSummary compute_metrics(std::span<const runner::RequestOutcome> rows, std::string scope) {
  if (rows.empty()) throw std::invalid_argument("compute_metrics: empty subset");

  MetricSummary summary;
  summary.scope = std::move(scope);
  summary.total_rows = static_cast<long>(rows.size());
  for (schema::FailureClass c : schema::kAllFailureClasses) summary.taxonomy_counts[c] = 0;

  long ok = 0;
  long correct = 0;
  long state_rows = 0;
  long retained = 0;
  std::vector<double> latencies;
  latencies.reserve(rows.size());
  std::map<schema::RouteLabel, long> route_correct;
  for (schema::RouteLabel r : schema::kAllRoutes) {
    summary.per_route_counts[r] = 0;
    route_correct[r] = 0;
  }

  for (const runner::RequestOutcome& row : rows) {
    ++summary.taxonomy_counts[row.failure_class];
    ++summary.per_route_counts[row.gt_route];
    if (row.failure_class == schema::FailureClass::ok) ++ok;
    if (row.route_correct && *row.route_correct) {
      ++correct;
      ++route_correct[row.gt_route];
    }
    // SR denominator: every state-sensitive row. Failed rows carry no
    // state_retained flag and therefore count as not retained.
    if (row.state_sensitive) {
      ++state_rows;
      if (row.state_retained && *row.state_retained) ++retained;
    }
    latencies.push_back(row.latency_ms);
    summary.total_tokens += row.prompt_tokens + row.completion_tokens;
  }

  double n = static_cast<double>(rows.size());
  summary.fc_pct = 100.0 * static_cast<double>(ok) / n;
  summary.ra_pct = 100.0 * static_cast<double>(correct) / n;
  if (state_rows > 0) {
    summary.sr_pct = 100.0 * static_cast<double>(retained) / static_cast<double>(state_rows);
  }
  summary.p50_ms = percentile(latencies, 50.0);
  summary.p95_ms = percentile(latencies, 95.0);
  summary.tail_amp = summary.p50_ms > 0.0 ? summary.p95_ms / summary.p50_ms : 0.0;
  summary.wlc_pct = wlc(summary.fc_pct, summary.ra_pct, summary.sr_pct);

  for (schema::RouteLabel r : schema::kAllRoutes) {
    long count = summary.per_route_counts[r];
    summary.per_route_accuracy[r] =
        count > 0 ? 100.0 * static_cast<double>(route_correct[r]) / static_cast<double>(count)
                  : 0.0;
  }
  return summary;
}

std::vector<ComboMetrics> per_combo_metrics(const std::vector<runner::RequestOutcome>& rows) {
  std::map<int, std::vector<runner::RequestOutcome>> grouped;
  for (const runner::RequestOutcome& row : rows) grouped[row.combo_index].push_back(row);

  std::vector<ComboMetrics> combos;
  combos.reserve(grouped.size());
  for (auto& [index, group] : grouped) {
    ComboMetrics combo;
    combo.backend_id = group.front().backend_id;
    combo.mode = group.front().mode;
    combo.constraint = group.front().constraint;
    combo.transport = group.front().transport;
    combo.combo_index = index;
    std::string scope = combo.backend_id + "|" +
                        std::string(profiles::to_string(combo.mode)) + "|" +
                        std::string(profiles::to_string(combo.constraint)) + "|" +
                        std::string(profiles::to_string(combo.transport));
    combo.summary = compute_metrics(group, scope);
    combos.push_back(std::move(combo));
  }
  return combos;
}

namespace {

CellStat make_stat(std::vector<double> subvalues, const BootstrapParams& params,
                   const std::string& label) {
  CellStat stat;
  stat.subvalues = std::move(subvalues);
  double sum = 0.0;
  for (double v : stat.subvalues) sum += v;
  stat.mean = sum / static_cast<double>(stat.subvalues.size());
  if (stat.subvalues.size() > 1) {
    stats::BootstrapInterval interval =
        stats::bootstrap_mean_interval(stat.subvalues, params.resamples, params.seed, label);
    stat.bound = (interval.hi - interval.lo) / 2.0;
  }
  return stat;
}

}  // namespace

std::vector<CellSummary> cell_means_with_bounds(const std::vector<ComboMetrics>& combos,
                                                const BootstrapParams& params) {
  if (combos.empty()) throw std::invalid_argument("cell_means_with_bounds: no combos");

  // cells grouped backend-major (first appearance), modes in canonical
  // declaration order
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<const ComboMetrics*>> cells;
  std::vector<std::string> backend_order;
  for (const ComboMetrics& combo : combos) {
    std::pair<std::string, std::string> key{combo.backend_id,
                                            std::string(profiles::to_string(combo.mode))};
    if (cells.find(key) == cells.end()) order.push_back(key);
    cells[key].push_back(&combo);
    if (std::find(backend_order.begin(), backend_order.end(), combo.backend_id) ==
        backend_order.end()) {
      backend_order.push_back(combo.backend_id);
    }
  }
  auto rank = [&](const std::pair<std::string, std::string>& key) {
    std::size_t backend = std::find(backend_order.begin(), backend_order.end(), key.first) -
                          backend_order.begin();
    std::size_t mode = 0;
    for (std::size_t i = 0; i < profiles::kAllModes.size(); ++i) {
      if (key.second == profiles::to_string(profiles::kAllModes[i])) mode = i;
    }
    return backend * 8 + mode;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](const auto& a, const auto& b) { return rank(a) < rank(b); });

  std::vector<CellSummary> summaries;
  summaries.reserve(order.size());
  for (const auto& key : order) {
    const std::vector<const ComboMetrics*>& members = cells[key];
    CellSummary cell;
    cell.backend_id = key.first;
    cell.mode = key.second;
    std::string label = key.first + "|" + key.second;

    std::vector<double> fc, ra, sr, p50, tokens, tail;
    bool sr_everywhere = true;
    for (const ComboMetrics* m : members) {
      fc.push_back(m->summary.fc_pct);
      ra.push_back(m->summary.ra_pct);
      p50.push_back(m->summary.p50_ms);
      tokens.push_back(static_cast<double>(m->summary.total_tokens));
      tail.push_back(m->summary.tail_amp);
      if (m->summary.sr_pct) {
        sr.push_back(*m->summary.sr_pct);
      } else {
        sr_everywhere = false;
      }
    }

    cell.fc = make_stat(fc, params, label + "|fc");
    cell.ra = make_stat(ra, params, label + "|ra");
    cell.p50 = make_stat(p50, params, label + "|p50");
    cell.tokens = make_stat(tokens, params, label + "|tokens");
    if (sr_everywhere && !sr.empty()) cell.sr = make_stat(sr, params, label + "|sr");

    double tail_sum = 0.0;
    for (double t : tail) tail_sum += t;
    cell.tail_amp = tail_sum / static_cast<double>(tail.size());

    cell.wlc_pct = wlc(cell.fc.mean, cell.ra.mean,
                       cell.sr ? std::optional<double>(cell.sr->mean) : std::nullopt);

    for (schema::RouteLabel r : schema::kAllRoutes) {
      double sum = 0.0;
      int with_route = 0;
      for (const ComboMetrics* m : members) {
        auto it = m->summary.per_route_accuracy.find(r);
        if (it != m->summary.per_route_accuracy.end()) {
          sum += it->second;
          ++with_route;
        }
      }
      if (with_route > 0) cell.route_accuracy[r] = sum / with_route;
    }

    std::vector<double> stream_p50, non_stream_p50;
    for (const ComboMetrics* m : members) {
      (m->transport == profiles::Transport::stream ? stream_p50 : non_stream_p50)
          .push_back(m->summary.p50_ms);
    }
    auto mean_of = [](const std::vector<double>& v) -> std::optional<double> {
      if (v.empty()) return std::nullopt;
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    cell.p50_stream = mean_of(stream_p50);
    cell.p50_non_stream = mean_of(non_stream_p50);

    summaries.push_back(std::move(cell));
  }
  return summaries;
}

std::map<schema::FailureClass, long> total_taxonomy(const std::vector<ComboMetrics>& combos) {
  std::map<schema::FailureClass, long> totals;
  for (schema::FailureClass c : schema::kAllFailureClasses) totals[c] = 0;
  for (const ComboMetrics& combo : combos) {
    for (const auto& [cls, count] : combo.summary.taxonomy_counts) totals[cls] += count;
  }
  return totals;
}

}  // namespace routebench::metrics
