#include "routebench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace routebench::report {

namespace {

std::string fixed(double value, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
  return std::string(buffer);
}

std::string tokens_str(double value) {
  return std::to_string(static_cast<long long>(std::llround(value)));
}

int find_level(const std::vector<std::string>& levels, const std::string& name) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

std::string format_p_value(double p) {
  if (p < 0.001) return "<0.001";
  return fixed(p, 3);
}

stats::Design design_from_combos(const std::vector<metrics::ComboMetrics>& combos) {
  stats::Design design;

  // declaration-order levels, restricted to what actually occurs
  for (profiles::ModeName m : profiles::kAllModes) {
    for (const metrics::ComboMetrics& combo : combos) {
      if (combo.mode == m) {
        design.levels.mode.push_back(std::string(profiles::to_string(m)));
        break;
      }
    }
  }
  for (const metrics::ComboMetrics& combo : combos) {
    if (find_level(design.levels.backend, combo.backend_id) < 0) {
      design.levels.backend.push_back(combo.backend_id);
    }
  }
  for (profiles::Constraint c : {profiles::Constraint::limited, profiles::Constraint::unlimited}) {
    for (const metrics::ComboMetrics& combo : combos) {
      if (combo.constraint == c) {
        design.levels.constraint.push_back(std::string(profiles::to_string(c)));
        break;
      }
    }
  }
  for (profiles::Transport t : {profiles::Transport::non_stream, profiles::Transport::stream}) {
    for (const metrics::ComboMetrics& combo : combos) {
      if (combo.transport == t) {
        design.levels.transport.push_back(std::string(profiles::to_string(t)));
        break;
      }
    }
  }

  design.rows.reserve(combos.size());
  for (const metrics::ComboMetrics& combo : combos) {
    stats::DesignRow row;
    row.backend = find_level(design.levels.backend, combo.backend_id);
    row.mode = find_level(design.levels.mode, std::string(profiles::to_string(combo.mode)));
    row.constraint =
        find_level(design.levels.constraint, std::string(profiles::to_string(combo.constraint)));
    row.transport =
        find_level(design.levels.transport, std::string(profiles::to_string(combo.transport)));
    design.rows.push_back(row);
  }
  return design;
}

Eigen::VectorXd response_vector(const std::vector<metrics::ComboMetrics>& combos,
                                std::string_view metric) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(combos.size()));
  for (std::size_t i = 0; i < combos.size(); ++i) {
    const metrics::MetricSummary& s = combos[i].summary;
    double value = 0.0;
    if (metric == "fc_pct") {
      value = s.fc_pct;
    } else if (metric == "ra_pct") {
      value = s.ra_pct;
    } else if (metric == "sr_pct") {
      if (!s.sr_pct) {
        throw std::runtime_error("response_vector: sr undefined for combo " + s.scope);
      }
      value = *s.sr_pct;
    } else if (metric == "p50_ms") {
      value = s.p50_ms;
    } else if (metric == "tokens") {
      value = static_cast<double>(s.total_tokens);
    } else {
      throw std::invalid_argument("response_vector: unknown metric " + std::string(metric));
    }
    y[static_cast<Eigen::Index>(i)] = value;
  }
  return y;
}

std::vector<stats::ContrastRow> targeted_contrasts(const std::vector<metrics::CellSummary>& cells,
                                                   int resamples, std::uint64_t seed) {
  auto find_cell = [&](const std::string& backend,
                       const std::string& mode) -> const metrics::CellSummary* {
    for (const metrics::CellSummary& cell : cells) {
      if (cell.backend_id == backend && cell.mode == mode) return &cell;
    }
    return nullptr;
  };

  std::vector<std::string> backends;
  for (const metrics::CellSummary& cell : cells) {
    if (std::find(backends.begin(), backends.end(), cell.backend_id) == backends.end()) {
      backends.push_back(cell.backend_id);
    }
  }

  std::vector<stats::ContrastRow> rows;
  for (const std::string& backend : backends) {
    const metrics::CellSummary* compressed = find_cell(backend, "MCLR");
    if (!compressed) continue;
    for (const char* baseline : {"MJ", "SJ"}) {
      const metrics::CellSummary* base = find_cell(backend, baseline);
      if (!base) continue;
      std::string pair = std::string("MCLR vs ") + baseline;

      auto add = [&](const char* metric, const metrics::CellStat& a, const metrics::CellStat& b) {
        rows.push_back(stats::bootstrap_contrast(a.subvalues, b.subvalues, resamples, seed,
                                                 backend, pair, metric));
      };
      add("ra_pct", compressed->ra, base->ra);
      if (compressed->sr && base->sr) add("sr_pct", *compressed->sr, *base->sr);
      add("p50_ms", compressed->p50, base->p50);
      add("tokens", compressed->tokens, base->tokens);
    }
  }
  return rows;
}

Analysis analyze_combos(std::vector<metrics::ComboMetrics> combos,
                        const metrics::BootstrapParams& bootstrap) {
  Analysis analysis;
  analysis.taxonomy = metrics::total_taxonomy(combos);
  analysis.cells = metrics::cell_means_with_bounds(combos, bootstrap);
  analysis.contrasts = targeted_contrasts(analysis.cells, bootstrap.resamples, bootstrap.seed);

  if (combos.size() >= 2) {
    stats::Design design = design_from_combos(combos);
    bool full_model = design.levels.backend.size() >= 2 && design.levels.mode.size() >= 2 &&
                      design.levels.constraint.size() == 2 && design.levels.transport.size() == 2;
    if (full_model) {
      for (std::string_view metric : kAnovaMetrics) {
        try {
          Eigen::VectorXd y = response_vector(combos, metric);
          analysis.anova_by_metric[std::string(metric)] = stats::anova_type2(design, y);
        } catch (const std::runtime_error&) {
          // metric undefined for this log (e.g. no state-sensitive rows)
        }
      }
    }
  }
  analysis.combos = std::move(combos);
  return analysis;
}

nlohmann::json cells_to_json(const std::vector<metrics::CellSummary>& cells) {
  nlohmann::json doc = nlohmann::json::array();
  for (const metrics::CellSummary& cell : cells) {
    nlohmann::json entry{
        {"backend", cell.backend_id},
        {"mode", cell.mode},
        {"fc_pct", cell.fc.mean},
        {"fc_bound", cell.fc.bound},
        {"fc_values", cell.fc.subvalues},
        {"ra_pct", cell.ra.mean},
        {"ra_bound", cell.ra.bound},
        {"ra_values", cell.ra.subvalues},
        {"p50_ms", cell.p50.mean},
        {"p50_bound", cell.p50.bound},
        {"p50_values", cell.p50.subvalues},
        {"tokens", cell.tokens.mean},
        {"tokens_bound", cell.tokens.bound},
        {"tokens_values", cell.tokens.subvalues},
        {"wlc_pct", cell.wlc_pct},
        {"tail_amp", cell.tail_amp},
    };
    if (cell.sr) {
      entry["sr_pct"] = cell.sr->mean;
      entry["sr_bound"] = cell.sr->bound;
      entry["sr_values"] = cell.sr->subvalues;
    }
    nlohmann::json slices = nlohmann::json::object();
    for (const auto& [route, pct] : cell.route_accuracy) {
      slices[std::string(schema::to_string(route))] = pct;
    }
    entry["route_accuracy"] = slices;
    if (cell.p50_stream) entry["p50_stream"] = *cell.p50_stream;
    if (cell.p50_non_stream) entry["p50_non_stream"] = *cell.p50_non_stream;
    doc.push_back(std::move(entry));
  }
  return doc;
}

std::vector<metrics::CellSummary> cells_from_json(const nlohmann::json& doc) {
  std::vector<metrics::CellSummary> cells;
  for (const auto& entry : doc) {
    metrics::CellSummary cell;
    cell.backend_id = entry.at("backend").get<std::string>();
    cell.mode = entry.at("mode").get<std::string>();

    auto stat = [&](const char* mean_key, const char* bound_key,
                    const char* values_key) -> metrics::CellStat {
      metrics::CellStat s;
      s.mean = entry.at(mean_key).get<double>();
      s.bound = entry.value(bound_key, 0.0);
      if (entry.contains(values_key)) {
        s.subvalues = entry.at(values_key).get<std::vector<double>>();
      } else {
        s.subvalues.assign(4, s.mean);
      }
      return s;
    };
    cell.fc = stat("fc_pct", "fc_bound", "fc_values");
    cell.ra = stat("ra_pct", "ra_bound", "ra_values");
    cell.p50 = stat("p50_ms", "p50_bound", "p50_values");
    cell.tokens = stat("tokens", "tokens_bound", "tokens_values");
    if (entry.contains("sr_pct")) cell.sr = stat("sr_pct", "sr_bound", "sr_values");
    cell.wlc_pct = entry.value(
        "wlc_pct", metrics::wlc(cell.fc.mean, cell.ra.mean,
                                cell.sr ? std::optional<double>(cell.sr->mean) : std::nullopt));
    cell.tail_amp = entry.value("tail_amp", 0.0);
    if (entry.contains("route_accuracy")) {
      for (const auto& [name, pct] : entry.at("route_accuracy").items()) {
        if (auto route = schema::route_from_string(name)) {
          cell.route_accuracy[*route] = pct.get<double>();
        }
      }
    }
    if (entry.contains("p50_stream")) cell.p50_stream = entry.at("p50_stream").get<double>();
    if (entry.contains("p50_non_stream")) {
      cell.p50_non_stream = entry.at("p50_non_stream").get<double>();
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<metrics::CellSummary> cells_from_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cells fixture: cannot open " + path.string());
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw std::runtime_error("cells fixture: malformed JSON");
  const nlohmann::json& list = doc.contains("cells") ? doc.at("cells") : doc;
  return cells_from_json(list);
}

void merge_route_slices(std::vector<metrics::CellSummary>& cells,
                        const std::filesystem::path& slices_path) {
  std::ifstream in(slices_path);
  if (!in) throw std::runtime_error("route slices: cannot open " + slices_path.string());
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw std::runtime_error("route slices: malformed JSON");
  }
  for (metrics::CellSummary& cell : cells) {
    if (!doc.contains(cell.backend_id)) continue;
    const nlohmann::json& modes = doc.at(cell.backend_id);
    if (!modes.contains(cell.mode)) continue;
    for (const auto& [name, pct] : modes.at(cell.mode).items()) {
      if (auto route = schema::route_from_string(name)) {
        cell.route_accuracy[*route] = pct.get<double>();
      }
    }
  }
}

namespace {

// Minimal table renderer shared by the markdown and CSV outputs.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render(TableFormat format) const {
    std::string out;
    auto join = [&](const std::vector<std::string>& cells, const char* sep, const char* prefix,
                    const char* suffix) {
      std::string line = prefix;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += sep;
        line += cells[i];
      }
      line += suffix;
      line += '\n';
      return line;
    };
    if (format == TableFormat::markdown) {
      out += join(header, " | ", "| ", " |");
      std::vector<std::string> dashes(header.size(), "---");
      out += join(dashes, " | ", "| ", " |");
      for (const auto& row : rows) out += join(row, " | ", "| ", " |");
    } else {
      out += join(header, ",", "", "");
      for (const auto& row : rows) out += join(row, ",", "", "");
    }
    return out;
  }
};

void write_table(const Table& table, const std::filesystem::path& out_dir,
                 const std::string& name, const std::vector<TableFormat>& formats,
                 std::string* combined) {
  for (TableFormat format : formats) {
    const char* extension = format == TableFormat::markdown ? ".md" : ".csv";
    std::ofstream out(out_dir / (name + extension), std::ios::trunc);
    if (!out) throw std::runtime_error("report: cannot write " + name + extension);
    out << table.render(format);
    if (combined && format == TableFormat::markdown) {
      *combined += "## " + name + "\n\n" + table.render(format) + "\n";
    }
  }
}

std::string pm(double mean, double bound, int decimals) {
  return fixed(mean, decimals) + " ± " + fixed(bound, decimals);
}

}  // namespace

void emit_report(const Analysis& analysis, const std::filesystem::path& out_dir,
                 const std::vector<TableFormat>& formats) {
  if (analysis.cells.empty()) throw std::runtime_error("report: no cells to render");
  std::filesystem::create_directories(out_dir);
  std::string combined = "# routebench report\n\n";

  if (!analysis.combos.empty()) {
    Table combos{{"Backend", "Mode", "Constraint", "Transport", "FC%", "RA%", "SR%", "p50(ms)",
                  "p95(ms)", "Tokens", "WLC%"},
                 {}};
    nlohmann::json combo_doc = nlohmann::json::array();
    for (const metrics::ComboMetrics& combo : analysis.combos) {
      const metrics::MetricSummary& s = combo.summary;
      combos.rows.push_back({
          combo.backend_id,
          std::string(profiles::to_string(combo.mode)),
          std::string(profiles::to_string(combo.constraint)),
          std::string(profiles::to_string(combo.transport)),
          fixed(s.fc_pct, 2),
          fixed(s.ra_pct, 2),
          s.sr_pct ? fixed(*s.sr_pct, 2) : "-",
          fixed(s.p50_ms, 2),
          fixed(s.p95_ms, 2),
          std::to_string(s.total_tokens),
          fixed(s.wlc_pct, 2),
      });
      nlohmann::json entry{
          {"backend", combo.backend_id},
          {"mode", std::string(profiles::to_string(combo.mode))},
          {"constraint", std::string(profiles::to_string(combo.constraint))},
          {"transport", std::string(profiles::to_string(combo.transport))},
          {"fc_pct", s.fc_pct},
          {"ra_pct", s.ra_pct},
          {"p50_ms", s.p50_ms},
          {"p95_ms", s.p95_ms},
          {"tokens", s.total_tokens},
          {"wlc_pct", s.wlc_pct},
          {"tail_amp", s.tail_amp},
      };
      if (s.sr_pct) entry["sr_pct"] = *s.sr_pct;
      combo_doc.push_back(std::move(entry));
    }
    write_table(combos, out_dir, "combos", formats, nullptr);
    std::ofstream out(out_dir / "combos.json", std::ios::trunc);
    out << combo_doc.dump(2) << '\n';
  }

  Table cells{{"Backend", "Mode", "FC%", "RA%", "SR%", "p50(ms)", "Tokens"}, {}};
  for (const metrics::CellSummary& cell : analysis.cells) {
    cells.rows.push_back({
        cell.backend_id,
        cell.mode,
        pm(cell.fc.mean, cell.fc.bound, 2),
        pm(cell.ra.mean, cell.ra.bound, 2),
        cell.sr ? pm(cell.sr->mean, cell.sr->bound, 2) : "-",
        pm(cell.p50.mean, cell.p50.bound, 2),
        tokens_str(cell.tokens.mean) + " ± " + tokens_str(cell.tokens.bound),
    });
  }
  write_table(cells, out_dir, "cells", formats, &combined);

  auto anova_table = [&](const std::vector<std::string>& metrics_wanted) {
    Table table{{"Metric", "Effect", "F", "p", "Partial eta squared"}, {}};
    for (const std::string& metric : metrics_wanted) {
      auto it = analysis.anova_by_metric.find(metric);
      if (it == analysis.anova_by_metric.end()) continue;
      for (const stats::AnovaRow& row : it->second) {
        table.rows.push_back({metric, row.term, fixed(row.F, 2), format_p_value(row.p),
                              fixed(row.partial_eta_sq, 3)});
      }
    }
    return table;
  };
  Table correctness = anova_table({"ra_pct", "sr_pct", "fc_pct"});
  if (!correctness.rows.empty()) {
    write_table(correctness, out_dir, "anova_correctness", formats, &combined);
  }
  Table efficiency = anova_table({"p50_ms", "tokens"});
  if (!efficiency.rows.empty()) {
    write_table(efficiency, out_dir, "anova_efficiency", formats, &combined);
  }

  if (!analysis.contrasts.empty()) {
    // pivot: one row per backend/pair, one column per metric
    Table contrasts{{"Backend", "Contrast", "RA%", "SR%", "p50(ms)", "Tokens"}, {}};
    std::vector<std::pair<std::string, std::string>> keys;
    for (const stats::ContrastRow& row : analysis.contrasts) {
      std::pair<std::string, std::string> key{row.backend, row.pair};
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    for (const auto& key : keys) {
      std::map<std::string, std::string> by_metric;
      for (const stats::ContrastRow& row : analysis.contrasts) {
        if (row.backend != key.first || row.pair != key.second) continue;
        int decimals = row.metric == "tokens" ? 0 : 2;
        std::string text;
        if (decimals == 0) {
          text = tokens_str(row.delta) + " [" + tokens_str(row.ci_low) + ", " +
                 tokens_str(row.ci_high) + "]";
        } else {
          text = fixed(row.delta, 2) + " [" + fixed(row.ci_low, 2) + ", " +
                 fixed(row.ci_high, 2) + "]";
        }
        by_metric[row.metric] = text;
      }
      auto cell_or_dash = [&](const char* metric) {
        auto it = by_metric.find(metric);
        return it == by_metric.end() ? std::string("-") : it->second;
      };
      contrasts.rows.push_back({key.first, key.second, cell_or_dash("ra_pct"),
                                cell_or_dash("sr_pct"), cell_or_dash("p50_ms"),
                                cell_or_dash("tokens")});
    }
    write_table(contrasts, out_dir, "contrasts", formats, &combined);
  }

  Table wlc{{"Backend", "Mode", "WLC%"}, {}};
  for (const metrics::CellSummary& cell : analysis.cells) {
    wlc.rows.push_back({cell.backend_id, cell.mode, fixed(cell.wlc_pct, 2)});
  }
  write_table(wlc, out_dir, "wlc", formats, &combined);

  bool any_slices = false;
  for (const metrics::CellSummary& cell : analysis.cells) {
    if (!cell.route_accuracy.empty()) any_slices = true;
  }
  if (any_slices) {
    Table slices{{"Backend", "Mode", "chat", "task", "dev", "doc"}, {}};
    for (const metrics::CellSummary& cell : analysis.cells) {
      std::vector<std::string> row{cell.backend_id, cell.mode};
      for (schema::RouteLabel r : schema::kAllRoutes) {
        auto it = cell.route_accuracy.find(r);
        row.push_back(it == cell.route_accuracy.end() ? "-" : fixed(it->second, 2));
      }
      slices.rows.push_back(std::move(row));
    }
    write_table(slices, out_dir, "route_slices", formats, &combined);
  }

  long total = 0;
  for (const auto& [cls, count] : analysis.taxonomy) total += count;
  if (total > 0) {
    Table taxonomy{{"Class", "Count"}, {}};
    for (const auto& [cls, count] : analysis.taxonomy) {
      taxonomy.rows.push_back({std::string(schema::to_string(cls)), std::to_string(count)});
    }
    taxonomy.rows.push_back({"total", std::to_string(total)});
    write_table(taxonomy, out_dir, "taxonomy", formats, &combined);
  }

  bool any_tail = false;
  for (const metrics::CellSummary& cell : analysis.cells) {
    if (cell.tail_amp > 0.0) any_tail = true;
  }
  if (any_tail) {
    Table tail{{"Backend", "Mode", "p95/p50"}, {}};
    for (const metrics::CellSummary& cell : analysis.cells) {
      tail.rows.push_back({cell.backend_id, cell.mode, fixed(cell.tail_amp, 2)});
    }
    write_table(tail, out_dir, "tail_amplification", formats, &combined);
  }

  {
    std::ofstream out(out_dir / "cells.json", std::ios::trunc);
    out << cells_to_json(analysis.cells).dump(2) << '\n';
  }
  if (!analysis.anova_by_metric.empty()) {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [metric, rows] : analysis.anova_by_metric) {
      nlohmann::json list = nlohmann::json::array();
      for (const stats::AnovaRow& row : rows) {
        list.push_back({{"term", row.term},
                        {"sum_sq", row.sum_sq},
                        {"df", row.df},
                        {"F", row.F},
                        {"p", row.p},
                        {"partial_eta_sq", row.partial_eta_sq}});
      }
      doc[metric] = std::move(list);
    }
    std::ofstream out(out_dir / "anova.json", std::ios::trunc);
    out << doc.dump(2) << '\n';
  }
  if (!analysis.contrasts.empty()) {
    nlohmann::json doc = nlohmann::json::array();
    for (const stats::ContrastRow& row : analysis.contrasts) {
      doc.push_back({{"backend", row.backend},
                     {"pair", row.pair},
                     {"metric", row.metric},
                     {"delta", row.delta},
                     {"ci_low", row.ci_low},
                     {"ci_high", row.ci_high}});
    }
    std::ofstream out(out_dir / "contrasts.json", std::ios::trunc);
    out << doc.dump(2) << '\n';
  }
  {
    std::ofstream out(out_dir / "report.md", std::ios::trunc);
    out << combined;
  }
}

}  // namespace routebench::report
