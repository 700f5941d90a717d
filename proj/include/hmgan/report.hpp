#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hmgan/config.hpp"
#include "hmgan/dataset.hpp"
#include "hmgan/train.hpp"

namespace hmgan {

// ---- order statistics -------------------------------------------------------

inline double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// Linear-interpolation quantile on sorted data, q in [0, 1].
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

inline double interquartile_range(const std::vector<double>& values) {
  return quantile(values, 0.75) - quantile(values, 0.25);
}

/// Ranks with ties averaged.
inline std::vector<double> ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> out(values.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = rank;
    i = j + 1;
  }
  return out;
}

/// Spearman rank correlation; 0 when either side is constant.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("spearman needs matched pairs >= 2");
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(rx.size());
  my /= static_cast<double>(ry.size());
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx <= 0.0 || dy <= 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

// ---- scatter plot -----------------------------------------------------------

/// Side-by-side real vs generated point panels, colored by condition.
inline std::string render_scatter_svg(const std::vector<Tensor>& real,
                                      const std::vector<std::size_t>& real_labels,
                                      const std::vector<Tensor>& gen,
                                      const std::vector<std::size_t>& gen_labels) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#e377c2"};
  constexpr int kPanel = 360;
  constexpr int kPad = 24;
  const auto px = [&](double v) { return kPad + (v + 1.2) / 2.4 * (kPanel - 2 * kPad); };

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\">\n",
                2 * kPanel, kPanel, 2 * kPanel, kPanel);
  svg += buf;
  const auto panel = [&](const std::vector<Tensor>& pts, const std::vector<std::size_t>& labels,
                         int x_off, const char* title) {
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%d\" y=\"0\" width=\"%d\" height=\"%d\" fill=\"white\" "
                  "stroke=\"#999\"/>\n<text x=\"%d\" y=\"16\" font-size=\"12\" "
                  "font-family=\"sans-serif\">%s</text>\n",
                  x_off, kPanel, kPanel, x_off + 8, title);
    svg += buf;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const char* color = kPalette[labels[i] % 8];
      std::snprintf(buf, sizeof(buf),
                    "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.6\" fill=\"%s\" "
                    "fill-opacity=\"0.55\"/>\n",
                    x_off + px(pts[i][0]), kPanel - px(pts[i][1]), color);
      svg += buf;
    }
  };
  panel(real, real_labels, 0, "real");
  panel(gen, gen_labels, kPanel, "generated");
  svg += "</svg>\n";
  return svg;
}

// ---- run directory outputs --------------------------------------------------

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

/// Everything recorded for one (config, seed) run: report.json, report.csv,
/// ratios.csv, samples.csv, scatter.svg, generator.json.
inline void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                              const RunOutcome& outcome) {
  std::filesystem::create_directories(dir);
  const TrainResult& tr = outcome.train_result;

  ordered_json report;
  if (outcome.eval) {
    report = outcome.eval->report.to_json();
  } else {
    report["seed"] = outcome.seed;
    report["variant"] = cfg.variant;
    report["config_hash"] = config_hash(cfg.to_json());
  }
  report["status"] = tr.status == RunStatus::ok ? "ok" : "failed";
  if (tr.status != RunStatus::ok) report["failed_step"] = tr.failed_step;
  write_text_file(dir / "report.json", report.dump(2) + "\n");

  if (outcome.eval) {
    const MetricsReport& rep = outcome.eval->report;
    write_text_file(dir / "report.csv",
                    MetricsReport::csv_header(rep.diversity_per_layer.size(),
                                              rep.mode_coverage.has_value()) +
                        "\n" + rep.csv_row() + "\n");
  }

  std::string ratios = "step,layer,mean_ratio\n";
  char buf[96];
  for (const RatioLogEntry& e : tr.ratio_log) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.10g\n", e.step, e.layer, e.mean_ratio);
    ratios += buf;
  }
  write_text_file(dir / "ratios.csv", ratios);

  if (outcome.eval) {
    const SyntheticDataset data =
        make_ring_dataset(cfg.dataset.conditions, cfg.dataset.modes_per_condition,
                          cfg.dataset.radius, cfg.dataset.sigma, cfg.dataset.samples,
                          RngStream(cfg.dataset.seed));
    std::ofstream samples(dir / "samples.csv", std::ios::binary);
    write_points_csv(samples, outcome.eval->points, outcome.eval->labels);
    write_text_file(dir / "scatter.svg",
                    render_scatter_svg(data.points, data.labels, outcome.eval->points,
                                       outcome.eval->labels));
  }

  write_text_file(dir / "generator.json", tr.generator.to_json().dump(2) + "\n");
}

inline std::string run_dir_name(std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seed-%04llu", static_cast<unsigned long long>(seed));
  return buf;
}

// ---- aggregation ------------------------------------------------------------

struct VariantSummary {
  std::string variant;
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::map<std::string, std::vector<double>> metric_values;  // metric -> per-run values
};

inline const std::vector<std::string>& summary_metric_names() {
  static const std::vector<std::string> names = {"fid", "ndb", "jsd", "diversity_total",
                                                 "coverage"};
  return names;
}

inline void add_report_to_summary(VariantSummary& summary, const MetricsReport& rep) {
  ++summary.runs;
  summary.metric_values["fid"].push_back(rep.fid);
  summary.metric_values["ndb"].push_back(static_cast<double>(rep.ndb));
  summary.metric_values["jsd"].push_back(rep.jsd);
  summary.metric_values["diversity_total"].push_back(rep.diversity_total);
  if (rep.mode_coverage)
    summary.metric_values["coverage"].push_back(static_cast<double>(*rep.mode_coverage));
  for (std::size_t l = 0; l < rep.diversity_per_layer.size(); ++l)
    summary.metric_values["diversity_l" + std::to_string(l + 1)].push_back(
        rep.diversity_per_layer[l]);
}

/// One table per variant: median and interquartile range of every metric.
inline std::string render_summary_table(const std::vector<VariantSummary>& summaries) {
  std::string out;
  char buf[160];
  for (const VariantSummary& s : summaries) {
    std::snprintf(buf, sizeof(buf), "variant %s (%zu runs, %zu failed)\n", s.variant.c_str(),
                  s.runs, s.failed);
    out += buf;
    std::snprintf(buf, sizeof(buf), "  %-18s %14s %14s\n", "metric", "median", "IQR");
    out += buf;
    for (const auto& [name, values] : s.metric_values) {
      if (values.empty()) continue;
      std::snprintf(buf, sizeof(buf), "  %-18s %14.4f %14.4f\n", name.c_str(), median(values),
                    interquartile_range(values));
      out += buf;
    }
  }
  return out;
}

inline ordered_json summary_to_json(const std::vector<VariantSummary>& summaries) {
  ordered_json doc = ordered_json::array();
  for (const VariantSummary& s : summaries) {
    ordered_json entry;
    entry["variant"] = s.variant;
    entry["runs"] = s.runs;
    entry["failed"] = s.failed;
    ordered_json metrics;
    for (const auto& [name, values] : s.metric_values) {
      if (values.empty()) continue;
      metrics[name] = {{"median", median(values)},
                       {"q1", quantile(values, 0.25)},
                       {"q3", quantile(values, 0.75)}};
    }
    entry["metrics"] = std::move(metrics);
    doc.push_back(std::move(entry));
  }
  return doc;
}

}  // namespace hmgan
