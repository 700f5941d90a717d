#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hmgan/config.hpp"
#include "hmgan/prop1.hpp"
#include "hmgan/report.hpp"
#include "hmgan/train.hpp"
#include "hmgan/version.hpp"

namespace hmgan::cli {

namespace fs = std::filesystem;

// exit codes: 0 success, 1 validation error, 2 runtime failure
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError({{"", std::string("not valid JSON: ") + e.what()}});
  }
}

/// Loads a config (or a recorded manifest), applies --set overrides, then
/// validates. Unknown override keys are rejected here, before any work.
inline ExperimentConfig load_config_with_overrides(const std::string& path,
                                                   const std::vector<std::string>& sets) {
  json doc = read_json_file(path);
  if (doc.is_object() && doc.contains("config") && doc.contains("tool_version"))
    doc = doc.at("config");
  for (const std::string& assignment : sets) apply_override(doc, assignment);
  return validate_config_or_throw(doc);
}

inline ordered_json make_manifest(const std::string& command, const ExperimentConfig& cfg) {
  ordered_json manifest;
  manifest["tool_version"] = kVersion;
  manifest["command"] = command;
  manifest["config_hash"] = config_hash(cfg.to_json());
  manifest["config"] = cfg.to_json();
  manifest["seeds"] = cfg.seeds;
  manifest["runs"] = ordered_json::array();
  return manifest;
}

inline void write_manifest(const fs::path& out_dir, const ordered_json& manifest) {
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

// ---- train ------------------------------------------------------------------

inline int cmd_train(const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const std::vector<RunOutcome> outcomes = run_seeds(cfg, cfg.seeds);

  ordered_json manifest = make_manifest("train", cfg);
  std::string runs_csv;
  std::vector<VariantSummary> summaries(1);
  summaries[0].variant = cfg.variant;
  for (const RunOutcome& outcome : outcomes) {
    const std::string dir_name = run_dir_name(outcome.seed);
    write_run_outputs(out_dir / dir_name, cfg, outcome);
    const bool ok = outcome.train_result.status == RunStatus::ok;
    manifest["runs"].push_back(
        {{"seed", outcome.seed}, {"status", ok ? "ok" : "failed"}, {"dir", dir_name}});
    if (ok) {
      const MetricsReport& rep = outcome.eval->report;
      if (runs_csv.empty())
        runs_csv = MetricsReport::csv_header(rep.diversity_per_layer.size(),
                                             rep.mode_coverage.has_value()) +
                   "\n";
      runs_csv += rep.csv_row() + "\n";
      add_report_to_summary(summaries[0], rep);
    } else {
      ++summaries[0].failed;
      std::cerr << "warning: seed " << outcome.seed << " diverged at step "
                << outcome.train_result.failed_step << "\n";
    }
  }
  write_text_file(out_dir / "runs.csv", runs_csv);
  write_manifest(out_dir, manifest);
  std::cout << render_summary_table(summaries);
  return kExitOk;
}

// ---- bounds -----------------------------------------------------------------

inline int cmd_bounds(const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const std::uint64_t seed = cfg.seeds.front();
  const BoundVector bounds = two_step_bounds(cfg, seed);

  std::string lines;
  for (std::size_t layer = 2; layer <= bounds.entry_count() + 1; ++layer) {
    ordered_json rec;
    rec["layer"] = layer;
    rec["b"] = bounds.b(layer);
    rec["m"] = bounds.m;
    lines += rec.dump() + "\n";
    if (bounds.b(layer) > 1.0)
      std::cerr << "warning: b(" << layer << ") = " << bounds.b(layer)
                << " > 1 makes the admissible target interval empty\n";
  }
  std::cout << lines;
  write_text_file(out_dir / "bounds.jsonl", lines);

  ordered_json manifest = make_manifest("bounds", cfg);
  manifest["runs"].push_back({{"seed", seed}, {"status", "ok"}, {"dir", "."}});
  write_manifest(out_dir, manifest);
  return kExitOk;
}

// ---- metrics (standalone, external CSV point sets) ---------------------------

inline int cmd_metrics(const std::string& real_path, const std::string& gen_path, std::size_t k,
                       double alpha, std::uint64_t embedder_seed) {
  const PointSet real = read_points_csv(real_path);
  const PointSet gen = read_points_csv(gen_path);

  const FeatureEmbedder embedder = FeatureEmbedder::fixed_random(2, embedder_seed);
  std::vector<Tensor> real_feats, gen_feats;
  for (const Tensor& x : real.points) real_feats.push_back(embedder.final_features(x));
  for (const Tensor& x : gen.points) gen_feats.push_back(embedder.final_features(x));

  RngStream kmeans_rng = RngStream(embedder_seed).split(1);
  const BinningModel bins = ndb_fit(real.points, k, kmeans_rng);
  const NdbResult ndb = ndb_score(bins, gen.points, alpha);
  const std::vector<double> profile = diversity_profile(gen.points, embedder);

  MetricsReport rep;
  rep.variant = "external";
  rep.fid = frechet_distance(real_feats, gen_feats);
  rep.ndb = ndb.ndb;
  rep.jsd = ndb.jsd;
  rep.diversity_per_layer = profile;
  for (double v : profile) rep.diversity_total += v;
  rep.sample_count = gen.points.size();
  std::cout << rep.to_json().dump(2) << "\n";
  return kExitOk;
}

// ---- simulate-prop1 -----------------------------------------------------------

inline int cmd_simulate_prop1(std::size_t n, double rho, std::size_t count, std::uint64_t seed,
                              const std::string& out_path) {
  RngStream rng(seed);
  const Prop1Report report = check_proposition(n, rho, count, rng);

  std::string lines;
  for (const Prop1Record& rec : report.records) {
    ordered_json doc;
    doc["rates"] = rec.rates;
    if (std::isfinite(rec.threshold)) {
      doc["H"] = rec.threshold;
      doc["t_h"] = rec.t_h;
      doc["t_d"] = rec.t_d;
    } else {
      doc["H"] = nullptr;
      doc["t_h"] = nullptr;
      doc["t_d"] = nullptr;
    }
    doc["premise_met"] = rec.premise_met;
    lines += doc.dump() + "\n";
  }
  std::cout << lines;
  if (!out_path.empty()) write_text_file(out_path, lines);
  if (report.checked > 0 && report.violations > 0) {
    std::cerr << "warning: " << report.violations << "/" << report.checked
              << " premise-met configs violated the stop-time ordering\n";
    return kExitRuntime;
  }
  if (report.checked == 0)
    std::cerr << "note: premise not satisfied (dominance factor < 10); nothing asserted\n";
  return kExitOk;
}

// ---- sweep-ere ----------------------------------------------------------------

inline std::string lambda_dir_name(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "lambda-%.3f", lambda);
  return buf;
}

inline int cmd_sweep(const ExperimentConfig& cfg, const fs::path& out_dir, std::size_t layer,
                     const std::vector<double>& lambdas) {
  fs::create_directories(out_dir);
  const SweepResult sweep = sweep_ere(cfg, layer, lambdas);

  ordered_json manifest = make_manifest("sweep-ere", cfg);
  manifest["layer"] = layer;
  manifest["lambdas"] = lambdas;

  const std::size_t embed_layers = FeatureEmbedder::fixed_random(2, cfg.metrics.embedder_seed)
                                       .layer_count();
  std::string csv = "lambda,b,saturated";
  for (const char* name : {"fid", "ndb", "jsd", "diversity_total", "coverage"})
    csv += std::string(",median_") + name;
  for (std::size_t l = 1; l <= embed_layers; ++l) csv += ",median_diversity_l" + std::to_string(l);
  csv += "\n";

  ordered_json sweep_doc;
  sweep_doc["layer"] = layer;
  sweep_doc["bound_median"] = sweep.bound_median;
  ordered_json bound_list = ordered_json::array();
  for (const BoundVector& b : sweep.bounds_per_seed) bound_list.push_back(b.b(layer));
  sweep_doc["bounds_per_seed"] = std::move(bound_list);
  sweep_doc["points"] = ordered_json::array();

  for (std::size_t li = 0; li < sweep.lambdas.size(); ++li) {
    const double lambda = sweep.lambdas[li];
    const std::string lam_dir = lambda_dir_name(lambda);
    std::vector<double> fid, ndb, jsd, div_total, coverage;
    std::vector<std::vector<double>> div_layers(embed_layers);
    ExperimentConfig point_cfg = cfg;
    {
      std::vector<double> values = cfg.resolve_ere().values();
      values[layer - 2] = lambda;
      point_cfg.ere_values = values;
      point_cfg.ere_preset_name.reset();
    }
    for (const RunOutcome& outcome : sweep.outcomes[li]) {
      const std::string dir_name = lam_dir + "/" + run_dir_name(outcome.seed);
      write_run_outputs(out_dir / lam_dir / run_dir_name(outcome.seed), point_cfg, outcome);
      const bool ok = outcome.train_result.status == RunStatus::ok;
      manifest["runs"].push_back({{"seed", outcome.seed},
                                  {"status", ok ? "ok" : "failed"},
                                  {"dir", dir_name},
                                  {"lambda", lambda}});
      if (!ok) continue;
      const MetricsReport& rep = outcome.eval->report;
      fid.push_back(rep.fid);
      ndb.push_back(static_cast<double>(rep.ndb));
      jsd.push_back(rep.jsd);
      div_total.push_back(rep.diversity_total);
      if (rep.mode_coverage) coverage.push_back(static_cast<double>(*rep.mode_coverage));
      for (std::size_t l = 0; l < embed_layers; ++l)
        div_layers[l].push_back(rep.diversity_per_layer[l]);
    }
    if (fid.empty()) {
      std::cerr << "warning: every seed failed at lambda " << lambda << "\n";
      continue;
    }
    const bool saturated = lambda < sweep.bound_median;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g,%.10g,%d", lambda, sweep.bound_median,
                  saturated ? 1 : 0);
    csv += buf;
    for (const std::vector<double>* vals : {&fid, &ndb, &jsd, &div_total, &coverage}) {
      std::snprintf(buf, sizeof(buf), ",%.10g", median(*vals));
      csv += buf;
    }
    for (std::size_t l = 0; l < embed_layers; ++l) {
      std::snprintf(buf, sizeof(buf), ",%.10g", median(div_layers[l]));
      csv += buf;
    }
    csv += "\n";

    ordered_json point;
    point["lambda"] = lambda;
    point["saturated"] = saturated;
    point["median_fid"] = median(fid);
    point["median_ndb"] = median(ndb);
    point["median_jsd"] = median(jsd);
    point["median_diversity_total"] = median(div_total);
    if (!coverage.empty()) point["median_coverage"] = median(coverage);
    ordered_json per_layer = ordered_json::array();
    for (std::size_t l = 0; l < embed_layers; ++l) per_layer.push_back(median(div_layers[l]));
    point["median_diversity_per_layer"] = std::move(per_layer);
    sweep_doc["points"].push_back(std::move(point));
  }

  write_text_file(out_dir / "sweep.csv", csv);
  write_text_file(out_dir / "sweep.json", sweep_doc.dump(2) + "\n");
  write_manifest(out_dir, manifest);
  std::cout << csv;
  return kExitOk;
}

// ---- report -------------------------------------------------------------------

inline int cmd_report(const std::string& in_dir, const std::string& out_path) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(in_dir))
    if (entry.is_regular_file() && entry.path().filename() == "report.json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DomainError("no report.json files under '" + in_dir + "'");

  std::map<std::string, VariantSummary> by_variant;
  for (const fs::path& file : files) {
    const json doc = read_json_file(file.string());
    const std::string variant = doc.value("variant", "unknown");
    VariantSummary& summary = by_variant[variant];
    summary.variant = variant;
    if (doc.value("status", "ok") != "ok") {
      ++summary.failed;
      continue;
    }
    MetricsReport rep;
    rep.fid = doc.value("fid", 0.0);
    rep.ndb = doc.value("ndb", std::size_t{0});
    rep.jsd = doc.value("jsd", 0.0);
    rep.diversity_total = doc.value("diversity_total", 0.0);
    if (doc.contains("diversity_per_layer"))
      rep.diversity_per_layer = doc["diversity_per_layer"].get<std::vector<double>>();
    if (doc.contains("mode_coverage"))
      rep.mode_coverage = doc["mode_coverage"].get<std::size_t>();
    add_report_to_summary(summary, rep);
  }

  std::vector<VariantSummary> summaries;
  for (auto& [name, summary] : by_variant) summaries.push_back(std::move(summary));
  const std::string table = render_summary_table(summaries);
  std::cout << table;
  if (!out_path.empty())
    write_text_file(out_path, summary_to_json(summaries).dump(2) + "\n");
  return kExitOk;
}

// ---- entry point ----------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
  CLI::App app{"hierarchical mode-exploring regularization toolkit for conditional GANs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config_path, out_dir, real_path, gen_path, in_dir, out_path;
  std::vector<std::string> sets;
  std::vector<std::uint64_t> seeds;
  std::vector<double> lambdas;
  std::size_t k = 20, layer = 0, count = 100, n = 4;
  double alpha = 0.05, rho = 100.0;
  std::uint64_t embedder_seed = 17, sim_seed = 1;

  CLI::App* train_cmd = app.add_subcommand("train", "train one variant over the config's seeds");
  train_cmd->add_option("--config", config_path, "experiment config JSON (or manifest)")
      ->required();
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  train_cmd->add_option("--seeds", seeds, "override the config's seed list")->delimiter(',');
  train_cmd->add_option("--set", sets, "dotted-key config override, key=value");

  CLI::App* bounds_cmd =
      app.add_subcommand("bounds", "pretrain with zero targets and compute the per-layer "
                                   "ratio lower bounds");
  bounds_cmd->add_option("--config", config_path, "experiment config JSON (or manifest)")
      ->required();
  bounds_cmd->add_option("--out", out_dir, "output directory")->required();
  bounds_cmd->add_option("--seeds", seeds, "seed list; the first is used")->delimiter(',');
  bounds_cmd->add_option("--set", sets, "dotted-key config override, key=value");

  CLI::App* metrics_cmd =
      app.add_subcommand("metrics", "metric suite over external x,y,c point CSVs");
  metrics_cmd->add_option("--real", real_path, "real point CSV")->required();
  metrics_cmd->add_option("--gen", gen_path, "generated point CSV")->required();
  metrics_cmd->add_option("--k", k, "NDB bin count");
  metrics_cmd->add_option("--alpha", alpha, "two-proportion test significance");
  metrics_cmd->add_option("--embedder-seed", embedder_seed, "feature embedder seed");

  CLI::App* prop1_cmd =
      app.add_subcommand("simulate-prop1", "stopping-time simulation under exponential "
                                           "ratio decay");
  prop1_cmd->add_option("--n", n, "layer count (>= 3)");
  prop1_cmd->add_option("--rho", rho, "dominant rate factor");
  prop1_cmd->add_option("--count", count, "sampled configs");
  prop1_cmd->add_option("--seed", sim_seed, "sampling seed");
  prop1_cmd->add_option("--out", out_path, "also write the JSON lines here");

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep-ere", "sweep one layer's target over the config's seeds");
  sweep_cmd->add_option("--config", config_path, "experiment config JSON (or manifest)")
      ->required();
  sweep_cmd->add_option("--out", out_dir, "output directory")->required();
  sweep_cmd->add_option("--layer", layer, "generator layer to sweep (2..n)")->required();
  sweep_cmd->add_option("--lambdas", lambdas, "descending target values in [0,1]")
      ->required()
      ->delimiter(',');
  sweep_cmd->add_option("--seeds", seeds, "override the config's seed list")->delimiter(',');
  sweep_cmd->add_option("--set", sets, "dotted-key config override, key=value");

  CLI::App* report_cmd =
      app.add_subcommand("report", "aggregate run directories into per-variant tables");
  report_cmd->add_option("--in", in_dir, "directory scanned recursively for report.json")
      ->required();
  report_cmd->add_option("--out", out_path, "also write a summary JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (train_cmd->parsed() || bounds_cmd->parsed() || sweep_cmd->parsed()) {
      ExperimentConfig cfg = load_config_with_overrides(config_path, sets);
      if (!seeds.empty()) cfg.seeds = seeds;
      if (train_cmd->parsed()) return cmd_train(cfg, out_dir);
      if (bounds_cmd->parsed()) return cmd_bounds(cfg, out_dir);
      return cmd_sweep(cfg, out_dir, layer, lambdas);
    }
    if (metrics_cmd->parsed()) return cmd_metrics(real_path, gen_path, k, alpha, embedder_seed);
    if (prop1_cmd->parsed()) return cmd_simulate_prop1(n, rho, count, sim_seed, out_path);
    if (report_cmd->parsed()) return cmd_report(in_dir, out_path);
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace hmgan::cli
