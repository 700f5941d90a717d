#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hmgan/config.hpp"
#include "hmgan/train.hpp"

using namespace hmgan;

namespace {

ExperimentConfig tiny_config(const std::string& variant) {
  json doc = json::parse(R"({
    "dataset": {"conditions": 2, "modes_per_condition": 4, "samples": 256},
    "stack": {"z_width": 2, "gen_hidden": [8, 8, 8], "disc_hidden": [8, 8]},
    "batch_size": 16,
    "steps": 60,
    "metrics": {"k": 8, "eval_samples": 128}
  })");
  doc["variant"] = variant;
  return validate_config_or_throw(doc);
}

bool stacks_identical(const LayerStack& a, const LayerStack& b) {
  if (a.layer_count() != b.layer_count()) return false;
  for (std::size_t l = 1; l <= a.layer_count(); ++l)
    if (!(a.weight(l) == b.weight(l)) || !(a.bias(l) == b.bias(l))) return false;
  return true;
}

}  // namespace

TEST_CASE("training is bitwise deterministic in (config, seed)") {
  const ExperimentConfig cfg = tiny_config("hmgan");
  const TrainResult a = train(cfg, 5);
  const TrainResult b = train(cfg, 5);
  REQUIRE(a.status == RunStatus::ok);
  REQUIRE(stacks_identical(a.generator, b.generator));
  REQUIRE(stacks_identical(a.discriminator, b.discriminator));
  REQUIRE(a.ratio_log.size() == b.ratio_log.size());
  for (std::size_t i = 0; i < a.ratio_log.size(); ++i)
    REQUIRE(a.ratio_log[i].mean_ratio == b.ratio_log[i].mean_ratio);

  const TrainResult c = train(cfg, 6);
  REQUIRE_FALSE(stacks_identical(a.generator, c.generator));
}

TEST_CASE("beta = 0 reproduces the baseline trajectory exactly") {
  ExperimentConfig hm = tiny_config("hmgan");
  hm.beta = 0.0;
  const ExperimentConfig base = tiny_config("baseline");
  const TrainResult a = train(hm, 11);
  const TrainResult b = train(base, 11);
  REQUIRE(stacks_identical(a.generator, b.generator));
  REQUIRE(stacks_identical(a.discriminator, b.discriminator));
}

TEST_CASE("discriminator updates are variant-independent at step 0") {
  ExperimentConfig one_step = tiny_config("baseline");
  one_step.steps = 1;
  const TrainResult base = train(one_step, 3);
  ExperimentConfig hm = tiny_config("hmgan");
  hm.steps = 1;
  const TrainResult reg = train(hm, 3);
  ExperimentConfig ms = tiny_config("msgan");
  ms.steps = 1;
  const TrainResult msr = train(ms, 3);
  REQUIRE(stacks_identical(base.discriminator, reg.discriminator));
  REQUIRE(stacks_identical(base.discriminator, msr.discriminator));
}

TEST_CASE("logged ratios are positive and finite") {
  for (const char* variant : {"baseline", "msgan", "hmgan"}) {
    const TrainResult r = train(tiny_config(variant), 7);
    REQUIRE(r.status == RunStatus::ok);
    REQUIRE_FALSE(r.ratio_log.empty());
    for (const RatioLogEntry& e : r.ratio_log) {
      REQUIRE(std::isfinite(e.mean_ratio));
      REQUIRE(e.mean_ratio > 0.0);
      REQUIRE(e.layer >= 2);
      REQUIRE(e.layer <= 4);
    }
  }
}

TEST_CASE("mode coverage") {
  const SyntheticDataset data = make_ring_dataset(2, 4, 0.6, 0.05, 1024, RngStream(1));
  // the real samples cover every mode at this size
  REQUIRE(mode_coverage(data.points, data.labels, data) == data.modes.size());

  // all samples at one center cover exactly that mode
  const ModeCenter& m0 = data.modes.front();
  std::vector<Tensor> at_center(64, Tensor::vector({m0.x, m0.y}));
  std::vector<std::size_t> labels(64, m0.condition);
  REQUIRE(mode_coverage(at_center, labels, data) == 1);

  // coverage is monotone non-increasing in the required count
  std::size_t prev = data.modes.size() + 1;
  for (std::size_t tau : {1, 5, 20, 200}) {
    const std::size_t c = mode_coverage(data.points, data.labels, data, 3.0, tau);
    REQUIRE(c <= prev);
    prev = c;
  }

  REQUIRE_THROWS_AS(mode_coverage({}, {}, data), DomainError);
}

TEST_CASE("degenerate generator evaluates to zero diversity and unit coverage") {
  const ExperimentConfig cfg = tiny_config("baseline");
  TrainResult state = train(cfg, 1);
  // force the generator constant at a mode center: zero weights everywhere,
  // final bias at atanh(center)
  const SyntheticDataset data =
      make_ring_dataset(cfg.dataset.conditions, cfg.dataset.modes_per_condition,
                        cfg.dataset.radius, cfg.dataset.sigma, cfg.dataset.samples,
                        RngStream(cfg.dataset.seed));
  const ModeCenter& m0 = data.modes.front();
  for (std::size_t l = 1; l <= state.generator.layer_count(); ++l) {
    for (double& w : state.generator.weight(l).data()) w = 0.0;
    for (double& b : state.generator.bias(l).data()) b = 0.0;
  }
  state.generator.bias(state.generator.layer_count()) =
      Tensor::vector({std::atanh(m0.x), std::atanh(m0.y)});

  const EvalResult eval = evaluate_run(state, cfg, 1);
  REQUIRE(eval.report.diversity_total == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(eval.report.mode_coverage.has_value());
  REQUIRE(*eval.report.mode_coverage == 1);
}

TEST_CASE("evaluation reports satisfy the typed invariants") {
  const ExperimentConfig cfg = tiny_config("hmgan");
  const std::vector<RunOutcome> outcomes = run_seeds(cfg, {1, 2});
  for (const RunOutcome& o : outcomes) {
    REQUIRE(o.train_result.status == RunStatus::ok);
    REQUIRE(o.eval.has_value());
    const MetricsReport& rep = o.eval->report;
    REQUIRE(rep.ndb <= cfg.metrics.k);
    REQUIRE(rep.jsd >= 0.0);
    REQUIRE(rep.jsd <= std::log(2.0) + 1e-12);
    REQUIRE(rep.fid >= -1e-8);
    REQUIRE(rep.diversity_total >= 0.0);
    REQUIRE(rep.diversity_per_layer.size() == 3);
    REQUIRE(rep.sample_count == cfg.metrics.eval_samples);
    REQUIRE(rep.mode_coverage.has_value());
    REQUIRE(*rep.mode_coverage <= 8);
  }
  // determinism of the full pipeline
  const std::vector<RunOutcome> again = run_seeds(cfg, {1});
  REQUIRE(again[0].eval->report.to_json().dump() == outcomes[0].eval->report.to_json().dump());
}

TEST_CASE("two-step bounds") {
  ExperimentConfig cfg = tiny_config("baseline");
  cfg.steps = 30;
  cfg.bounds.max_samples = 64;
  const BoundVector a = two_step_bounds(cfg, 2);
  const BoundVector b = two_step_bounds(cfg, 2);
  REQUIRE(a.entry_count() == cfg.generator_layer_count() - 1);
  REQUIRE(a.m == 64);
  for (std::size_t layer = 2; layer <= cfg.generator_layer_count(); ++layer) {
    REQUIRE(a.b(layer) > 0.0);
    REQUIRE(std::isfinite(a.b(layer)));
    REQUIRE(a.b(layer) == b.b(layer));
  }
}

TEST_CASE("sweep trains one run per lambda per seed") {
  ExperimentConfig cfg = tiny_config("hmgan");
  cfg.steps = 20;
  cfg.seeds = {1, 2};
  cfg.bounds.max_samples = 32;
  const SweepResult sweep = sweep_ere(cfg, 3, {1.0, 0.0});
  REQUIRE(sweep.lambdas == std::vector<double>{1.0, 0.0});
  REQUIRE(sweep.outcomes.size() == 2);
  REQUIRE(sweep.outcomes[0].size() == 2);
  REQUIRE(sweep.bounds_per_seed.size() == 2);
  REQUIRE(std::isfinite(sweep.bound_median));

  // identical lambda lists give identical reports (same seeds)
  const SweepResult rep = sweep_ere(cfg, 3, {0.5, 0.5});
  REQUIRE(rep.outcomes[0][0].eval->report.to_json().dump() ==
          rep.outcomes[1][0].eval->report.to_json().dump());

  REQUIRE_THROWS_AS(sweep_ere(cfg, 1, {1.0}), DomainError);
  REQUIRE_THROWS_AS(sweep_ere(cfg, 3, {0.0, 1.0}), DomainError);  // not descending
  ExperimentConfig bad = tiny_config("baseline");
  REQUIRE_THROWS_AS(sweep_ere(bad, 3, {1.0}), DomainError);
}
