#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hmgan/config.hpp"
#include "hmgan/dataset.hpp"
#include "hmgan/ere_bounds.hpp"
#include "hmgan/metrics.hpp"
#include "hmgan/regularizers.hpp"
#include "hmgan/stack.hpp"

namespace hmgan {

// Stream ids split off a run's root RngStream. Evaluation and bounds noise
// are decoupled from the training stream so adding eval samples never
// perturbs a trajectory.
namespace stream {
inline constexpr std::uint64_t kGenInit = 1;
inline constexpr std::uint64_t kDiscInit = 2;
inline constexpr std::uint64_t kTraining = 3;
inline constexpr std::uint64_t kEvalNoise = 4;
inline constexpr std::uint64_t kBoundsNoise = 5;
}  // namespace stream

/// Plain SGD with momentum; velocities persist across steps.
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum, const std::vector<Tensor*>& params)
      : lr_(learning_rate), momentum_(momentum) {
    for (const Tensor* p : params) velocity_.push_back(Tensor::zeros(p->shape()));
  }

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& v = velocity_[i];
      Tensor& p = *params[i];
      const Tensor& g = grads[i];
      for (std::size_t k = 0; k < p.size(); ++k) {
        v[k] = momentum_ * v[k] - lr_ * g[k];
        p[k] += v[k];
      }
    }
  }

 private:
  double lr_;
  double momentum_;
  std::vector<Tensor> velocity_;
};

struct RatioLogEntry {
  std::size_t step = 0;
  std::size_t layer = 0;  // 2..n
  double mean_ratio = 0.0;
};

enum class RunStatus : std::uint8_t { ok, failed };

struct TrainResult {
  LayerStack generator;
  LayerStack discriminator;
  RunStatus status = RunStatus::ok;
  std::size_t failed_step = 0;
  std::vector<RatioLogEntry> ratio_log;
};

namespace detail {

inline std::vector<Tensor*> stack_params(LayerStack& s) {
  std::vector<Tensor*> out;
  for (std::size_t l = 1; l <= s.layer_count(); ++l) {
    out.push_back(&s.weight(l));
    out.push_back(&s.bias(l));
  }
  return out;
}

inline std::vector<Tensor> collect_grads(const Gradients& grads, const StackParamNodes& nodes,
                                         const LayerStack& s) {
  std::vector<Tensor> out;
  for (std::size_t l = 1; l <= s.layer_count(); ++l) {
    out.push_back(grads.at_or_zeros(nodes.weights[l - 1], s.weight(l).shape()));
    out.push_back(grads.at_or_zeros(nodes.biases[l - 1], s.bias(l).shape()));
  }
  return out;
}

inline bool grads_finite(const std::vector<Tensor>& grads) {
  for (const Tensor& g : grads)
    if (!g.all_finite()) return false;
  return true;
}

/// Cyclic same-condition pairing: within each condition's batch positions
/// (in order), element j pairs with the next one, wrapping around. Groups of
/// one have no partner and contribute no pair.
inline std::vector<std::pair<std::size_t, std::size_t>> cyclic_pairs(
    const std::vector<std::size_t>& conditions) {
  std::size_t max_c = 0;
  for (std::size_t c : conditions) max_c = std::max(max_c, c);
  std::vector<std::vector<std::size_t>> groups(max_c + 1);
  for (std::size_t i = 0; i < conditions.size(); ++i) groups[conditions[i]].push_back(i);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& g : groups) {
    if (g.size() < 2) continue;
    for (std::size_t j = 0; j < g.size(); ++j) pairs.emplace_back(g[j], g[(j + 1) % g.size()]);
  }
  return pairs;
}

inline Tensor draw_latent(RngStream& rng, std::size_t width) {
  std::vector<double> z(width);
  for (double& v : z) v = rng.uniform(-1.0, 1.0);
  return Tensor::vector(std::move(z));
}

}  // namespace detail

/// Alternating non-saturating GAN training (1 discriminator step, then 1
/// generator step per iteration). The generator loss adds the beta-weighted
/// variant regularizer over cyclic same-condition pairs; discriminator
/// updates are independent of the variant. Mean layer ratios over the step's
/// pairs are logged every 50 steps. Deterministic given (config, seed).
inline TrainResult train(const ExperimentConfig& cfg, std::uint64_t seed) {
  const SyntheticDataset data =
      make_ring_dataset(cfg.dataset.conditions, cfg.dataset.modes_per_condition,
                        cfg.dataset.radius, cfg.dataset.sigma, cfg.dataset.samples,
                        RngStream(cfg.dataset.seed));
  const std::size_t cond_width = cfg.dataset.conditions;
  const std::size_t sample_width = 2;

  RngStream root(seed);
  RngStream gen_init = root.split(stream::kGenInit);
  RngStream disc_init = root.split(stream::kDiscInit);
  RngStream rng = root.split(stream::kTraining);

  TrainResult result{
      make_generator(cfg.stack.z_width + cond_width, cfg.stack.gen_hidden, sample_width,
                     cfg.stack.hidden_activation),
      make_discriminator(sample_width + cond_width, cfg.stack.disc_hidden,
                         cfg.stack.hidden_activation),
      RunStatus::ok,
      0,
      {}};
  result.generator.init_params(gen_init);
  result.discriminator.init_params(disc_init);

  const std::vector<Tensor*> gen_params = detail::stack_params(result.generator);
  const std::vector<Tensor*> disc_params = detail::stack_params(result.discriminator);
  SgdMomentum gen_opt(cfg.learning_rate, cfg.momentum, gen_params);
  SgdMomentum disc_opt(cfg.learning_rate, cfg.momentum, disc_params);

  const RegVariant variant = cfg.reg_variant();
  const std::optional<EREVector> ere =
      variant == RegVariant::hierarchical ? std::optional<EREVector>(cfg.resolve_ere())
                                          : std::nullopt;
  RegularizerConfig reg_cfg;
  reg_cfg.beta = cfg.beta;
  reg_cfg.variant = variant;

  const std::size_t batch = cfg.batch_size;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  const std::size_t n_layers = result.generator.layer_count();

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    // ---- discriminator step -------------------------------------------
    {
      std::vector<std::size_t> rows(batch);
      for (std::size_t& r : rows) r = rng.uniform_int(data.size());
      std::vector<Tensor> latents(batch);
      for (Tensor& z : latents) z = detail::draw_latent(rng, cfg.stack.z_width);

      ADGraph g;
      const StackParamNodes dp = result.discriminator.lift(g);
      NodeId loss_real = 0, loss_fake = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const Condition c = data.condition(rows[b]);
        // real sample under its condition
        NodeId real_in = g.leaf(concat_condition(data.points[rows[b]], c));
        NodeId logit_r = g.sum(
            result.discriminator.forward_with_taps(g, dp, real_in).taps.back());
        NodeId term_r = g.softplus(g.scale(logit_r, -1.0));
        // fake sample, generator frozen (graph-free forward)
        const Tensor fake = result.generator.forward(concat_condition(latents[b], c));
        NodeId fake_in = g.leaf(concat_condition(fake, c));
        NodeId logit_f = g.sum(
            result.discriminator.forward_with_taps(g, dp, fake_in).taps.back());
        NodeId term_f = g.softplus(logit_f);
        loss_real = b == 0 ? term_r : g.add(loss_real, term_r);
        loss_fake = b == 0 ? term_f : g.add(loss_fake, term_f);
      }
      NodeId loss = g.add(g.scale(loss_real, inv_batch), g.scale(loss_fake, inv_batch));
      if (!g.value(loss).all_finite()) {
        result.status = RunStatus::failed;
        result.failed_step = step;
        break;
      }
      const Gradients grads = g.backward(loss);
      std::vector<Tensor> dg = detail::collect_grads(grads, dp, result.discriminator);
      if (!detail::grads_finite(dg)) {
        result.status = RunStatus::failed;
        result.failed_step = step;
        break;
      }
      disc_opt.step(disc_params, dg);
    }

    // ---- generator step ------------------------------------------------
    {
      std::vector<std::size_t> rows(batch);
      for (std::size_t& r : rows) r = rng.uniform_int(data.size());
      std::vector<Tensor> latents(batch);
      for (Tensor& z : latents) z = detail::draw_latent(rng, cfg.stack.z_width);
      std::vector<std::size_t> conds(batch);
      for (std::size_t b = 0; b < batch; ++b) conds[b] = data.labels[rows[b]];

      ADGraph g;
      const StackParamNodes gp = result.generator.lift(g);
      const StackParamNodes dp = result.discriminator.lift(g);
      std::vector<ForwardTrace> traces;
      traces.reserve(batch);
      NodeId adv = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const Condition c = Condition::one_hot(conds[b], cond_width);
        NodeId in = g.leaf(concat_condition(latents[b], c));
        ForwardTrace trace = result.generator.forward_with_taps(g, gp, in);
        NodeId disc_in = g.concat(trace.taps.back(), g.leaf(c.encoding));
        NodeId logit = g.sum(
            result.discriminator.forward_with_taps(g, dp, disc_in).taps.back());
        NodeId term = g.softplus(g.scale(logit, -1.0));
        adv = b == 0 ? term : g.add(adv, term);
        traces.push_back(std::move(trace));
      }
      adv = g.scale(adv, inv_batch);

      const auto pairs = detail::cyclic_pairs(conds);
      NodeId loss = adv;
      if (variant != RegVariant::none && !pairs.empty()) {
        NodeId reg = 0;
        bool first = true;
        for (const auto& [u, v] : pairs) {
          NodeId pair_loss =
              variant == RegVariant::hierarchical
                  ? hierarchical_loss(g, traces[u], traces[v], *ere, reg_cfg.epsilon)
                  : msgan_loss(g, traces[u], traces[v], cfg.numerator(), reg_cfg.epsilon);
          reg = first ? pair_loss : g.add(reg, pair_loss);
          first = false;
        }
        reg = g.scale(reg, 1.0 / static_cast<double>(pairs.size()));
        loss = combined_objective(g, adv, reg, reg_cfg);
      }

      if (!g.value(loss).all_finite()) {
        result.status = RunStatus::failed;
        result.failed_step = step;
        break;
      }
      const Gradients grads = g.backward(loss);
      std::vector<Tensor> gg = detail::collect_grads(grads, gp, result.generator);
      if (!detail::grads_finite(gg)) {
        result.status = RunStatus::failed;
        result.failed_step = step;
        break;
      }
      gen_opt.step(gen_params, gg);

      // ratio trajectory, computed from tap values outside the graph so all
      // variants log the same quantity
      if (step % 50 == 0 && !pairs.empty()) {
        for (std::size_t layer = 2; layer <= n_layers; ++layer) {
          double acc = 0.0;
          for (const auto& [u, v] : pairs) {
            const double d_prev = raw::l1_distance(g.value(traces[u].tap(layer - 1)),
                                                   g.value(traces[v].tap(layer - 1)));
            const double d_cur = raw::l1_distance(g.value(traces[u].tap(layer)),
                                                  g.value(traces[v].tap(layer)));
            acc += d_prev / (d_cur + reg_cfg.epsilon);
          }
          result.ratio_log.push_back({step, layer, acc / static_cast<double>(pairs.size())});
        }
      }
    }

    if (!result.generator.params_finite() || !result.discriminator.params_finite()) {
      result.status = RunStatus::failed;
      result.failed_step = step;
      break;
    }
  }
  return result;
}

/// Covered = at least min_count same-condition samples within
/// radius_mult * sigma of the mode center.
inline std::size_t mode_coverage(const std::vector<Tensor>& points,
                                 const std::vector<std::size_t>& labels,
                                 const SyntheticDataset& data, double radius_mult = 3.0,
                                 std::size_t min_count = 5) {
  if (points.empty()) throw DomainError("mode_coverage needs a non-empty batch");
  const double r2 = radius_mult * data.spec.sigma * radius_mult * data.spec.sigma;
  std::size_t covered = 0;
  for (const ModeCenter& mode : data.modes) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (labels[i] != mode.condition) continue;
      const double dx = points[i][0] - mode.x;
      const double dy = points[i][1] - mode.y;
      if (dx * dx + dy * dy <= r2) ++hits;
    }
    if (hits >= min_count) ++covered;
  }
  return covered;
}

struct EvalResult {
  MetricsReport report;
  std::vector<Tensor> points;        // generated samples
  std::vector<std::size_t> labels;   // their conditions
};

/// Generates a fixed evaluation batch with fresh noise and the training
/// conditions' empirical distribution, then fills the metric suite plus mode
/// coverage. Bins and the embedder depend only on the config, so reports are
/// comparable across seeds and variants.
inline EvalResult evaluate_run(const TrainResult& state, const ExperimentConfig& cfg,
                               std::uint64_t seed) {
  const SyntheticDataset data =
      make_ring_dataset(cfg.dataset.conditions, cfg.dataset.modes_per_condition,
                        cfg.dataset.radius, cfg.dataset.sigma, cfg.dataset.samples,
                        RngStream(cfg.dataset.seed));
  RngStream rng = RngStream(seed).split(stream::kEvalNoise);

  EvalResult out;
  out.points.reserve(cfg.metrics.eval_samples);
  out.labels.reserve(cfg.metrics.eval_samples);
  for (std::size_t i = 0; i < cfg.metrics.eval_samples; ++i) {
    const std::size_t row = rng.uniform_int(data.size());
    const Condition c = data.condition(row);
    const Tensor z = detail::draw_latent(rng, cfg.stack.z_width);
    out.points.push_back(state.generator.forward(concat_condition(z, c)));
    out.labels.push_back(data.labels[row]);
  }

  const FeatureEmbedder embedder = FeatureEmbedder::fixed_random(2, cfg.metrics.embedder_seed);
  std::vector<Tensor> real_feats, gen_feats;
  real_feats.reserve(data.size());
  gen_feats.reserve(out.points.size());
  for (const Tensor& x : data.points) real_feats.push_back(embedder.final_features(x));
  for (const Tensor& x : out.points) gen_feats.push_back(embedder.final_features(x));

  RngStream kmeans_rng = RngStream(cfg.metrics.embedder_seed).split(1);
  const BinningModel bins = ndb_fit(data.points, cfg.metrics.k, kmeans_rng);
  const NdbResult ndb = ndb_score(bins, out.points, cfg.metrics.alpha);

  const std::vector<double> profile = diversity_profile(out.points, embedder);
  double div_total = 0.0;
  for (double v : profile) div_total += v;

  MetricsReport& rep = out.report;
  rep.seed = seed;
  rep.variant = cfg.variant;
  rep.fid = frechet_distance(real_feats, gen_feats);
  rep.ndb = ndb.ndb;
  rep.jsd = ndb.jsd;
  rep.diversity_total = div_total;
  rep.diversity_per_layer = profile;
  rep.sample_count = out.points.size();
  rep.mode_coverage = mode_coverage(out.points, out.labels, data);
  rep.config_hash = config_hash(cfg.to_json());
  return out;
}

/// Pretrains with every target at zero, then feeds the whole dataset through
/// the generator (fresh noise per datum, the datum's condition) and takes
/// the per-layer minimum ratios.
inline BoundVector two_step_bounds(const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentConfig pre = cfg;
  pre.variant = "hmgan";
  pre.ere_preset_name = "HMGAN1";
  pre.ere_values.reset();
  const TrainResult state = train(pre, seed);
  if (state.status != RunStatus::ok)
    throw Error("pretraining diverged at step " + std::to_string(state.failed_step));

  const SyntheticDataset data =
      make_ring_dataset(cfg.dataset.conditions, cfg.dataset.modes_per_condition,
                        cfg.dataset.radius, cfg.dataset.sigma, cfg.dataset.samples,
                        RngStream(cfg.dataset.seed));
  RngStream rng = RngStream(seed).split(stream::kBoundsNoise);
  std::vector<Tensor> inputs;
  inputs.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    inputs.push_back(
        concat_condition(detail::draw_latent(rng, cfg.stack.z_width), data.condition(i)));
  return lower_bounds(state.generator, inputs, cfg.bounds.max_samples);
}

struct RunOutcome {
  std::uint64_t seed = 0;
  TrainResult train_result;
  std::optional<EvalResult> eval;  // absent when the run failed
};

/// Trains and evaluates each seed as an independent trial (parallel across
/// hardware threads); results are merged in seed order.
inline std::vector<RunOutcome> run_seeds(const ExperimentConfig& cfg,
                                         const std::vector<std::uint64_t>& seeds) {
  const auto one_run = [&cfg](std::uint64_t seed) {
    TrainResult tr = train(cfg, seed);
    std::optional<EvalResult> eval;
    if (tr.status == RunStatus::ok) eval = evaluate_run(tr, cfg, seed);
    return RunOutcome{seed, std::move(tr), std::move(eval)};
  };
  const std::size_t workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  std::vector<RunOutcome> out;
  out.reserve(seeds.size());
  std::size_t next = 0;
  while (next < seeds.size()) {
    const std::size_t wave = std::min(workers, seeds.size() - next);
    std::vector<std::future<RunOutcome>> futures;
    futures.reserve(wave);
    for (std::size_t i = 0; i < wave; ++i)
      futures.push_back(std::async(std::launch::async, one_run, seeds[next + i]));
    for (std::size_t i = 0; i < wave; ++i) out.push_back(futures[i].get());
    next += wave;
  }
  return out;
}

struct SweepResult {
  std::size_t layer = 0;             // generator layer i being swept
  std::vector<double> lambdas;       // descending
  std::vector<BoundVector> bounds_per_seed;
  double bound_median = 0.0;         // median b^(i) over seeds
  std::vector<std::vector<RunOutcome>> outcomes;  // [lambda][seed]
};

/// Trains once per lambda value at the swept layer (other layers keep the
/// config's targets) and reports diversity per layer, marking the
/// lambda < b^(i) saturation region from the two-step bounds.
inline SweepResult sweep_ere(const ExperimentConfig& cfg, std::size_t layer,
                             const std::vector<double>& lambdas) {
  if (cfg.variant != "hmgan") throw DomainError("sweep_ere requires variant hmgan");
  const std::size_t n = cfg.generator_layer_count();
  if (layer < 2 || layer > n)
    throw DomainError("sweep layer " + std::to_string(layer) + " out of range 2.." +
                      std::to_string(n));
  if (lambdas.empty()) throw DomainError("sweep needs >= 1 lambda value");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 0.0 && lambdas[i] <= 1.0))
      throw DomainError("sweep lambda " + std::to_string(lambdas[i]) + " outside [0, 1]");
    if (i > 0 && lambdas[i] > lambdas[i - 1])
      throw DomainError("sweep lambdas must be sorted descending");
  }

  SweepResult result;
  result.layer = layer;
  result.lambdas = lambdas;

  for (std::uint64_t seed : cfg.seeds)
    result.bounds_per_seed.push_back(two_step_bounds(cfg, seed));
  std::vector<double> bs;
  for (const BoundVector& b : result.bounds_per_seed) bs.push_back(b.b(layer));
  std::sort(bs.begin(), bs.end());
  result.bound_median = bs.size() % 2 == 1
                            ? bs[bs.size() / 2]
                            : 0.5 * (bs[bs.size() / 2 - 1] + bs[bs.size() / 2]);

  const EREVector base = cfg.resolve_ere();
  for (double lambda : lambdas) {
    ExperimentConfig point = cfg;
    std::vector<double> values = base.values();
    values[layer - 2] = lambda;
    point.ere_values = std::move(values);
    point.ere_preset_name.reset();
    result.outcomes.push_back(run_seeds(point, point.seeds));
  }
  return result;
}

}  // namespace hmgan
