#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hmgan/rng.hpp"
#include "hmgan/stack.hpp"
#include "hmgan/tensor.hpp"

namespace hmgan {

/// Frozen feature extractor: a fixed stack whose per-layer outputs play the
/// role of perceptual features, with non-negative per-channel weights.
/// Spatial extents are 1 in this vector realization.
class FeatureEmbedder {
 public:
  FeatureEmbedder(LayerStack stack, std::vector<Tensor> channel_weights)
      : stack_(std::move(stack)), weights_(std::move(channel_weights)) {
    if (weights_.size() != stack_.layer_count())
      throw DomainError("one channel-weight vector per embedder layer required");
    for (std::size_t l = 1; l <= stack_.layer_count(); ++l) {
      if (weights_[l - 1].size() != stack_.tap_width(l))
        throw DomainError("channel weights of layer " + std::to_string(l) + " have wrong width");
      for (double w : weights_[l - 1].data())
        if (!(w >= 0.0)) throw DomainError("channel weights must be >= 0");
    }
  }

  /// The default evaluator: 3 tanh layers of width 16, unit channel weights,
  /// parameters drawn once from the seed and frozen.
  static FeatureEmbedder fixed_random(std::size_t input_width, std::uint64_t seed,
                                      std::vector<std::size_t> widths = {16, 16, 16}) {
    std::vector<LayerSpec> specs;
    std::size_t prev = input_width;
    for (std::size_t w : widths) {
      specs.push_back({prev, w, Activation::tanh});
      prev = w;
    }
    LayerStack stack{std::move(specs)};
    RngStream rng(seed);
    stack.init_params(rng);
    std::vector<Tensor> weights;
    for (std::size_t l = 1; l <= stack.layer_count(); ++l)
      weights.push_back(Tensor::ones({stack.tap_width(l)}));
    return FeatureEmbedder(std::move(stack), std::move(weights));
  }

  std::size_t layer_count() const { return stack_.layer_count(); }
  std::size_t input_width() const { return stack_.input_width(); }
  const Tensor& channel_weights(std::size_t layer) const { return weights_.at(layer - 1); }

  /// Per-layer features of one sample.
  std::vector<Tensor> features(const Tensor& x) const { return stack_.forward_taps(x); }

  /// Features of the final layer only (the scalar-summary space used for
  /// distribution distances).
  Tensor final_features(const Tensor& x) const { return stack_.forward_taps(x).back(); }

 private:
  LayerStack stack_;
  std::vector<Tensor> weights_;
};

namespace detail {

inline double weighted_sq_l2(const Tensor& w, const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = w[k] * (a[k] - b[k]);
    acc += d * d;
  }
  return acc;
}

}  // namespace detail

/// Perceptual distance: sum over embedder layers of the channel-weighted
/// squared L2 difference of the layer features (spatial extents are 1).
inline double lpips_distance(const Tensor& x1, const Tensor& x2, const FeatureEmbedder& embedder) {
  if (!x1.same_shape(x2))
    throw ShapeError("lpips_distance", shape_str(x1.shape()), shape_str(x2.shape()));
  const std::vector<Tensor> f1 = embedder.features(x1);
  const std::vector<Tensor> f2 = embedder.features(x2);
  double acc = 0.0;
  for (std::size_t l = 1; l <= embedder.layer_count(); ++l)
    acc += detail::weighted_sq_l2(embedder.channel_weights(l), f1[l - 1], f2[l - 1]);
  return acc;
}

/// Per-layer diversity of a batch: the raw sum over ordered pairs (j, k),
/// j != k, of the layer-l distance term. One code path computes every layer,
/// so the total is exactly the sum of the per-layer values.
inline std::vector<double> diversity_profile(const std::vector<Tensor>& batch,
                                             const FeatureEmbedder& embedder) {
  if (batch.size() < 2) throw DomainError("diversity needs a batch of >= 2 samples");
  const std::size_t L = embedder.layer_count();
  std::vector<std::vector<Tensor>> feats;
  feats.reserve(batch.size());
  for (const Tensor& x : batch) feats.push_back(embedder.features(x));
  std::vector<double> per_layer(L, 0.0);
  for (std::size_t j = 0; j < batch.size(); ++j)
    for (std::size_t k = j + 1; k < batch.size(); ++k)
      for (std::size_t l = 0; l < L; ++l)
        per_layer[l] += 2.0 * detail::weighted_sq_l2(embedder.channel_weights(l + 1),
                                                     feats[j][l], feats[k][l]);
  return per_layer;
}

inline double layer_diversity(const std::vector<Tensor>& batch, std::size_t layer,
                              const FeatureEmbedder& embedder) {
  if (layer < 1 || layer > embedder.layer_count())
    throw DomainError("diversity layer " + std::to_string(layer) + " out of range");
  return diversity_profile(batch, embedder)[layer - 1];
}

inline double total_diversity(const std::vector<Tensor>& batch, const FeatureEmbedder& embedder) {
  const std::vector<double> profile = diversity_profile(batch, embedder);
  double acc = 0.0;
  for (double v : profile) acc += v;
  return acc;
}

/// Frechet distance between Gaussians fitted to two feature sets:
/// |mu1-mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2}), covariances with 1/(N-1).
/// The cross term uses the symmetric eigendecomposition of
/// S1^{1/2} S2 S1^{1/2}; eigenvalues below -1e-8 are an error, small
/// negatives are clamped to zero.
inline double frechet_distance(const std::vector<Tensor>& real_feats,
                               const std::vector<Tensor>& gen_feats) {
  if (real_feats.size() < 2 || gen_feats.size() < 2)
    throw DomainError("frechet_distance needs >= 2 samples per side");
  const std::size_t dim = real_feats.front().size();
  if (dim < 1) throw DomainError("frechet_distance needs feature width >= 1");
  for (const auto& f : real_feats)
    if (f.size() != dim) throw ShapeError("frechet_distance", shape_str(f.shape()),
                                          shape_str(Shape{dim}));
  for (const auto& f : gen_feats)
    if (f.size() != dim) throw ShapeError("frechet_distance", shape_str(f.shape()),
                                          shape_str(Shape{dim}));

  const auto to_eigen = [dim](const std::vector<Tensor>& feats) {
    Eigen::MatrixXd X(feats.size(), dim);
    for (std::size_t r = 0; r < feats.size(); ++r)
      for (std::size_t c = 0; c < dim; ++c) X(static_cast<int>(r), static_cast<int>(c)) = feats[r][c];
    return X;
  };
  const Eigen::MatrixXd X1 = to_eigen(real_feats);
  const Eigen::MatrixXd X2 = to_eigen(gen_feats);
  const Eigen::VectorXd mu1 = X1.colwise().mean();
  const Eigen::VectorXd mu2 = X2.colwise().mean();
  const Eigen::MatrixXd C1 = (X1.rowwise() - mu1.transpose()).transpose() *
                             (X1.rowwise() - mu1.transpose()) / double(X1.rows() - 1);
  const Eigen::MatrixXd C2 = (X2.rowwise() - mu2.transpose()).transpose() *
                             (X2.rowwise() - mu2.transpose()) / double(X2.rows() - 1);

  constexpr double kEigTolerance = -1e-8;
  const auto psd_sqrt = [&](const Eigen::MatrixXd& M, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((M + M.transpose()) / 2.0);
    Eigen::VectorXd vals = eig.eigenvalues();
    for (int i = 0; i < vals.size(); ++i) {
      if (vals[i] < kEigTolerance)
        throw NumericError(std::string(what) + " is not PSD within tolerance", vals[i]);
      vals[i] = std::sqrt(std::max(0.0, vals[i]));
    }
    return Eigen::MatrixXd(eig.eigenvectors() * vals.asDiagonal() *
                           eig.eigenvectors().transpose());
  };

  const Eigen::MatrixXd sqrt1 = psd_sqrt(C1, "real covariance");
  const Eigen::MatrixXd inner = sqrt1 * C2 * sqrt1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((inner + inner.transpose()) / 2.0);
  double trace_sqrt = 0.0;
  for (int i = 0; i < eig.eigenvalues().size(); ++i) {
    const double v = eig.eigenvalues()[i];
    if (v < kEigTolerance)
      throw NumericError("cross covariance product is not PSD within tolerance", v);
    trace_sqrt += std::sqrt(std::max(0.0, v));
  }
  return (mu1 - mu2).squaredNorm() + C1.trace() + C2.trace() - 2.0 * trace_sqrt;
}

/// Jensen-Shannon divergence in natural log, with the 0 ln 0 = 0 convention.
/// Bounded by ln 2.
inline double jensen_shannon(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw DomainError("jensen_shannon length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) acc += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) acc += 0.5 * q[i] * std::log(q[i] / m);
  }
  return acc;
}

/// Two-sided normal quantile at significance alpha, solved on erfc (exact to
/// bisection tolerance, no approximation constants).
inline double two_sided_z_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must be in (0, 1)");
  double lo = 0.0, hi = 40.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid / std::sqrt(2.0)) > alpha)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// K-means binning of the real samples; bins double as distribution modes.
struct BinningModel {
  std::vector<Tensor> centroids;
  std::vector<double> real_proportions;
  std::size_t training_samples = 0;

  std::size_t bin_count() const { return centroids.size(); }

  /// Nearest centroid by squared L2; ties resolve to the lowest index.
  std::size_t assign(const Tensor& x) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids.size(); ++k) {
      const double d = raw::squared_l2(centroids[k], x);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  }
};

namespace detail {

inline double kmeans_inertia(const std::vector<Tensor>& data, const std::vector<Tensor>& centroids,
                             const std::vector<std::size_t>& assignment) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    acc += raw::squared_l2(data[i], centroids[assignment[i]]);
  return acc;
}

inline std::vector<Tensor> kmeanspp_init(const std::vector<Tensor>& data, std::size_t k,
                                         RngStream& rng) {
  std::vector<Tensor> centroids;
  centroids.push_back(data[rng.uniform_int(data.size())]);
  std::vector<double> d2(data.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Tensor& c : centroids) best = std::min(best, raw::squared_l2(data[i], c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      centroids.push_back(data[rng.uniform_int(data.size())]);
      continue;
    }
    double pick = rng.uniform() * total;
    std::size_t chosen = data.size() - 1;
    for (std::size_t i = 0; i < data.size(); ++i) {
      pick -= d2[i];
      if (pick <= 0.0) {
        chosen = i;
        break;
      }
    }
    centroids.push_back(data[chosen]);
  }
  return centroids;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding, 100 iterations, 5 restarts, best
/// inertia kept. A bin that empties is re-seeded at the point farthest from
/// its assigned centroid, so every bin is non-empty after fitting.
inline BinningModel ndb_fit(const std::vector<Tensor>& real, std::size_t k, RngStream& rng) {
  if (k < 1) throw DomainError("ndb_fit needs k >= 1");
  if (real.size() < k)
    throw DomainError("ndb_fit needs at least k samples (" + std::to_string(real.size()) + " < " +
                      std::to_string(k) + ")");
  constexpr int kMaxIterations = 100;
  constexpr int kRestarts = 5;

  std::vector<Tensor> best_centroids;
  std::vector<std::size_t> best_assignment;
  double best_inertia = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < kRestarts; ++restart) {
    std::vector<Tensor> centroids = detail::kmeanspp_init(real, k, rng);
    std::vector<std::size_t> assignment(real.size(), 0);
    for (int iter = 0; iter < kMaxIterations; ++iter) {
      bool changed = false;
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t i = 0; i < real.size(); ++i) {
        std::size_t best_k = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
          const double d = raw::squared_l2(real[i], centroids[c]);
          if (d < best_d) {
            best_d = d;
            best_k = c;
          }
        }
        if (assignment[i] != best_k) changed = true;
        assignment[i] = best_k;
        ++counts[best_k];
      }
      // re-seed empty bins at the worst-fit point
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] != 0) continue;
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < real.size(); ++i) {
          const double d = raw::squared_l2(real[i], centroids[assignment[i]]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centroids[c] = real[far];
        if (assignment[far] != c) changed = true;
        ++counts[c];
        --counts[assignment[far]];
        assignment[far] = c;
      }
      std::vector<Tensor> sums(k, Tensor::zeros(real.front().shape()));
      for (std::size_t i = 0; i < real.size(); ++i)
        for (std::size_t d = 0; d < real[i].size(); ++d) sums[assignment[i]][d] += real[i][d];
      for (std::size_t c = 0; c < k; ++c)
        if (counts[c] > 0)
          centroids[c] = raw::scale(sums[c], 1.0 / static_cast<double>(counts[c]));
      if (!changed && iter > 0) break;
    }
    const double inertia = detail::kmeans_inertia(real, centroids, assignment);
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_centroids = centroids;
      best_assignment = assignment;
    }
  }

  BinningModel model;
  model.centroids = std::move(best_centroids);
  model.training_samples = real.size();
  model.real_proportions.assign(k, 0.0);
  for (std::size_t a : best_assignment) model.real_proportions[a] += 1.0;
  for (double& p : model.real_proportions) p /= static_cast<double>(real.size());
  return model;
}

struct NdbResult {
  std::size_t ndb = 0;
  double jsd = 0.0;
  std::vector<double> gen_proportions;
  std::vector<bool> bin_different;
};

/// Assigns generated samples to bins, runs a pooled two-proportion z-test
/// per bin, and counts the statistically different ones. JSD between the
/// real and generated bin histograms validates the count.
inline NdbResult ndb_score(const BinningModel& model, const std::vector<Tensor>& gen,
                           double alpha = 0.05) {
  if (gen.empty()) throw DomainError("ndb_score needs >= 1 generated sample");
  const std::size_t K = model.bin_count();
  const double z_crit = two_sided_z_quantile(alpha);

  NdbResult result;
  result.gen_proportions.assign(K, 0.0);
  for (const Tensor& x : gen) result.gen_proportions[model.assign(x)] += 1.0;
  for (double& p : result.gen_proportions) p /= static_cast<double>(gen.size());

  const double n_real = static_cast<double>(model.training_samples);
  const double n_gen = static_cast<double>(gen.size());
  result.bin_different.assign(K, false);
  for (std::size_t k = 0; k < K; ++k) {
    const double pr = model.real_proportions[k];
    const double pg = result.gen_proportions[k];
    const double pooled = (pr * n_real + pg * n_gen) / (n_real + n_gen);
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n_real + 1.0 / n_gen));
    const double z = se > 0.0 ? (pr - pg) / se : 0.0;
    if (std::abs(z) > z_crit) {
      result.bin_different[k] = true;
      ++result.ndb;
    }
  }
  result.jsd = jensen_shannon(model.real_proportions, result.gen_proportions);
  return result;
}

/// One evaluation of a generated batch. CSV columns are pinned:
/// seed, variant, fid, ndb, jsd, diversity_total, diversity_l1..lL
/// (+ coverage when the harness measured it).
struct MetricsReport {
  std::uint64_t seed = 0;
  std::string variant;
  double fid = 0.0;
  std::size_t ndb = 0;
  double jsd = 0.0;
  double diversity_total = 0.0;
  std::vector<double> diversity_per_layer;
  std::size_t sample_count = 0;
  std::optional<std::size_t> mode_coverage;
  std::string config_hash;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc;
    doc["seed"] = seed;
    doc["variant"] = variant;
    doc["fid"] = fid;
    doc["ndb"] = ndb;
    doc["jsd"] = jsd;
    doc["diversity_total"] = diversity_total;
    doc["diversity_per_layer"] = diversity_per_layer;
    doc["sample_count"] = sample_count;
    if (mode_coverage) doc["mode_coverage"] = *mode_coverage;
    doc["config_hash"] = config_hash;
    return doc;
  }

  static std::string csv_header(std::size_t layers, bool with_coverage) {
    std::string out = "seed,variant,fid,ndb,jsd,diversity_total";
    for (std::size_t l = 1; l <= layers; ++l) out += ",diversity_l" + std::to_string(l);
    if (with_coverage) out += ",coverage";
    return out;
  }

  std::string csv_row() const {
    std::string out = std::to_string(seed) + "," + variant + "," + format(fid) + "," +
                      std::to_string(ndb) + "," + format(jsd) + "," + format(diversity_total);
    for (double v : diversity_per_layer) out += "," + format(v);
    if (mode_coverage) out += "," + std::to_string(*mode_coverage);
    return out;
  }

  static std::string format(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
  }
};

}  // namespace hmgan
