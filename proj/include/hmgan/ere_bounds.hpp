#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "hmgan/regularizers.hpp"
#include "hmgan/stack.hpp"
#include "hmgan/tensor.hpp"

namespace hmgan {

/// Pairwise layer-to-layer distance ratios over a dataset: entry (u, v) is
/// the pair's layer-(i-1) distance over its eps-guarded layer-i distance.
/// The diagonal is a +inf sentinel (a self-pair is 0/0 and carries no
/// expansion information), so it never wins the minimum.
struct RatioMatrix {
  std::size_t layer = 0;  // i, 1-based, 2 <= i <= n
  std::size_t m = 0;
  std::vector<double> entries;  // m*m row-major

  double at(std::size_t u, std::size_t v) const { return entries[u * m + v]; }
  double& at(std::size_t u, std::size_t v) { return entries[u * m + v]; }

  double min_off_diagonal() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < m; ++u)
      for (std::size_t v = 0; v < m; ++v)
        if (u != v && entries[u * m + v] < best) best = entries[u * m + v];
    return best;
  }
};

/// Per-layer lower bounds b^(2)..b^(n): the minimum off-diagonal ratio seen
/// anywhere in the dataset.
struct BoundVector {
  std::vector<double> values;  // b for layers 2..n
  std::size_t m = 0;           // dataset size actually used

  std::size_t entry_count() const { return values.size(); }

  double b(std::size_t layer) const {
    if (layer < 2 || layer > values.size() + 1)
      throw DomainError("bound layer index " + std::to_string(layer) + " out of range 2.." +
                        std::to_string(values.size() + 1));
    return values[layer - 2];
  }
};

namespace detail {

inline void check_bounds_args(const LayerStack& stack, std::size_t m, std::size_t layer) {
  if (m < 2) throw DomainError("ratio matrix needs at least 2 dataset inputs");
  if (layer < 2 || layer > stack.layer_count())
    throw DomainError("ratio matrix layer " + std::to_string(layer) + " out of range 2.." +
                      std::to_string(stack.layer_count()));
}

}  // namespace detail

/// Double loop over pairs, each running its own forward passes. O(m^2)
/// forward passes by construction; kept as the oracle for the batched form.
inline RatioMatrix ratio_matrix_naive(const LayerStack& stack, const std::vector<Tensor>& inputs,
                                      std::size_t layer, double eps = kRatioEpsilon) {
  detail::check_bounds_args(stack, inputs.size(), layer);
  const std::size_t m = inputs.size();
  RatioMatrix out;
  out.layer = layer;
  out.m = m;
  out.entries.assign(m * m, std::numeric_limits<double>::infinity());
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t v = u + 1; v < m; ++v) {
      const std::vector<Tensor> taps_u = stack.forward_taps(inputs[u]);
      const std::vector<Tensor> taps_v = stack.forward_taps(inputs[v]);
      const double d_prev = raw::l1_distance(taps_u[layer - 2], taps_v[layer - 2]);
      const double d_cur = raw::l1_distance(taps_u[layer - 1], taps_v[layer - 1]);
      const double ratio = d_prev / (d_cur + eps);
      out.at(u, v) = ratio;
      out.at(v, u) = ratio;
    }
  }
  return out;
}

/// One generator sweep: stacks the m dataset inputs into a [m x width]
/// matrix, materializes the per-layer tap matrices, and reduces pairwise
/// distances along the feature axis. No per-pair forward passes.
inline std::vector<Tensor> materialize_tap_matrices(const LayerStack& stack,
                                                    const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw DomainError("no dataset inputs");
  const std::size_t m = inputs.size();
  const std::size_t w = stack.input_width();
  Tensor batch = Tensor::zeros({m, w});
  for (std::size_t r = 0; r < m; ++r) {
    if (inputs[r].rank() != 1 || inputs[r].size() != w)
      throw ShapeError("materialize_tap_matrices", shape_str(inputs[r].shape()),
                       shape_str(Shape{w}));
    for (std::size_t c = 0; c < w; ++c) batch.at(r, c) = inputs[r][c];
  }
  return stack.forward_taps(batch);
}

/// Pairwise L1 distances between the rows of a [m x f] tap matrix.
inline Tensor pairwise_l1(const Tensor& taps) {
  const std::size_t m = taps.shape()[0];
  const std::size_t f = taps.shape()[1];
  Tensor out = Tensor::zeros({m, m});
  for (std::size_t u = 0; u < m; ++u) {
    const double* row_u = taps.data().data() + u * f;
    for (std::size_t v = u + 1; v < m; ++v) {
      const double* row_v = taps.data().data() + v * f;
      double acc = 0.0;
      for (std::size_t k = 0; k < f; ++k) acc += std::abs(row_u[k] - row_v[k]);
      out.at(u, v) = acc;
      out.at(v, u) = acc;
    }
  }
  return out;
}

inline RatioMatrix ratio_matrix_from_taps(const std::vector<Tensor>& tap_matrices,
                                          std::size_t layer, double eps = kRatioEpsilon) {
  const Tensor& prev = tap_matrices.at(layer - 2);
  const Tensor& cur = tap_matrices.at(layer - 1);
  const std::size_t m = prev.shape()[0];
  const Tensor d_prev = pairwise_l1(prev);
  const Tensor d_cur = pairwise_l1(cur);
  RatioMatrix out;
  out.layer = layer;
  out.m = m;
  out.entries.assign(m * m, std::numeric_limits<double>::infinity());
  for (std::size_t u = 0; u < m; ++u)
    for (std::size_t v = 0; v < m; ++v)
      if (u != v) out.at(u, v) = d_prev.at(u, v) / (d_cur.at(u, v) + eps);
  return out;
}

inline RatioMatrix ratio_matrix_batched(const LayerStack& stack, const std::vector<Tensor>& inputs,
                                        std::size_t layer, double eps = kRatioEpsilon) {
  detail::check_bounds_args(stack, inputs.size(), layer);
  return ratio_matrix_from_taps(materialize_tap_matrices(stack, inputs), layer, eps);
}

/// b^(i) = min off-diagonal entry of the layer-i ratio matrix, for every
/// i in 2..n, from a single dataset sweep. When the dataset exceeds
/// max_samples an evenly-spaced subsample is used and recorded in `m`.
inline BoundVector lower_bounds(const LayerStack& stack, const std::vector<Tensor>& inputs,
                                std::size_t max_samples = 512, double eps = kRatioEpsilon) {
  if (inputs.size() < 2) throw DomainError("lower_bounds needs at least 2 dataset inputs");
  std::vector<Tensor> used;
  if (max_samples > 0 && inputs.size() > max_samples) {
    used.reserve(max_samples);
    for (std::size_t j = 0; j < max_samples; ++j)
      used.push_back(inputs[(j * inputs.size()) / max_samples]);
  } else {
    used = inputs;
  }
  const std::vector<Tensor> taps = materialize_tap_matrices(stack, used);
  BoundVector out;
  out.m = used.size();
  for (std::size_t layer = 2; layer <= stack.layer_count(); ++layer)
    out.values.push_back(ratio_matrix_from_taps(taps, layer, eps).min_off_diagonal());
  return out;
}

}  // namespace hmgan
