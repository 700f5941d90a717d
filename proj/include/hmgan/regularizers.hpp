#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hmgan/autodiff.hpp"
#include "hmgan/stack.hpp"

namespace hmgan {

/// Shared denominator guard: every ratio in the library divides through
/// 1/(d + kRatioEpsilon), so losses and bounds see the same geometry.
inline constexpr double kRatioEpsilon = 1e-8;

/// Per-layer expansion targets lambda^(2)..lambda^(n). Values live in [0, 1];
/// above 1 a layer would be asked to shrink diversity, below the lower bound
/// the target is unreachable, so bounds (when attached) tighten the interval
/// to [b^(i), 1].
class EREVector {
 public:
  explicit EREVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DomainError("ERE vector must have n-1 >= 1 entries");
    for (double v : values_)
      if (!(v >= 0.0 && v <= 1.0))
        throw DomainError("ERE entry " + std::to_string(v) + " outside [0, 1]");
  }

  static EREVector constant(double lambda, std::size_t layer_count) {
    if (layer_count < 2) throw DomainError("ERE vector needs a stack with >= 2 layers");
    return EREVector(std::vector<double>(layer_count - 1, lambda));
  }

  /// Number of targeted layers (n - 1).
  std::size_t entry_count() const { return values_.size(); }

  /// Target for layer i, 1-based, 2 <= i <= n.
  double lambda(std::size_t layer) const {
    if (layer < 2 || layer > values_.size() + 1)
      throw DomainError("ERE layer index " + std::to_string(layer) + " out of range 2.." +
                        std::to_string(values_.size() + 1));
    return values_[layer - 2];
  }

  const std::vector<double>& values() const { return values_; }

  void attach_bounds(std::vector<double> bounds) {
    if (bounds.size() != values_.size())
      throw DomainError("bounds length does not match ERE length");
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (values_[k] < bounds[k])
        throw DomainError("ERE entry " + std::to_string(values_[k]) + " below its lower bound " +
                          std::to_string(bounds[k]));
    bounds_ = std::move(bounds);
  }

  const std::optional<std::vector<double>>& bounds() const { return bounds_; }

 private:
  std::vector<double> values_;
  std::optional<std::vector<double>> bounds_;
};

/// All-0, all-1, and all-0.5 target presets.
inline EREVector ere_preset(const std::string& name, std::size_t layer_count) {
  if (name == "HMGAN1") return EREVector::constant(0.0, layer_count);
  if (name == "HMGAN2") return EREVector::constant(1.0, layer_count);
  if (name == "HMGAN3") return EREVector::constant(0.5, layer_count);
  throw DomainError("unknown ERE preset '" + name + "' (expected HMGAN1, HMGAN2 or HMGAN3)");
}

enum class RegVariant : std::uint8_t { hierarchical, msgan, none };

inline const char* reg_variant_name(RegVariant v) {
  switch (v) {
    case RegVariant::hierarchical: return "hierarchical";
    case RegVariant::msgan: return "msgan";
    case RegVariant::none: return "none";
  }
  return "?";
}

struct RegularizerConfig {
  double beta = 1.0;
  double epsilon = kRatioEpsilon;
  RegVariant variant = RegVariant::hierarchical;

  void validate() const {
    if (!(beta >= 0.0)) throw DomainError("beta must be >= 0");
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be > 0");
  }
};

namespace detail {

inline void check_traces(const ForwardTrace& t1, const ForwardTrace& t2) {
  if (t1.layer_count() != t2.layer_count() || t1.layer_count() < 2)
    throw DomainError("traces must come from the same stack with >= 2 layers");
}

}  // namespace detail

/// ratio^(i): distance of the pair at layer i-1 divided (eps-guarded) by its
/// distance at layer i. > 1 means layer i contracted the pair.
inline NodeId layer_ratio(ADGraph& g, const ForwardTrace& t1, const ForwardTrace& t2,
                          std::size_t layer, double eps = kRatioEpsilon) {
  detail::check_traces(t1, t2);
  if (layer < 2 || layer > t1.layer_count())
    throw DomainError("layer_ratio index " + std::to_string(layer) + " out of range 2.." +
                      std::to_string(t1.layer_count()));
  NodeId d_prev = l1_distance(g, t1.tap(layer - 1), t2.tap(layer - 1));
  NodeId d_cur = l1_distance(g, t1.tap(layer), t2.tap(layer));
  return g.mul(d_prev, g.reciprocal_eps(d_cur, eps));
}

/// Hierarchical regularizer: sum over layers 2..n of |ratio^(i) - lambda^(i)|.
inline NodeId hierarchical_loss(ADGraph& g, const ForwardTrace& t1, const ForwardTrace& t2,
                                const EREVector& ere, double eps = kRatioEpsilon) {
  detail::check_traces(t1, t2);
  const std::size_t n = t1.layer_count();
  if (ere.entry_count() != n - 1)
    throw DomainError("ERE length " + std::to_string(ere.entry_count()) +
                      " does not match layer count " + std::to_string(n));
  NodeId acc = 0;
  bool first = true;
  for (std::size_t i = 2; i <= n; ++i) {
    NodeId term = g.abs(g.sub(layer_ratio(g, t1, t2, i, eps),
                              g.leaf(Tensor::scalar(ere.lambda(i)))));
    acc = first ? term : g.add(acc, term);
    first = false;
  }
  return acc;
}

enum class MsganNumerator : std::uint8_t { raw_input, first_layer };

/// Baseline distance regularizer: |numerator distance / (d^(n) + eps)|.
/// With the first_layer numerator this telescopes into the product of
/// layer_ratio over i = 2..n.
inline NodeId msgan_loss(ADGraph& g, const ForwardTrace& t1, const ForwardTrace& t2,
                         MsganNumerator numerator = MsganNumerator::first_layer,
                         double eps = kRatioEpsilon) {
  detail::check_traces(t1, t2);
  const std::size_t n = t1.layer_count();
  NodeId d_num = numerator == MsganNumerator::raw_input
                     ? l1_distance(g, t1.input, t2.input)
                     : l1_distance(g, t1.tap(1), t2.tap(1));
  NodeId d_out = l1_distance(g, t1.tap(n), t2.tap(n));
  return g.abs(g.mul(d_num, g.reciprocal_eps(d_out, eps)));
}

/// Training objective: adversarial term plus beta-weighted regularizer.
/// With variant none or beta = 0 the adversarial node is returned untouched.
inline NodeId combined_objective(ADGraph& g, NodeId adv_loss, NodeId reg,
                                 const RegularizerConfig& config) {
  config.validate();
  if (!g.value(adv_loss).is_scalar() || !g.value(reg).is_scalar())
    throw DomainError("combined_objective requires scalar operands");
  if (config.variant == RegVariant::none || config.beta == 0.0) return adv_loss;
  return g.add(adv_loss, g.scale(reg, config.beta));
}

}  // namespace hmgan
