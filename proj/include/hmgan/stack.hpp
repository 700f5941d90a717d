#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hmgan/autodiff.hpp"
#include "hmgan/rng.hpp"
#include "hmgan/tensor.hpp"

namespace hmgan {

enum class Activation : std::uint8_t { relu, tanh, none };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::none: return "none";
  }
  return "?";
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "none") return Activation::none;
  throw DomainError("unknown activation '" + name + "'");
}

struct LayerSpec {
  std::size_t in_width = 0;
  std::size_t out_width = 0;
  Activation act = Activation::none;
};

/// Conditioning vector appended to the latent code: a one-hot label or an
/// arbitrary real-valued context.
struct Condition {
  Tensor encoding;  // rank-1

  static Condition one_hot(std::size_t index, std::size_t count) {
    if (index >= count) throw DomainError("one_hot index out of range");
    Tensor t = Tensor::zeros({count});
    t[index] = 1.0;
    return Condition{std::move(t)};
  }

  std::size_t width() const { return encoding.size(); }
};

/// [z; c], z first. Both operands must be rank-1 (z may be empty).
inline Tensor concat_condition(const Tensor& z, const Condition& c) {
  if (z.rank() != 1 || c.encoding.rank() != 1)
    throw ShapeError("concat_condition", shape_str(z.shape()), shape_str(c.encoding.shape()));
  std::vector<double> data;
  data.reserve(z.size() + c.encoding.size());
  data.insert(data.end(), z.data().begin(), z.data().end());
  data.insert(data.end(), c.encoding.data().begin(), c.encoding.data().end());
  return Tensor::vector(std::move(data));
}

/// One full pass through a stack: the input node and the node id of every
/// layer's output, in order. tap(i) is 1-based; tap(n) is the final output.
struct ForwardTrace {
  NodeId input = 0;
  std::vector<NodeId> taps;

  std::size_t layer_count() const { return taps.size(); }

  NodeId tap(std::size_t layer) const {
    if (layer < 1 || layer > taps.size())
      throw DomainError("tap index " + std::to_string(layer) + " out of range 1.." +
                        std::to_string(taps.size()));
    return taps[layer - 1];
  }
};

/// Leaf node ids for a stack's parameters inside one graph.
struct StackParamNodes {
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
};

/// An explicit feed-forward stack of affine layers with pointwise
/// nonlinearities. Serves as generator, discriminator, and feature-embedder
/// substrate; every intermediate output is tappable.
class LayerStack {
 public:
  explicit LayerStack(std::vector<LayerSpec> specs) : specs_(std::move(specs)) {
    if (specs_.empty()) throw DomainError("a stack needs at least one layer");
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      if (specs_[i].in_width == 0 || specs_[i].out_width == 0)
        throw DomainError("layer widths must be positive");
      if (i > 0 && specs_[i].in_width != specs_[i - 1].out_width)
        throw DomainError("layer " + std::to_string(i + 1) + " input width " +
                          std::to_string(specs_[i].in_width) + " does not match previous output " +
                          std::to_string(specs_[i - 1].out_width));
    }
    for (const LayerSpec& s : specs_) {
      weights_.push_back(Tensor::zeros({s.out_width, s.in_width}));
      biases_.push_back(Tensor::zeros({s.out_width}));
    }
  }

  std::size_t layer_count() const { return specs_.size(); }
  std::size_t input_width() const { return specs_.front().in_width; }
  std::size_t output_width() const { return specs_.back().out_width; }
  const LayerSpec& spec(std::size_t layer) const { return specs_.at(layer - 1); }

  /// Flattened output width of layer i (1-based).
  std::size_t tap_width(std::size_t layer) const { return spec(layer).out_width; }

  Tensor& weight(std::size_t layer) { return weights_.at(layer - 1); }
  const Tensor& weight(std::size_t layer) const { return weights_.at(layer - 1); }
  Tensor& bias(std::size_t layer) { return biases_.at(layer - 1); }
  const Tensor& bias(std::size_t layer) const { return biases_.at(layer - 1); }

  /// Weights ~ Uniform(-a, a) with a = sqrt(6 / fan_in); biases zero.
  void init_params(RngStream& rng) {
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      const double a = std::sqrt(6.0 / static_cast<double>(specs_[l].in_width));
      for (double& w : weights_[l].data()) w = rng.uniform(-a, a);
      for (double& b : biases_[l].data()) b = 0.0;
    }
  }

  bool params_finite() const {
    for (const Tensor& w : weights_)
      if (!w.all_finite()) return false;
    for (const Tensor& b : biases_)
      if (!b.all_finite()) return false;
    return true;
  }

  /// Copies the current parameters into a graph as leaves.
  StackParamNodes lift(ADGraph& g) const {
    StackParamNodes nodes;
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      nodes.weights.push_back(g.leaf(weights_[l]));
      nodes.biases.push_back(g.leaf(biases_[l]));
    }
    return nodes;
  }

  /// Forward pass recording every layer output in the ambient graph, so a
  /// loss over any tap backpropagates into the lifted parameters.
  ForwardTrace forward_with_taps(ADGraph& g, const StackParamNodes& params, NodeId input) const {
    const Tensor& in = g.value(input);
    if (in.rank() != 1 || in.size() != input_width())
      throw ShapeError("forward_with_taps", shape_str(in.shape()),
                       shape_str(Shape{input_width()}));
    ForwardTrace trace;
    trace.input = input;
    NodeId x = input;
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      NodeId pre = g.add(g.matmul(params.weights[l], x), params.biases[l]);
      switch (specs_[l].act) {
        case Activation::relu: x = g.relu(pre); break;
        case Activation::tanh: x = g.tanh(pre); break;
        case Activation::none: x = pre; break;
      }
      trace.taps.push_back(x);
    }
    return trace;
  }

  ForwardTrace forward_with_taps(ADGraph& g, NodeId input) const {
    return forward_with_taps(g, lift(g), input);
  }

  /// Graph-free forward pass; returns all n layer outputs. Accepts a rank-1
  /// input or a rank-2 [batch x width] matrix of row samples.
  std::vector<Tensor> forward_taps(const Tensor& input) const {
    if (input.rank() == 1) {
      if (input.size() != input_width())
        throw ShapeError("forward_taps", shape_str(input.shape()), shape_str(Shape{input_width()}));
      std::vector<Tensor> taps;
      taps.reserve(specs_.size());
      Tensor x = input;
      for (std::size_t l = 0; l < specs_.size(); ++l) {
        x = raw::add(raw::matmul(weights_[l], x), biases_[l]);
        x = apply_act(specs_[l].act, std::move(x));
        taps.push_back(x);
      }
      return taps;
    }
    if (input.rank() != 2 || input.shape()[1] != input_width())
      throw ShapeError("forward_taps", shape_str(input.shape()),
                       shape_str(Shape{0, input_width()}));
    const std::size_t batch = input.shape()[0];
    std::vector<Tensor> taps;
    taps.reserve(specs_.size());
    Tensor x = input;
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      const std::size_t out_w = specs_[l].out_width;
      const std::size_t in_w = specs_[l].in_width;
      Tensor y = Tensor::zeros({batch, out_w});
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t j = 0; j < in_w; ++j) {
          const double xv = x.at(r, j);
          if (xv == 0.0) continue;
          for (std::size_t o = 0; o < out_w; ++o) y.at(r, o) += weights_[l].at(o, j) * xv;
        }
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t o = 0; o < out_w; ++o) y.at(r, o) += biases_[l][o];
      x = apply_act(specs_[l].act, std::move(y));
      taps.push_back(x);
    }
    return taps;
  }

  /// Graph-free forward pass returning only the final output.
  Tensor forward(const Tensor& input) const { return forward_taps(input).back(); }

  /// Flat checkpoint: {"layers": [{"w": [[...]], "b": [...], "act": "..."}]}.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (std::size_t r = 0; r < specs_[l].out_width; ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t c = 0; c < specs_[l].in_width; ++c) row.push_back(weights_[l].at(r, c));
        rows.push_back(std::move(row));
      }
      layers.push_back({{"w", std::move(rows)},
                        {"b", biases_[l].data()},
                        {"act", activation_name(specs_[l].act)}});
    }
    return nlohmann::ordered_json{{"layers", std::move(layers)}};
  }

  static LayerStack from_json(const nlohmann::json& doc) {
    if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty())
      throw DomainError("checkpoint must contain a non-empty 'layers' array");
    std::vector<LayerSpec> specs;
    std::vector<Tensor> weights, biases;
    for (const auto& layer : doc["layers"]) {
      const auto& w = layer.at("w");
      const std::size_t out_w = w.size();
      const std::size_t in_w = w.at(0).size();
      std::vector<double> wd;
      wd.reserve(out_w * in_w);
      for (const auto& row : w) {
        if (row.size() != in_w) throw DomainError("ragged weight matrix in checkpoint");
        for (const auto& v : row) wd.push_back(v.get<double>());
      }
      std::vector<double> bd = layer.at("b").get<std::vector<double>>();
      if (bd.size() != out_w) throw DomainError("bias width mismatch in checkpoint");
      specs.push_back({in_w, out_w, activation_from_name(layer.at("act").get<std::string>())});
      weights.push_back(Tensor::matrix(out_w, in_w, std::move(wd)));
      biases.push_back(Tensor::vector(std::move(bd)));
    }
    LayerStack stack(std::move(specs));
    for (std::size_t l = 0; l < weights.size(); ++l) {
      stack.weights_[l] = std::move(weights[l]);
      stack.biases_[l] = std::move(biases[l]);
    }
    return stack;
  }

 private:
  static Tensor apply_act(Activation act, Tensor x) {
    switch (act) {
      case Activation::relu: return raw::relu(x);
      case Activation::tanh: return raw::tanh(x);
      case Activation::none: return x;
    }
    return x;
  }

  std::vector<LayerSpec> specs_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

/// Hidden widths plus a final tanh layer onto `out_width` outputs. A
/// generator keeps its ratio machinery meaningful only with >= 2 layers.
inline LayerStack make_generator(std::size_t in_width, const std::vector<std::size_t>& hidden,
                                 std::size_t out_width, Activation hidden_act) {
  if (hidden.empty()) throw DomainError("generator needs >= 2 layers (>= 1 hidden width)");
  std::vector<LayerSpec> specs;
  std::size_t prev = in_width;
  for (std::size_t w : hidden) {
    specs.push_back({prev, w, hidden_act});
    prev = w;
  }
  specs.push_back({prev, out_width, Activation::tanh});
  return LayerStack(std::move(specs));
}

/// Mirrors the generator shape with a final scalar logit (no activation).
inline LayerStack make_discriminator(std::size_t in_width, const std::vector<std::size_t>& hidden,
                                     Activation hidden_act) {
  if (hidden.empty()) throw DomainError("discriminator needs >= 2 layers");
  std::vector<LayerSpec> specs;
  std::size_t prev = in_width;
  for (std::size_t w : hidden) {
    specs.push_back({prev, w, hidden_act});
    prev = w;
  }
  specs.push_back({prev, 1, Activation::none});
  return LayerStack(std::move(specs));
}

}  // namespace hmgan
