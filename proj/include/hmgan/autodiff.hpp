#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "hmgan/tensor.hpp"

namespace hmgan {

using NodeId = std::size_t;

enum class OpKind : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  matmul,
  concat,
  relu,
  tanh,
  sum,
  abs,
  scale,
  reciprocal_eps,
  softplus,
};

inline const char* op_kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::matmul: return "matmul";
    case OpKind::concat: return "concat";
    case OpKind::relu: return "relu";
    case OpKind::tanh: return "tanh";
    case OpKind::sum: return "sum";
    case OpKind::abs: return "abs";
    case OpKind::scale: return "scale";
    case OpKind::reciprocal_eps: return "reciprocal_eps";
    case OpKind::softplus: return "softplus";
  }
  return "?";
}

/// Per-node gradients produced by ADGraph::backward.
class Gradients {
 public:
  explicit Gradients(std::size_t node_count) : grads_(node_count), has_(node_count, false) {}

  bool contains(NodeId id) const { return id < has_.size() && has_[id]; }

  const Tensor& at(NodeId id) const {
    if (!contains(id)) throw DomainError("no gradient recorded for node " + std::to_string(id));
    return grads_[id];
  }

  /// Gradient of the root w.r.t. this node, or zeros if the node is unreachable.
  Tensor at_or_zeros(NodeId id, const Shape& shape) const {
    return contains(id) ? grads_[id] : Tensor::zeros(shape);
  }

  void accumulate(NodeId id, Tensor contribution) {
    if (!has_[id]) {
      grads_[id] = std::move(contribution);
      has_[id] = true;
      return;
    }
    Tensor& g = grads_[id];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
  }

 private:
  std::vector<Tensor> grads_;
  std::vector<bool> has_;
};

/// Append-only computation graph with eager forward values.
/// Nodes reference only earlier nodes, so descending index order is a
/// reverse topological order. Backward never touches forward values.
class ADGraph {
 public:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::array<NodeId, 2> in{{0, 0}};
    std::uint8_t arity = 0;
    double attr = 0.0;  // scale factor or epsilon guard
    Tensor value;
  };

  NodeId leaf(Tensor value) {
    Node n;
    n.kind = OpKind::leaf;
    n.value = std::move(value);
    return push(std::move(n));
  }

  NodeId add(NodeId a, NodeId b) { return binary_elementwise(OpKind::add, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary_elementwise(OpKind::sub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary_elementwise(OpKind::mul, a, b); }

  NodeId matmul(NodeId a, NodeId b) {
    Node n = make_binary(OpKind::matmul, a, b);
    n.value = raw::matmul(value(a), value(b));
    return push(std::move(n));
  }

  /// Joins two rank-1 tensors end to end.
  NodeId concat(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.rank() != 1 || vb.rank() != 1)
      throw ShapeError("concat", shape_str(va.shape()), shape_str(vb.shape()));
    std::vector<double> data;
    data.reserve(va.size() + vb.size());
    data.insert(data.end(), va.data().begin(), va.data().end());
    data.insert(data.end(), vb.data().begin(), vb.data().end());
    Node n = make_binary(OpKind::concat, a, b);
    n.value = Tensor::vector(std::move(data));
    return push(std::move(n));
  }

  NodeId relu(NodeId a) {
    Node n = make_unary(OpKind::relu, a);
    n.value = raw::relu(value(a));
    return push(std::move(n));
  }

  NodeId tanh(NodeId a) {
    Node n = make_unary(OpKind::tanh, a);
    n.value = raw::tanh(value(a));
    return push(std::move(n));
  }

  /// Full reduction to a rank-0 scalar.
  NodeId sum(NodeId a) {
    double acc = 0.0;
    for (double v : value(a).data()) acc += v;
    Node n = make_unary(OpKind::sum, a);
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
  }

  NodeId abs(NodeId a) {
    Node n = make_unary(OpKind::abs, a);
    n.value = value(a);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::abs(n.value[i]);
    return push(std::move(n));
  }

  NodeId scale(NodeId a, double c) {
    Node n = make_unary(OpKind::scale, a);
    n.attr = c;
    n.value = raw::scale(value(a), c);
    return push(std::move(n));
  }

  /// Elementwise 1/(x + eps); the only division primitive. eps must be > 0.
  NodeId reciprocal_eps(NodeId a, double eps) {
    if (!(eps > 0.0)) throw DomainError("reciprocal_eps requires eps > 0");
    Node n = make_unary(OpKind::reciprocal_eps, a);
    n.attr = eps;
    n.value = value(a);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = 1.0 / (n.value[i] + eps);
    return push(std::move(n));
  }

  NodeId softplus(NodeId a) {
    Node n = make_unary(OpKind::softplus, a);
    n.value = value(a);
    for (std::size_t i = 0; i < n.value.size(); ++i) {
      const double x = n.value[i];
      n.value[i] = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }
    return push(std::move(n));
  }

  /// Uniform dispatcher over the op kinds. `attr` carries the scale factor
  /// or the epsilon guard where the kind needs one.
  NodeId forward_op(OpKind kind, std::span<const NodeId> inputs, double attr = 0.0) {
    const auto want = [&](std::size_t arity) {
      if (inputs.size() != arity)
        throw DomainError(std::string(op_kind_name(kind)) + " takes " + std::to_string(arity) +
                          " inputs, got " + std::to_string(inputs.size()));
    };
    switch (kind) {
      case OpKind::add: want(2); return add(inputs[0], inputs[1]);
      case OpKind::sub: want(2); return sub(inputs[0], inputs[1]);
      case OpKind::mul: want(2); return mul(inputs[0], inputs[1]);
      case OpKind::matmul: want(2); return matmul(inputs[0], inputs[1]);
      case OpKind::concat: want(2); return concat(inputs[0], inputs[1]);
      case OpKind::relu: want(1); return relu(inputs[0]);
      case OpKind::tanh: want(1); return tanh(inputs[0]);
      case OpKind::sum: want(1); return sum(inputs[0]);
      case OpKind::abs: want(1); return abs(inputs[0]);
      case OpKind::scale: want(1); return scale(inputs[0], attr);
      case OpKind::reciprocal_eps: want(1); return reciprocal_eps(inputs[0], attr);
      case OpKind::softplus: want(1); return softplus(inputs[0]);
      case OpKind::leaf: break;
    }
    throw DomainError("leaf is not an applicable op kind");
  }

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

  /// Reverse accumulation from a scalar root. Returns gradients for every
  /// node reachable from the root; the root's own entry is all ones.
  Gradients backward(NodeId root) const {
    if (root >= nodes_.size()) throw DomainError("backward: node id out of range");
    if (!nodes_[root].value.is_scalar())
      throw DomainError("backward requires a scalar root, got shape " +
                        shape_str(nodes_[root].value.shape()));
    Gradients grads(nodes_.size());
    grads.accumulate(root, Tensor::ones(nodes_[root].value.shape()));

    for (NodeId id = root + 1; id-- > 0;) {
      if (!grads.contains(id)) continue;
      const Node& n = nodes_[id];
      const Tensor& g = grads.at(id);
      switch (n.kind) {
        case OpKind::leaf:
          break;
        case OpKind::add:
          grads.accumulate(n.in[0], g);
          grads.accumulate(n.in[1], g);
          break;
        case OpKind::sub:
          grads.accumulate(n.in[0], g);
          grads.accumulate(n.in[1], raw::scale(g, -1.0));
          break;
        case OpKind::mul:
          grads.accumulate(n.in[0], elementwise_product(g, value(n.in[1])));
          grads.accumulate(n.in[1], elementwise_product(g, value(n.in[0])));
          break;
        case OpKind::matmul:
          backward_matmul(n, g, grads);
          break;
        case OpKind::concat: {
          const Tensor& va = value(n.in[0]);
          const Tensor& vb = value(n.in[1]);
          Tensor ga = Tensor::zeros(va.shape());
          Tensor gb = Tensor::zeros(vb.shape());
          for (std::size_t i = 0; i < va.size(); ++i) ga[i] = g[i];
          for (std::size_t i = 0; i < vb.size(); ++i) gb[i] = g[va.size() + i];
          grads.accumulate(n.in[0], std::move(ga));
          grads.accumulate(n.in[1], std::move(gb));
          break;
        }
        case OpKind::relu: {
          const Tensor& x = value(n.in[0]);
          Tensor gx = g;
          for (std::size_t i = 0; i < gx.size(); ++i)
            if (x[i] <= 0.0) gx[i] = 0.0;  // subgradient at 0 is 0
          grads.accumulate(n.in[0], std::move(gx));
          break;
        }
        case OpKind::tanh: {
          Tensor gx = g;
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 1.0 - n.value[i] * n.value[i];
          grads.accumulate(n.in[0], std::move(gx));
          break;
        }
        case OpKind::sum: {
          grads.accumulate(n.in[0], Tensor::full(value(n.in[0]).shape(), g[0]));
          break;
        }
        case OpKind::abs: {
          const Tensor& x = value(n.in[0]);
          Tensor gx = g;
          for (std::size_t i = 0; i < gx.size(); ++i)
            gx[i] *= x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);  // sign(0) = 0
          grads.accumulate(n.in[0], std::move(gx));
          break;
        }
        case OpKind::scale:
          grads.accumulate(n.in[0], raw::scale(g, n.attr));
          break;
        case OpKind::reciprocal_eps: {
          Tensor gx = g;
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= -n.value[i] * n.value[i];
          grads.accumulate(n.in[0], std::move(gx));
          break;
        }
        case OpKind::softplus: {
          const Tensor& x = value(n.in[0]);
          Tensor gx = g;
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 1.0 / (1.0 + std::exp(-x[i]));
          grads.accumulate(n.in[0], std::move(gx));
          break;
        }
      }
    }
    return grads;
  }

 private:
  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  Node make_unary(OpKind kind, NodeId a) const {
    require_id(a);
    Node n;
    n.kind = kind;
    n.in = {a, 0};
    n.arity = 1;
    return n;
  }

  Node make_binary(OpKind kind, NodeId a, NodeId b) const {
    require_id(a);
    require_id(b);
    Node n;
    n.kind = kind;
    n.in = {a, b};
    n.arity = 2;
    return n;
  }

  void require_id(NodeId id) const {
    if (id >= nodes_.size()) throw DomainError("node id " + std::to_string(id) + " out of range");
  }

  NodeId binary_elementwise(OpKind kind, NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb))
      throw ShapeError(op_kind_name(kind), shape_str(va.shape()), shape_str(vb.shape()));
    Node n = make_binary(kind, a, b);
    n.value = va;
    switch (kind) {
      case OpKind::add:
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += vb[i];
        break;
      case OpKind::sub:
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= vb[i];
        break;
      case OpKind::mul:
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= vb[i];
        break;
      default:
        throw DomainError("not an elementwise kind");
    }
    return push(std::move(n));
  }

  static Tensor elementwise_product(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
  }

  void backward_matmul(const Node& n, const Tensor& g, Gradients& grads) const {
    const Tensor& a = value(n.in[0]);
    const Tensor& b = value(n.in[1]);
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    if (b.rank() == 1) {
      // y = A x: dA = g x^T, dx = A^T g
      Tensor ga = Tensor::zeros({m, k});
      Tensor gb = Tensor::zeros({k});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          ga.at(i, j) = g[i] * b[j];
          gb[j] += a.at(i, j) * g[i];
        }
      grads.accumulate(n.in[0], std::move(ga));
      grads.accumulate(n.in[1], std::move(gb));
      return;
    }
    // Y = A B: dA = G B^T, dB = A^T G
    const std::size_t cols = b.shape()[1];
    Tensor ga = Tensor::zeros({m, k});
    Tensor gb = Tensor::zeros({k, cols});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          acc += g.at(i, c) * b.at(j, c);
          gb.at(j, c) += a.at(i, j) * g.at(i, c);
        }
        ga.at(i, j) = acc;
      }
    grads.accumulate(n.in[0], std::move(ga));
    grads.accumulate(n.in[1], std::move(gb));
  }

  std::vector<Node> nodes_;
};

/// Scalar L1 distance sum |a_k - b_k|; subgradient at ties is 0.
inline NodeId l1_distance(ADGraph& g, NodeId a, NodeId b) {
  return g.sum(g.abs(g.sub(a, b)));
}

// ---- finite-difference oracle ---------------------------------------------

/// Builds a scalar loss over leaf nodes created from the given tensors,
/// in order. Must be deterministic.
using LossBuilder = std::function<NodeId(ADGraph&, const std::vector<NodeId>&)>;

struct FiniteDiffResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates adjacent to an L1/relu kink
};

namespace detail {

struct EvalOutcome {
  double loss;
  std::vector<std::int8_t> kink_signs;  // sign pattern of every abs/relu input
};

inline EvalOutcome eval_loss(const LossBuilder& build, const std::vector<Tensor>& leaves) {
  ADGraph g;
  std::vector<NodeId> ids;
  ids.reserve(leaves.size());
  for (const Tensor& t : leaves) ids.push_back(g.leaf(t));
  NodeId root = build(g, ids);
  EvalOutcome out;
  out.loss = g.value(root).scalar_value();
  for (NodeId id = 0; id < g.size(); ++id) {
    const auto& n = g.node(id);
    if (n.kind != OpKind::abs && n.kind != OpKind::relu) continue;
    for (double v : g.value(n.in[0]).data())
      out.kink_signs.push_back(v > 0.0 ? 1 : (v < 0.0 ? -1 : 0));
  }
  return out;
}

}  // namespace detail

/// Central-difference check of every leaf coordinate. A coordinate is skipped
/// when the +/-h evaluations land on different sides of an |.| or relu kink
/// (the two-sided quotient is meaningless across a kink).
inline FiniteDiffResult finite_diff_check(const LossBuilder& build, std::vector<Tensor> leaves,
                                          double h = 1e-5) {
  ADGraph g;
  std::vector<NodeId> ids;
  ids.reserve(leaves.size());
  for (const Tensor& t : leaves) ids.push_back(g.leaf(t));
  const NodeId root = build(g, ids);
  const Gradients grads = g.backward(root);

  FiniteDiffResult result;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const Tensor analytic = grads.at_or_zeros(ids[li], leaves[li].shape());
    for (std::size_t c = 0; c < leaves[li].size(); ++c) {
      const double saved = leaves[li][c];
      leaves[li][c] = saved + h;
      const auto plus = detail::eval_loss(build, leaves);
      leaves[li][c] = saved - h;
      const auto minus = detail::eval_loss(build, leaves);
      leaves[li][c] = saved;
      if (plus.kink_signs != minus.kink_signs) {
        ++result.skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * h);
      const double rel =
          std::abs(analytic[c] - numeric) / std::max(1.0, std::abs(analytic[c]));
      if (rel > result.max_rel_error) result.max_rel_error = rel;
      ++result.checked;
    }
  }
  return result;
}

}  // namespace hmgan
