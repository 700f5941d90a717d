#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hmgan/autodiff.hpp"
#include "hmgan/rng.hpp"
#include "hmgan/tensor.hpp"

using namespace hmgan;

TEST_CASE("tensor shape/data invariant") {
  REQUIRE_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DomainError);
  Tensor t({2, 2}, {1, 2, 3, 4});
  REQUIRE(t.size() == 4);
  REQUIRE(t.at(1, 0) == 3.0);
  // zero extents are allowed (empty latent codes)
  Tensor empty = Tensor::zeros({0});
  REQUIRE(empty.size() == 0);
}

TEST_CASE("elementwise and matmul forward values") {
  ADGraph g;
  NodeId a = g.leaf(Tensor::vector({1, 2}));
  NodeId b = g.leaf(Tensor::vector({3, 4}));
  REQUIRE(g.value(g.add(a, b)).data() == std::vector<double>{4, 6});

  NodeId identity = g.leaf(Tensor::scaled_identity(2, 1.0));
  NodeId m = g.leaf(Tensor::matrix(2, 2, {5, 6, 7, 8}));
  REQUIRE(g.value(g.matmul(identity, m)).data() == std::vector<double>{5, 6, 7, 8});

  NodeId zero = g.leaf(Tensor::vector({0.0}));
  REQUIRE(g.value(g.reciprocal_eps(zero, 1e-8)).data() == std::vector<double>{1e8});
}

TEST_CASE("forward_op dispatch matches the named builders") {
  ADGraph g;
  const NodeId a = g.leaf(Tensor::vector({1, -2}));
  const NodeId b = g.leaf(Tensor::vector({3, 4}));
  const std::vector<NodeId> two = {a, b};
  const std::vector<NodeId> one = {a};
  REQUIRE(g.value(g.forward_op(OpKind::add, two)).data() == std::vector<double>{4, 2});
  REQUIRE(g.value(g.forward_op(OpKind::mul, two)).data() == std::vector<double>{3, -8});
  REQUIRE(g.value(g.forward_op(OpKind::abs, one)).data() == std::vector<double>{1, 2});
  REQUIRE(g.value(g.forward_op(OpKind::scale, one, -2.0)).data() ==
          std::vector<double>{-2, 4});
  REQUIRE(g.value(g.forward_op(OpKind::sum, one)).scalar_value() == -1.0);
  REQUIRE(g.value(g.forward_op(OpKind::concat, two)).size() == 4);
  REQUIRE_THROWS_AS(g.forward_op(OpKind::add, one), DomainError);   // arity
  REQUIRE_THROWS_AS(g.forward_op(OpKind::leaf, one), DomainError);  // not applicable
  REQUIRE_THROWS_AS(g.forward_op(OpKind::reciprocal_eps, one, 0.0), DomainError);
}

TEST_CASE("shape mismatch errors carry the kind and both shapes") {
  ADGraph g;
  NodeId a = g.leaf(Tensor::vector({1, 2}));
  NodeId b = g.leaf(Tensor::vector({1, 2, 3}));
  try {
    g.add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    REQUIRE(e.op == "add");
    REQUIRE(e.lhs == "[2]");
    REQUIRE(e.rhs == "[3]");
  }
  REQUIRE_THROWS_AS(g.matmul(a, b), ShapeError);
}

TEST_CASE("l1_distance values") {
  ADGraph g;
  NodeId a = g.leaf(Tensor::vector({0, 0}));
  NodeId b = g.leaf(Tensor::vector({1, 1}));
  REQUIRE(g.value(l1_distance(g, a, b)).scalar_value() == 2.0);
  NodeId x = g.leaf(Tensor::vector({0.3, -0.7}));
  REQUIRE(g.value(l1_distance(g, x, x)).scalar_value() == 0.0);
  // hand sum |2| + |-4| + |3|
  NodeId p = g.leaf(Tensor::vector({1, -2, 3}));
  NodeId q = g.leaf(Tensor::vector({-1, 2, 0}));
  REQUIRE(g.value(l1_distance(g, p, q)).scalar_value() == 9.0);
}

TEST_CASE("backward basics") {
  ADGraph g;
  NodeId x = g.leaf(Tensor::vector({1, 2, 3}));
  NodeId root = g.sum(x);
  Gradients grads = g.backward(root);
  REQUIRE(grads.at(x).data() == std::vector<double>{1, 1, 1});
  REQUIRE(grads.at(root).data() == std::vector<double>{1});  // d root / d root

  NodeId y = g.leaf(Tensor::vector({2, -3}));
  NodeId zero = g.leaf(Tensor::vector({0, 0}));
  Gradients g2 = g.backward(l1_distance(g, y, zero));
  REQUIRE(g2.at(y).data() == std::vector<double>{1, -1});

  REQUIRE_THROWS_AS(g.backward(x), DomainError);  // non-scalar root
}

TEST_CASE("graph purity: backward does not mutate forward values") {
  ADGraph g;
  NodeId x = g.leaf(Tensor::vector({0.5, -0.25}));
  NodeId y = g.tanh(g.scale(x, 3.0));
  NodeId root = g.sum(g.mul(y, y));
  const std::vector<double> before = g.value(y).data();
  g.backward(root);
  REQUIRE(g.value(y).data() == before);
}

TEST_CASE("finite differences: quadratic, constant, composite") {
  // quadratic: sum(x*x) is exact for central differences up to roundoff
  FiniteDiffResult quad = finite_diff_check(
      [](ADGraph& g, const std::vector<NodeId>& ids) {
        return g.sum(g.mul(ids[0], ids[0]));
      },
      {Tensor::vector({0.7, -1.3, 2.2})});
  REQUIRE(quad.checked == 3);
  REQUIRE(quad.max_rel_error < 1e-8);

  // constant loss: all gradients zero, zero error
  FiniteDiffResult constant = finite_diff_check(
      [](ADGraph& g, const std::vector<NodeId>&) { return g.leaf(Tensor::scalar(4.0)); },
      {Tensor::vector({1.0, 2.0})});
  REQUIRE(constant.max_rel_error == 0.0);

  // composite with kinks and the eps-guarded reciprocal
  FiniteDiffResult comp = finite_diff_check(
      [](ADGraph& g, const std::vector<NodeId>& ids) {
        NodeId d1 = l1_distance(g, ids[0], ids[1]);
        NodeId d2 = g.sum(g.abs(g.tanh(ids[0])));
        return g.add(d1, g.mul(d2, g.reciprocal_eps(d1, 1e-8)));
      },
      {Tensor::vector({0.4, -0.9, 1.7}), Tensor::vector({-0.2, 0.8, 0.3})});
  REQUIRE(comp.checked > 0);
  REQUIRE(comp.max_rel_error < 1e-4);
}

TEST_CASE("every differentiable kind passes randomized gradient checks") {
  RngStream rng(2024);
  const auto rand_vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    return Tensor::vector(std::move(v));
  };
  std::size_t instances = 0;
  for (int trial = 0; trial < 15; ++trial) {
    const Tensor a = rand_vec(4);
    const Tensor b = rand_vec(4);
    std::vector<double> md(12);
    for (double& x : md) x = rng.uniform(-1.5, 1.5);
    const Tensor m = Tensor::matrix(3, 4, std::move(md));

    const std::vector<LossBuilder> builders = {
        [](ADGraph& g, const std::vector<NodeId>& id) { return g.sum(g.add(id[0], id[1])); },
        [](ADGraph& g, const std::vector<NodeId>& id) { return g.sum(g.sub(id[0], id[1])); },
        [](ADGraph& g, const std::vector<NodeId>& id) { return g.sum(g.mul(id[0], id[1])); },
        [](ADGraph& g, const std::vector<NodeId>& id) { return g.sum(g.matmul(id[2], id[0])); },
        [](ADGraph& g, const std::vector<NodeId>& id) {
          return g.sum(g.mul(g.concat(id[0], id[1]), g.concat(id[1], id[0])));
        },
        [](ADGraph& g, const std::vector<NodeId>& id) { return g.sum(g.relu(id[0])); },
        [](ADGraph& g, const std::vector<NodeId>& id) { return g.sum(g.tanh(id[0])); },
        [](ADGraph& g, const std::vector<NodeId>& id) { return g.sum(g.abs(id[0])); },
        [](ADGraph& g, const std::vector<NodeId>& id) { return g.sum(g.scale(id[0], -2.5)); },
        [](ADGraph& g, const std::vector<NodeId>& id) {
          return g.sum(g.reciprocal_eps(g.abs(id[0]), 1e-8));
        },
        [](ADGraph& g, const std::vector<NodeId>& id) { return g.sum(g.softplus(id[0])); },
    };
    for (const LossBuilder& builder : builders) {
      FiniteDiffResult r = finite_diff_check(builder, {a, b, m});
      REQUIRE(r.max_rel_error < 1e-4);
      ++instances;
    }
  }
  REQUIRE(instances >= 100);
}

TEST_CASE("finite outputs on finite inputs") {
  RngStream rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    ADGraph g;
    std::vector<double> v(6);
    for (double& x : v) x = rng.uniform(-10.0, 10.0);
    NodeId a = g.leaf(Tensor::vector(v));
    NodeId out = g.softplus(g.tanh(g.scale(g.abs(a), 3.0)));
    REQUIRE(g.value(out).all_finite());
    REQUIRE(g.value(g.reciprocal_eps(g.abs(a), 1e-8)).all_finite());
  }
}
