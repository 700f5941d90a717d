#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "hmgan/ere_bounds.hpp"
#include "hmgan/rng.hpp"
#include "hmgan/stack.hpp"

using namespace hmgan;

namespace {

LayerStack identity_stack(std::size_t width, std::size_t layers) {
  std::vector<LayerSpec> specs(layers, {width, width, Activation::none});
  LayerStack s{std::move(specs)};
  for (std::size_t l = 1; l <= layers; ++l) s.weight(l) = Tensor::scaled_identity(width, 1.0);
  return s;
}

LayerStack random_stack(RngStream& rng, std::size_t width, std::size_t layers) {
  std::vector<LayerSpec> specs(layers, {width, width, Activation::tanh});
  LayerStack s{std::move(specs)};
  s.init_params(rng);
  return s;
}

std::vector<Tensor> random_inputs(RngStream& rng, std::size_t m, std::size_t width) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> v(width);
    for (double& x : v) x = rng.uniform(-1, 1);
    out.push_back(Tensor::vector(std::move(v)));
  }
  return out;
}

}  // namespace

TEST_CASE("identity stack gives all off-diagonal ratios ~ 1") {
  const LayerStack s = identity_stack(3, 3);
  RngStream rng(1);
  const std::vector<Tensor> inputs = random_inputs(rng, 5, 3);
  const RatioMatrix a = ratio_matrix_naive(s, inputs, 2);
  for (std::size_t u = 0; u < a.m; ++u)
    for (std::size_t v = 0; v < a.m; ++v) {
      if (u == v) {
        REQUIRE(std::isinf(a.at(u, v)));  // diagonal sentinel
      } else {
        REQUIRE(a.at(u, v) == Catch::Approx(1.0).epsilon(1e-7));
      }
    }
}

TEST_CASE("a doubling layer gives off-diagonal entries 0.5") {
  LayerStack s = identity_stack(2, 2);
  s.weight(2) = Tensor::scaled_identity(2, 2.0);
  const std::vector<Tensor> inputs = {Tensor::vector({0, 0}), Tensor::vector({1, 1})};
  const RatioMatrix a = ratio_matrix_batched(s, inputs, 2);
  REQUIRE(a.at(0, 1) == Catch::Approx(0.5).epsilon(1e-7));
  REQUIRE(a.at(1, 0) == Catch::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("naive and batched agree elementwise on random instances") {
  RngStream rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t layers = 2 + rng.uniform_int(3);
    const std::size_t m = 2 + rng.uniform_int(15);
    const LayerStack s = random_stack(rng, 4, layers);
    const std::vector<Tensor> inputs = random_inputs(rng, m, 4);
    const std::size_t layer = 2 + rng.uniform_int(layers - 1);
    const RatioMatrix naive = ratio_matrix_naive(s, inputs, layer);
    const RatioMatrix batched = ratio_matrix_batched(s, inputs, layer);
    REQUIRE(naive.m == batched.m);
    for (std::size_t u = 0; u < m; ++u)
      for (std::size_t v = 0; v < m; ++v) {
        if (u == v) continue;
        REQUIRE(std::abs(naive.at(u, v) - batched.at(u, v)) <= 1e-10);
      }
  }
}

TEST_CASE("ratio matrices are symmetric with non-negative entries") {
  RngStream rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const LayerStack s = random_stack(rng, 5, 3);
    const std::vector<Tensor> inputs = random_inputs(rng, 6, 5);
    const RatioMatrix a = ratio_matrix_batched(s, inputs, 3);
    for (std::size_t u = 0; u < a.m; ++u)
      for (std::size_t v = u + 1; v < a.m; ++v) {
        REQUIRE(a.at(u, v) == a.at(v, u));
        REQUIRE(a.at(u, v) >= 0.0);
        REQUIRE(std::isfinite(a.at(u, v)));
      }
  }
}

TEST_CASE("lower bounds") {
  // identity stack: every bound ~ 1
  {
    const LayerStack s = identity_stack(3, 4);
    RngStream rng(3);
    const BoundVector b = lower_bounds(s, random_inputs(rng, 6, 3));
    REQUIRE(b.entry_count() == 3);
    for (std::size_t layer = 2; layer <= 4; ++layer)
      REQUIRE(b.b(layer) == Catch::Approx(1.0).epsilon(1e-7));
  }
  // layer 2 doubles one pair's distance (entry 0.5), preserves the rest
  {
    LayerStack s = identity_stack(2, 2);
    s.weight(2) = Tensor::matrix(2, 2, {2.0, 0.0, 0.0, 1.0});  // doubles x only
    const std::vector<Tensor> inputs = {Tensor::vector({0, 0}), Tensor::vector({1, 0}),
                                        Tensor::vector({0, 1})};
    // pair (0,1) differs in x only: d moves 1 -> 2, entry 0.5
    // pair (0,2) differs in y only: entry 1
    const BoundVector b = lower_bounds(s, inputs);
    REQUIRE(b.b(2) == Catch::Approx(0.5).epsilon(1e-7));
  }
  // min <= mean over off-diagonal entries
  {
    RngStream rng(17);
    const LayerStack s = random_stack(rng, 4, 3);
    const std::vector<Tensor> inputs = random_inputs(rng, 8, 4);
    const RatioMatrix a = ratio_matrix_batched(s, inputs, 2);
    double mean = 0.0;
    std::size_t count = 0;
    for (std::size_t u = 0; u < a.m; ++u)
      for (std::size_t v = 0; v < a.m; ++v)
        if (u != v) {
          mean += a.at(u, v);
          ++count;
        }
    mean /= static_cast<double>(count);
    const BoundVector b = lower_bounds(s, inputs);
    REQUIRE(b.b(2) <= mean + 1e-12);
  }
}

TEST_CASE("adding a sample never increases a bound") {
  RngStream rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const LayerStack s = random_stack(rng, 4, 3);
    std::vector<Tensor> inputs = random_inputs(rng, 6, 4);
    const BoundVector before = lower_bounds(s, inputs);
    inputs.push_back(random_inputs(rng, 1, 4).front());
    const BoundVector after = lower_bounds(s, inputs);
    for (std::size_t layer = 2; layer <= 3; ++layer)
      REQUIRE(after.b(layer) <= before.b(layer) + 1e-12);
  }
}

TEST_CASE("subsampling cap is honored and recorded") {
  RngStream rng(29);
  const LayerStack s = random_stack(rng, 3, 2);
  const std::vector<Tensor> inputs = random_inputs(rng, 40, 3);
  const BoundVector capped = lower_bounds(s, inputs, 16);
  REQUIRE(capped.m == 16);
  const BoundVector full = lower_bounds(s, inputs, 0);
  REQUIRE(full.m == 40);
  // the capped bound is a min over a subset
  REQUIRE(capped.b(2) >= full.b(2) - 1e-12);
}

TEST_CASE("argument validation") {
  RngStream rng(31);
  const LayerStack s = random_stack(rng, 3, 3);
  const std::vector<Tensor> one = random_inputs(rng, 1, 3);
  REQUIRE_THROWS_AS(ratio_matrix_naive(s, one, 2), DomainError);
  const std::vector<Tensor> ok = random_inputs(rng, 3, 3);
  REQUIRE_THROWS_AS(ratio_matrix_naive(s, ok, 1), DomainError);
  REQUIRE_THROWS_AS(ratio_matrix_batched(s, ok, 4), DomainError);
  REQUIRE_THROWS_AS(lower_bounds(s, one), DomainError);
}
