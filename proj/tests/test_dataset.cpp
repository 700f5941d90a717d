#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "hmgan/dataset.hpp"
#include "hmgan/rng.hpp"

using namespace hmgan;

TEST_CASE("single mode at the origin") {
  const SyntheticDataset data = make_ring_dataset(1, 1, 0.0, 0.1, 400, RngStream(1));
  REQUIRE(data.modes.size() == 1);
  std::size_t close = 0;
  for (const Tensor& p : data.points) {
    const double r = std::hypot(p[0], p[1]);
    REQUIRE(r < 0.8);  // 8 sigma, astronomically safe
    if (r <= 0.4) ++close;
  }
  // >= 99% within 4 sigma of the nearest (only) center
  REQUIRE(close >= 396);
}

TEST_CASE("2 conditions x 8 modes make 16 distinct interleaved centers") {
  const SyntheticDataset data = make_ring_dataset(2, 8, 0.7, 0.05, 64, RngStream(2));
  REQUIRE(data.modes.size() == 16);
  std::set<std::pair<long, long>> distinct;
  for (const ModeCenter& m : data.modes)
    distinct.insert({std::lround(m.x * 1e9), std::lround(m.y * 1e9)});
  REQUIRE(distinct.size() == 16);
  for (const ModeCenter& m : data.modes)
    REQUIRE(std::hypot(m.x, m.y) == Catch::Approx(0.7).margin(1e-12));
}

TEST_CASE("mode proportions are uniform within binomial noise") {
  const std::size_t n = 8000;
  const SyntheticDataset data = make_ring_dataset(2, 8, 0.7, 0.02, n, RngStream(3));
  std::vector<std::size_t> counts(16, 0);
  for (std::size_t i = 0; i < n; ++i) {
    // nearest mode identifies the source at this sigma
    std::size_t best = 0;
    double best_d = 1e9;
    for (std::size_t m = 0; m < data.modes.size(); ++m) {
      const double dx = data.points[i][0] - data.modes[m].x;
      const double dy = data.points[i][1] - data.modes[m].y;
      if (dx * dx + dy * dy < best_d) {
        best_d = dx * dx + dy * dy;
        best = m;
      }
    }
    ++counts[best];
  }
  const double p = 1.0 / 16.0;
  const double sigma3 = 3.0 * std::sqrt(n * p * (1 - p));
  for (std::size_t c : counts)
    REQUIRE(std::abs(static_cast<double>(c) - n * p) <= sigma3);
}

TEST_CASE("99 percent of samples lie within 4 sigma of their nearest center") {
  const SyntheticDataset data = make_ring_dataset(2, 8, 0.7, 0.05, 4000, RngStream(4));
  std::size_t within = 0;
  for (const Tensor& pt : data.points) {
    double best = 1e9;
    for (const ModeCenter& m : data.modes)
      best = std::min(best, std::hypot(pt[0] - m.x, pt[1] - m.y));
    if (best <= 4.0 * 0.05) ++within;
  }
  REQUIRE(static_cast<double>(within) >= 0.99 * 4000);
}

TEST_CASE("dataset generation is deterministic in the seed") {
  const SyntheticDataset a = make_ring_dataset(2, 4, 0.5, 0.05, 100, RngStream(9));
  const SyntheticDataset b = make_ring_dataset(2, 4, 0.5, 0.05, 100, RngStream(9));
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.points[i] == b.points[i]);
    REQUIRE(a.labels[i] == b.labels[i]);
  }
}

TEST_CASE("point CSV round trip") {
  const SyntheticDataset data = make_ring_dataset(2, 3, 0.6, 0.05, 50, RngStream(5));
  const auto path = std::filesystem::temp_directory_path() / "hmgan_test_points.csv";
  {
    std::ofstream out(path);
    write_points_csv(out, data.points, data.labels);
  }
  const PointSet back = read_points_csv(path.string());
  REQUIRE(back.points.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) {
    REQUIRE(back.points[i][0] == Catch::Approx(data.points[i][0]).epsilon(1e-9));
    REQUIRE(back.points[i][1] == Catch::Approx(data.points[i][1]).epsilon(1e-9));
    REQUIRE(back.labels[i] == data.labels[i]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("point CSV rejects malformed input") {
  const auto path = std::filesystem::temp_directory_path() / "hmgan_bad_points.csv";
  {
    std::ofstream out(path);
    out << "a,b\n1,2\n";
  }
  REQUIRE_THROWS_AS(read_points_csv(path.string()), DomainError);
  {
    std::ofstream out(path);
    out << "x,y,c\n1,notanumber,0\n";
  }
  REQUIRE_THROWS_AS(read_points_csv(path.string()), DomainError);
  std::filesystem::remove(path);
  REQUIRE_THROWS_AS(read_points_csv("/nonexistent/points.csv"), DomainError);
}

TEST_CASE("argument validation") {
  REQUIRE_THROWS_AS(make_ring_dataset(0, 1, 0.5, 0.1, 10, RngStream(1)), DomainError);
  REQUIRE_THROWS_AS(make_ring_dataset(1, 1, 0.5, 0.0, 10, RngStream(1)), DomainError);
}
