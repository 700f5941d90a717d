#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hmgan/rng.hpp"
#include "hmgan/stack.hpp"
#include "hmgan/tensor.hpp"

namespace hmgan {

struct ModeCenter {
  double x = 0.0;
  double y = 0.0;
  std::size_t condition = 0;
};

struct RingSpec {
  std::size_t conditions = 2;
  std::size_t modes_per_condition = 8;
  double radius = 0.7;
  double sigma = 0.05;
};

/// Conditional mixture of Gaussians with mode centers on a ring. Condition
/// c's modes are rotated by c * pi / (modes * conditions) so conditions
/// interleave instead of overlapping.
struct SyntheticDataset {
  RingSpec spec;
  std::vector<Tensor> points;        // 2-D samples
  std::vector<std::size_t> labels;   // condition index per sample
  std::vector<ModeCenter> modes;

  std::size_t size() const { return points.size(); }

  Condition condition(std::size_t i) const {
    return Condition::one_hot(labels[i], spec.conditions);
  }
};

inline std::vector<ModeCenter> ring_mode_centers(const RingSpec& spec) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  std::vector<ModeCenter> modes;
  for (std::size_t c = 0; c < spec.conditions; ++c) {
    const double offset = static_cast<double>(c) * 3.141592653589793 /
                          static_cast<double>(spec.modes_per_condition * spec.conditions);
    for (std::size_t j = 0; j < spec.modes_per_condition; ++j) {
      const double angle =
          kTwoPi * static_cast<double>(j) / static_cast<double>(spec.modes_per_condition) + offset;
      modes.push_back({spec.radius * std::cos(angle), spec.radius * std::sin(angle), c});
    }
  }
  return modes;
}

/// Samples are drawn uniformly over (condition, mode) and jittered by an
/// isotropic Gaussian of the shared sigma.
inline SyntheticDataset make_ring_dataset(std::size_t conditions, std::size_t modes_per_condition,
                                          double radius, double sigma, std::size_t n,
                                          RngStream rng) {
  if (conditions < 1 || modes_per_condition < 1)
    throw DomainError("ring dataset needs >= 1 condition and >= 1 mode per condition");
  if (!(sigma > 0.0)) throw DomainError("sigma must be > 0");

  SyntheticDataset data;
  data.spec = {conditions, modes_per_condition, radius, sigma};
  data.modes = ring_mode_centers(data.spec);
  data.points.reserve(n);
  data.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = rng.uniform_int(conditions);
    const std::size_t j = rng.uniform_int(modes_per_condition);
    const ModeCenter& mode = data.modes[c * modes_per_condition + j];
    data.points.push_back(
        Tensor::vector({mode.x + sigma * rng.normal(), mode.y + sigma * rng.normal()}));
    data.labels.push_back(c);
  }
  return data;
}

// ---- CSV point interchange (header "x,y,c") --------------------------------

struct PointSet {
  std::vector<Tensor> points;
  std::vector<std::size_t> labels;
};

inline void write_points_csv(std::ostream& out, const std::vector<Tensor>& points,
                             const std::vector<std::size_t>& labels) {
  out << "x,y,c\n";
  char buf[96];
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%zu\n", points[i][0], points[i][1], labels[i]);
    out << buf;
  }
}

inline PointSet read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open point CSV '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DomainError("empty point CSV '" + path + "'");
  // tolerate an optional UTF-8 BOM and whitespace around the header
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::string header;
  for (char ch : line)
    if (!std::isspace(static_cast<unsigned char>(ch))) header += ch;
  if (header != "x,y,c")
    throw DomainError("point CSV '" + path + "' must start with header x,y,c");
  PointSet out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string fx, fy, fc;
    if (!std::getline(row, fx, ',') || !std::getline(row, fy, ',') || !std::getline(row, fc))
      throw DomainError("bad row " + std::to_string(lineno) + " in '" + path + "'");
    try {
      out.points.push_back(Tensor::vector({std::stod(fx), std::stod(fy)}));
      out.labels.push_back(static_cast<std::size_t>(std::stoul(fc)));
    } catch (const std::exception&) {
      throw DomainError("bad row " + std::to_string(lineno) + " in '" + path + "'");
    }
  }
  if (out.points.empty()) throw DomainError("point CSV '" + path + "' has no samples");
  return out;
}

}  // namespace hmgan
